"""Offline linguistic annotator for review corpora.

Reads pre-tokenized product and review JSONL files, extracts each product
name's core words from a shallow dependency analysis, resolves coreference
chains in every review with deterministic rules, and writes span-indexed
annotation records consumable by downstream rankers.
"""

TOOL_NAME = "review-annotator"
TOOL_VERSION = "0.1.0"
# rule-set revision; bump whenever lexicon or resolver behavior changes
RULESET = "rules-2026.08"
