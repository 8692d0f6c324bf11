"""Batch annotation: products + reviews JSONL in, annotations JSONL out."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import RULESET, TOOL_NAME, TOOL_VERSION
from .coref import resolve_clusters
from .parse import core_words

log = logging.getLogger(TOOL_NAME)


@dataclass
class AnnotationJob:
    products_path: str
    reviews_path: str
    output_path: str
    tool: str = TOOL_NAME
    version: str = TOOL_VERSION
    ruleset: str = RULESET
    batch_size: int = 64
    skipped: list = field(default_factory=list)


def _read_jsonl(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {e}")
    return records


def _validate_span(review_id, sentences, span):
    sent, start, end = span
    if not 0 <= sent < len(sentences):
        return False
    return 0 <= start < end <= len(sentences[sent])


def annotate_review(review, product_core):
    """Annotation record for one review dict; spans refer to corpus tokens."""
    clusters = resolve_clusters(review["sentences"], product_core)
    return {
        "review_id": review["review_id"],
        "core_words": list(product_core),
        "clusters": [[list(span) for span in cluster] for cluster in clusters],
    }


def annotate(job: AnnotationJob):
    """Run the job; returns the list of records written.

    Reviews whose spans cannot be aligned to their tokens are skipped with a
    logged reason and collected on ``job.skipped``; they are never silently
    dropped.
    """
    products = {p["product_id"]: p for p in _read_jsonl(job.products_path)}
    reviews = _read_jsonl(job.reviews_path)
    core_by_product = {
        pid: core_words(p.get("name", [])) for pid, p in products.items()
    }

    records = []
    for review in sorted(reviews, key=lambda r: r["review_id"]):
        rid = review.get("review_id")
        pid = review.get("product_id")
        if pid not in products:
            job.skipped.append((rid, f"unknown product {pid}"))
            log.warning("skipping %s: unknown product %s", rid, pid)
            continue
        record = annotate_review(review, core_by_product[pid])
        bad = [
            span
            for cluster in record["clusters"]
            for span in cluster
            if not _validate_span(rid, review["sentences"], span)
        ]
        if bad:
            job.skipped.append((rid, f"unalignable spans {bad}"))
            log.warning("skipping %s: unalignable spans %s", rid, bad)
            continue
        records.append(record)

    out = Path(job.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    manifest = {
        "tool": job.tool,
        "version": job.version,
        "ruleset": job.ruleset,
        "products": str(job.products_path),
        "reviews": str(job.reviews_path),
        "records": len(records),
        "skipped": [list(entry) for entry in job.skipped],
    }
    out.with_suffix(out.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return records
