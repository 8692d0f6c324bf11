"""Deterministic coreference resolution over pre-tokenized review text.

The resolver works on a detokenized form of each review (tokens joined by
single spaces) and finds mention candidates as character spans; spans are
then mapped back onto the corpus tokens, clamping to token boundaries.
Corpus tokens stay the ground truth throughout.

Clusters follow the usual tool convention: only chains with at least two
mentions are emitted. Pronouns attach to the nearest preceding nominal
chain with number agreement when one exists; leading pronouns attach to the
first nominal chain; with no nominal chain at all, same-lemma pronouns form
their own chain.
"""

from dataclasses import dataclass

from .lexicon import (
    DETERMINERS,
    PLURAL_PRONOUNS,
    THIRD_PERSON_PRONOUNS,
    is_nominal,
    lemmatize,
    looks_plural,
    strip_punct,
)


@dataclass
class Mention:
    sent: int
    start: int      # token index within sentence
    end: int        # exclusive
    kind: str       # "nominal" | "pronoun"
    lemma: str
    plural: bool
    order: int      # document-wide token position of the head


def detokenize_with_offsets(tokens):
    """Join tokens with single spaces; return the text and char ranges."""
    text = " ".join(tokens)
    offsets = []
    pos = 0
    for token in tokens:
        offsets.append((pos, pos + len(token)))
        pos += len(token) + 1
    return text, offsets


def char_span_to_tokens(offsets, start, end):
    """Token range covering a char span; partial overlaps clamp outward."""
    first = last = None
    for i, (a, b) in enumerate(offsets):
        if b > start and a < end:
            if first is None:
                first = i
            last = i
    if first is None:
        return None
    return first, last + 1


def extract_mentions(sentences, core_lemmas):
    """Mention candidates: pronouns, core-word tokens, determiner-marked or
    repeated nominals. Spans absorb an adjacent leading determiner."""
    counts = {}
    for sentence in sentences:
        for token in sentence:
            if is_nominal(token):
                counts[lemmatize(token)] = counts.get(lemmatize(token), 0) + 1

    mentions = []
    order = 0
    for si, sentence in enumerate(sentences):
        text, offsets = detokenize_with_offsets(sentence)
        for ti, token in enumerate(sentence):
            surface = strip_punct(token).lower()
            lemma = lemmatize(token)
            if surface in THIRD_PERSON_PRONOUNS:
                mentions.append(
                    Mention(
                        sent=si,
                        start=ti,
                        end=ti + 1,
                        kind="pronoun",
                        lemma=surface,
                        plural=surface in PLURAL_PRONOUNS,
                        order=order + ti,
                    )
                )
                continue
            if not is_nominal(token):
                continue
            marked = ti > 0 and strip_punct(sentence[ti - 1]).lower() in DETERMINERS
            if lemma in core_lemmas or marked or counts.get(lemma, 0) >= 2:
                # align through the detokenized text, then clamp to tokens
                char_start = offsets[ti - 1][0] if marked else offsets[ti][0]
                token_range = char_span_to_tokens(offsets, char_start, offsets[ti][1])
                if token_range is None:
                    continue
                mentions.append(
                    Mention(
                        sent=si,
                        start=token_range[0],
                        end=token_range[1],
                        kind="nominal",
                        lemma=lemma,
                        plural=looks_plural(token),
                        order=order + ti,
                    )
                )
        order += len(sentence)
    mentions.sort(key=lambda m: m.order)
    return mentions


def resolve_clusters(sentences, core_lemmas):
    """Coreference clusters as lists of (sentence, token_start, token_end)."""
    mentions = extract_mentions(sentences, set(core_lemmas))
    chains = {}  # nominal lemma -> list of mentions
    chain_order = []
    for mention in mentions:
        if mention.kind != "nominal":
            continue
        if mention.lemma not in chains:
            chains[mention.lemma] = []
            chain_order.append(mention.lemma)
        chains[mention.lemma].append(mention)

    orphan_pronouns = {}
    for mention in mentions:
        if mention.kind != "pronoun":
            continue
        antecedents = [
            (lemma, prior)
            for lemma in chain_order
            for prior in chains[lemma]
            if prior.kind == "nominal" and prior.order < mention.order
        ]
        chosen = None
        if antecedents:
            agreeing = [
                (lemma, prior)
                for lemma, prior in antecedents
                if prior.plural == mention.plural
            ]
            pool = agreeing or antecedents
            chosen = max(pool, key=lambda pair: pair[1].order)[0]
        elif chain_order:
            # cataphora only reaches forward within the pronoun's own
            # sentence ("these pins ..."), never across sentences
            first = chains[chain_order[0]][0]
            if first.sent == mention.sent:
                chosen = chain_order[0]
        if chosen is not None:
            chains[chosen].append(mention)
        else:
            orphan_pronouns.setdefault(mention.lemma, []).append(mention)

    clusters = []
    for lemma in chain_order:
        members = sorted(chains[lemma], key=lambda m: m.order)
        if len(members) >= 2:
            clusters.append([(m.sent, m.start, m.end) for m in members])
    for lemma in sorted(orphan_pronouns):
        members = sorted(orphan_pronouns[lemma], key=lambda m: m.order)
        if len(members) >= 2:
            clusters.append([(m.sent, m.start, m.end) for m in members])
    clusters.sort(key=lambda spans: spans[0])
    return clusters
