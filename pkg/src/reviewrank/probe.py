"""Probe masks: locating the review sentences that talk about the product.

A probe mask is a binary, sentence-aligned token mask. Mask generation works
from the product name's core words and the review's coreference clusters:

1. pick the first cluster that mentions a core word;
2. if clusters exist but none mentions a core word, fall back to the first
   cluster (early repeated pronouns usually refer to the product);
3. with no clusters at all, the mask stays zero.

Every sentence containing a mention span of the chosen cluster is switched
hot over its whole token range. A lightweight heuristic annotator stands in
when no external coreference annotations are available.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .corpus import AnnotationRecord
from .errors import AnnotationSpanError, DegenerateInputError, MaskParameterError

THIRD_PERSON_PRONOUNS = frozenset(
    "it its they them their theirs this that these those".split()
)

STOPWORDS = frozenset(
    """a an the and or but for of with to in on by from at as per is are was
    were be been being have has had do does did not no yes so such very more
    most over under into out up down off than then""".split()
) | THIRD_PERSON_PRONOUNS

_IRREGULAR = {
    "children": "child",
    "feet": "foot",
    "men": "man",
    "women": "woman",
    "teeth": "tooth",
    "went": "go",
    "got": "get",
    "bought": "buy",
    "made": "make",
    "came": "come",
    "took": "take",
}

_SAFE_DOUBLES = ("ll", "ss", "ee", "oo", "zz")
_EDGE_PUNCT = re.compile(r"^[^0-9A-Za-z]+|[^0-9A-Za-z]+$")
_NON_ALPHA = re.compile(r"[^A-Za-z]")


def _strip_edge_punct(token):
    return _EDGE_PUNCT.sub("", token)


def _undouble(stem):
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-2:] not in _SAFE_DOUBLES:
        return stem[:-1]
    return stem


def lemmatize(token):
    """Deterministic suffix-stripping lemmatizer (plural, -ing, -ed).

    Good enough to make name/review token matching consistent; it is applied
    identically to both sides, so systematic quirks cancel out.
    """
    w = _strip_edge_punct(token).lower()
    if not w:
        return ""
    if w in _IRREGULAR:
        return _IRREGULAR[w]
    if w in STOPWORDS or len(w) <= 3:
        return w
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    if len(w) > 4 and (w.endswith("xes") or w.endswith("zes") or w.endswith("ches") or w.endswith("shes")):
        return w[:-2]
    if w.endswith("ing") and len(w) >= 6:
        return _undouble(w[:-3])
    if w.endswith("ed") and len(w) >= 5:
        return _undouble(w[:-2])
    if w.endswith("s") and not w.endswith("ss"):
        return w[:-1]
    return w


def _is_content(token):
    lemma = lemmatize(token)
    return bool(lemma) and lemma not in STOPWORDS


def extract_core_words(name, root_index=None):
    """Core lemmas of a product name.

    With a known syntactic root, take the root plus its immediate neighbors.
    Without one, scan the name left to right and stop at the first
    punctuation or digit run; stopwords are dropped either way.
    """
    if not name:
        raise DegenerateInputError("product name is empty")
    if root_index is not None:
        if not 0 <= root_index < len(name):
            raise DegenerateInputError(f"root index {root_index} outside name")
        window = name[max(0, root_index - 1) : root_index + 2]
        return [lemmatize(t) for t in window if _is_content(t)]
    picked = []
    for token in name:
        core = _strip_edge_punct(token)
        if not core or _NON_ALPHA.search(core):
            break
        if _is_content(core):
            picked.append(lemmatize(core))
        if core != token:
            break  # the token carried punctuation, e.g. a trailing comma
    return picked


def cluster_lemmas(cluster, sentences):
    """All lemmas covered by a cluster's mention spans."""
    out = set()
    for sent, start, end in cluster:
        for token in sentences[sent][start:end]:
            out.add(lemmatize(token))
    return out


def select_gold_cluster(clusters, core_words, sentences):
    """Three-case cluster choice; returns None when there are no clusters."""
    core = set(core_words)
    for cluster in clusters:
        if cluster and cluster_lemmas(cluster, sentences) & core:
            return cluster
    if clusters:
        return clusters[0]
    return None


@dataclass
class ProbeMask:
    """Binary token mask, constant within each sentence."""

    values: np.ndarray
    boundaries: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int8)
        for start, end in self.boundaries:
            segment = self.values[start:end]
            if segment.size and not np.all(segment == segment[0]):
                raise AnnotationSpanError("mask is not sentence-constant")

    def __len__(self):
        return int(self.values.size)


@dataclass
class RealMask:
    """Real-valued mask: alpha on hot tokens, beta on cold ones."""

    values: np.ndarray
    alpha: float
    beta: float


def generate_probe_mask(review, gold_cluster):
    """Mark every sentence holding a mention span of the gold cluster."""
    bounds = review.boundaries
    values = np.zeros(sum(len(s) for s in review.sentences), dtype=np.int8)
    if gold_cluster:
        for sent, start, end in gold_cluster:
            if not 0 <= sent < len(review.sentences):
                raise AnnotationSpanError(
                    f"{review.review_id}: sentence index {sent} out of range"
                )
            if not 0 <= start < end <= len(review.sentences[sent]):
                raise AnnotationSpanError(
                    f"{review.review_id}: span [{start}, {end}) outside sentence {sent}"
                )
            lo, hi = bounds[sent]
            values[lo:hi] = 1
    return ProbeMask(values=values, boundaries=bounds)


def realize_mask(mask, alpha, beta):
    """Affine transform of a binary mask: alpha where hot, beta where cold."""
    if not (1.0 >= alpha > beta > 0.0):
        raise MaskParameterError(
            f"need 1 >= alpha > beta > 0, got alpha={alpha}, beta={beta}"
        )
    values = np.where(np.asarray(mask.values) == 1, float(alpha), float(beta))
    return RealMask(values=values, alpha=float(alpha), beta=float(beta))


def generate_beta(h_seq, w_gen, b_gen):
    """Per-review cold weight from the sequence state; sigmoid keeps it in (0,1)."""
    return T.sigmoid(T.add(T.matmul(h_seq, w_gen), b_gen))


def heuristic_annotate(review, core_words):
    """Stand-in for an external coreference tool.

    Builds at most two clusters: the occurrences of core-word lemmas, and the
    chain of the most frequent third-person pronoun. Deterministic; ties on
    pronoun frequency go to the earlier first occurrence.
    """
    core = set(core_words)
    core_spans = []
    pronoun_spans = {}
    for si, sent in enumerate(review.sentences):
        for ti, token in enumerate(sent):
            lemma = lemmatize(token)
            if lemma in core:
                core_spans.append((si, ti, ti + 1))
            elif lemma in THIRD_PERSON_PRONOUNS:
                pronoun_spans.setdefault(lemma, []).append((si, ti, ti + 1))
    clusters = []
    if core_spans:
        clusters.append(core_spans)
    if pronoun_spans:
        best = min(
            pronoun_spans,
            key=lambda p: (-len(pronoun_spans[p]), pronoun_spans[p][0]),
        )
        clusters.append(pronoun_spans[best])
    return AnnotationRecord(
        review_id=review.review_id, core_words=sorted(core), clusters=clusters
    )


def probe_mask_for_review(review, product, annotation=None):
    """Full mask pipeline for one review: core words, clusters, Algorithm run."""
    if annotation is not None and annotation.core_words:
        core = list(annotation.core_words)
    else:
        core = extract_core_words(product.name) if product.name else []
    if annotation is None:
        annotation = heuristic_annotate(review, core)
    gold = select_gold_cluster(annotation.clusters, core, review.sentences)
    return generate_probe_mask(review, gold)
