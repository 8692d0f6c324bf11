"""Contrastive representation learning over two natural pairing domains.

The inner-instance domain pairs each instance's text with its image: product
description pairs and high-scoring reviews count as positives, low-scoring
reviews as negatives. The product-review domain pairs each review with its
own product, per modality, split the same way by score. Both losses are
noise-contrastive: minus log of the positive pair's share of the summed
exponential-cosine scores within the current batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import tensor as T
from .errors import DegenerateInputError

DEFAULT_THETA_HI = 3
DEFAULT_THETA_LO = 1
MODALITIES = ("t", "v")


class ProjectionHead:
    """Two linear layers with a tanh in between; shared per (modality, domain)."""

    __slots__ = ("w1", "b1", "w2", "b2")

    def __init__(self, w1, b1, w2, b2):
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2

    def project(self, pooled):
        hidden = T.tanh(T.add(T.matmul(pooled, self.w1), self.b1))
        return T.add(T.matmul(hidden, self.w2), self.b2)

    def all(self):
        return [self.w1, self.b1, self.w2, self.b2]


def score(a, b, tau=1.0):
    """Exponential cosine similarity exp(cos(a, b) / tau); scale-invariant."""
    if tau <= 0:
        raise DegenerateInputError(f"tau must be positive, got {tau}")
    return T.exp(T.scale(T.dot(T.l2_normalize(a), T.l2_normalize(b)), 1.0 / tau))


@dataclass
class Pair:
    """One (left, right) representation pair with its provenance id."""

    a: object
    b: object
    owner: str


@dataclass
class PairSets:
    """Contrastive membership for one batch.

    ``pr_positive``/``pr_negative`` are keyed by modality; the same review
    set backs every modality's list.
    """

    ii_positive: list = field(default_factory=list)
    ii_negative: list = field(default_factory=list)
    ii_product: list = field(default_factory=list)
    pr_positive: dict = field(default_factory=lambda: {m: [] for m in MODALITIES})
    pr_negative: dict = field(default_factory=lambda: {m: [] for m in MODALITIES})

    def sizes(self):
        return {
            "ii_positive": len(self.ii_positive),
            "ii_negative": len(self.ii_negative),
            "ii_product": len(self.ii_product),
            "pr_positive": len(self.pr_positive["t"]),
            "pr_negative": len(self.pr_negative["t"]),
        }


def build_pair_sets(
    entries,
    theta_hi=DEFAULT_THETA_HI,
    theta_lo=DEFAULT_THETA_LO,
    multimodal=True,
):
    """Apply the membership rules to one batch.

    ``entries`` is a list of dicts, one per product:
      ``product_id``, ``product_text`` / ``product_visual`` (projected
      product reps in the ii domain), and ``reviews`` — a list of dicts with
      ``review_id``, ``score`` and the review's projected reps:
      ``ii_t``, ``ii_v``, ``pr_t`` (review, product), ``pr_v``.

    Reviews scoring between the thresholds (exclusive band) join no set.
    """
    sets = PairSets()
    for entry in entries:
        pid = entry["product_id"]
        if multimodal and entry.get("product_text") is not None:
            sets.ii_product.append(Pair(entry["product_text"], entry["product_visual"], pid))
        for review in entry["reviews"]:
            rid = review["review_id"]
            score_value = review["score"]
            if score_value >= theta_hi:
                ii_bucket, pr_bucket = sets.ii_positive, sets.pr_positive
            elif score_value <= theta_lo:
                ii_bucket, pr_bucket = sets.ii_negative, sets.pr_negative
            else:
                continue
            if multimodal:
                ii_bucket.append(Pair(review["ii_t"], review["ii_v"], rid))
            for modality in MODALITIES:
                if not multimodal and modality == "v":
                    continue
                pair = review.get(f"pr_{modality}")
                if pair is not None:
                    pr_bucket[modality].append(Pair(pair[0], pair[1], rid))
    return sets


def _nce_loss(numerator_pairs, universe_pairs, tau):
    """-sum over numerator pairs of log(phi(pair) / sum over universe phi)."""
    if not numerator_pairs:
        return T.Tensor([[0.0]]), False
    scores = {id(p): score(p.a, p.b, tau) for p in universe_pairs}
    denominator = T.add_n(list(scores.values()))
    log_denominator = T.log(denominator)
    terms = []
    for pair in numerator_pairs:
        terms.append(T.sub(log_denominator, T.log(scores[id(pair)])))
    return T.add_n(terms), True


def cpc_inner_instance(sets, tau=1.0):
    """Inner-instance loss over positives and product pairs.

    Returns ``(loss, active)``; ``active`` is False when the numerator set
    was empty and the loss is a constant zero (flagged for diagnostics).
    """
    numerator = list(sets.ii_positive) + list(sets.ii_product)
    universe = list(sets.ii_positive) + list(sets.ii_negative) + list(sets.ii_product)
    return _nce_loss(numerator, universe, tau)


def cpc_product_review(sets, tau=1.0, modalities=MODALITIES):
    """Per-modality product-review losses and their sum.

    Returns ``(by_modality, total, active_by_modality)``; the total is the
    plain sum of the per-modality losses.
    """
    by_modality = {}
    active = {}
    for m in modalities:
        numerator = sets.pr_positive[m]
        universe = sets.pr_positive[m] + sets.pr_negative[m]
        by_modality[m], active[m] = _nce_loss(numerator, universe, tau)
    total = T.add_n([by_modality[m] for m in modalities])
    return by_modality, total, active


def per_instance_probabilities(sets, tau=1.0, multimodal=True):
    """Diagnostic: each instance pair's softmax share of its denominator.

    Detached values; never part of the loss.
    """
    out = {}
    ii_universe = list(sets.ii_positive) + list(sets.ii_negative) + list(sets.ii_product)
    if ii_universe and multimodal:
        phis = {p.owner: score(p.a, p.b, tau).item() for p in ii_universe}
        total = sum(phis.values())
        out["ii"] = {owner: phi / total for owner, phi in phis.items()}
    for m in MODALITIES:
        universe = sets.pr_positive[m] + sets.pr_negative[m]
        if universe:
            phis = {p.owner: score(p.a, p.b, tau).item() for p in universe}
            total = sum(phis.values())
            out[f"pr_{m}"] = {owner: phi / total for owner, phi in phis.items()}
    return out
