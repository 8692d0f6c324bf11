"""Ranking metrics over per-product review lists.

MAP treats a review as relevant when its gold helpfulness score reaches a
configurable threshold (default 1). NDCG@N uses graded gains ``2**s - 1``
with a ``log2(rank + 1)`` discount. Prediction ties are broken by review id
so every metric is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError

DEFAULT_RELEVANCE_THRESHOLD = 1


def rank_order(predictions, review_ids):
    """Indices that sort reviews by descending prediction, ids breaking ties."""
    if len(predictions) != len(review_ids):
        raise DegenerateInputError("predictions and review_ids differ in length")
    order = sorted(range(len(predictions)), key=lambda i: (-predictions[i], review_ids[i]))
    return order


def average_precision(ranked_golds, threshold=DEFAULT_RELEVANCE_THRESHOLD):
    """AP of a ranked gold-score list; None when nothing is relevant."""
    rel = np.asarray(ranked_golds) >= threshold
    if not rel.any():
        return None
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    return float((hits[rel] / ranks[rel]).mean())


def dcg_at(ranked_golds, n):
    gains = (2.0 ** np.asarray(ranked_golds[:n], dtype=np.float64)) - 1.0
    discounts = np.log2(np.arange(2, gains.size + 2))
    return float((gains / discounts).sum())


def ndcg_at(ranked_golds, n):
    """NDCG@n of a ranked gold-score list; all-zero gold is defined as 0."""
    if len(ranked_golds) == 0:
        raise DegenerateInputError("ndcg of an empty ranking")
    ideal = sorted(ranked_golds, reverse=True)
    idcg = dcg_at(ideal, n)
    if idcg == 0.0:
        return 0.0
    return dcg_at(ranked_golds, n) / idcg


@dataclass
class ProductMetrics:
    product_id: str
    n_reviews: int
    n_relevant: int
    ap: float | None
    ndcg3: float
    ndcg5: float


@dataclass
class MetricReport:
    """MAP / NDCG@3 / NDCG@5 averaged over products.

    Products with no relevant review are excluded from MAP (and counted in
    ``products_without_relevant``); all-zero-gold products contribute 0 to
    the NDCG means.
    """

    map: float
    ndcg3: float
    ndcg5: float
    relevance_threshold: int
    products_scored: int
    products_without_relevant: int
    per_product: list = field(default_factory=list)

    def to_dict(self, include_products=False):
        out = {
            "map": self.map,
            "ndcg3": self.ndcg3,
            "ndcg5": self.ndcg5,
            "relevance_threshold": self.relevance_threshold,
            "products_scored": self.products_scored,
            "products_without_relevant": self.products_without_relevant,
        }
        if include_products:
            out["per_product"] = [vars(p) for p in self.per_product]
        return out


def evaluate_ranking(product_rows, threshold=DEFAULT_RELEVANCE_THRESHOLD):
    """Score a collection of ``(product_id, review_ids, predictions, golds)`` rows."""
    per_product = []
    aps = []
    n3s = []
    n5s = []
    skipped = 0
    for product_id, review_ids, predictions, golds in product_rows:
        if len(golds) == 0:
            raise DegenerateInputError(f"product {product_id} has no reviews")
        order = rank_order(predictions, review_ids)
        ranked = [golds[i] for i in order]
        ap = average_precision(ranked, threshold)
        n3 = ndcg_at(ranked, 3)
        n5 = ndcg_at(ranked, 5)
        per_product.append(
            ProductMetrics(
                product_id=product_id,
                n_reviews=len(ranked),
                n_relevant=int(sum(1 for g in ranked if g >= threshold)),
                ap=ap,
                ndcg3=n3,
                ndcg5=n5,
            )
        )
        if ap is None:
            skipped += 1
        else:
            aps.append(ap)
        n3s.append(n3)
        n5s.append(n5)
    return MetricReport(
        map=float(np.mean(aps)) if aps else 0.0,
        ndcg3=float(np.mean(n3s)) if n3s else 0.0,
        ndcg5=float(np.mean(n5s)) if n5s else 0.0,
        relevance_threshold=threshold,
        products_scored=len(per_product),
        products_without_relevant=skipped,
        per_product=per_product,
    )


def reference_average_precision(ranked_golds, threshold=DEFAULT_RELEVANCE_THRESHOLD):
    """Definitional AP, plain loops; the eval CLI cross-check path."""
    relevant_seen = 0
    total_relevant = sum(1 for g in ranked_golds if g >= threshold)
    if total_relevant == 0:
        return None
    acc = 0.0
    for k, g in enumerate(ranked_golds, start=1):
        if g >= threshold:
            relevant_seen += 1
            acc += relevant_seen / k
    return acc / total_relevant


def reference_ndcg_at(ranked_golds, n):
    """Definitional NDCG@n, plain loops; the eval CLI cross-check path."""
    def dcg(scores):
        total = 0.0
        for i, s in enumerate(scores[:n], start=1):
            total += (2.0**s - 1.0) / math.log2(i + 1)
        return total

    ideal = dcg(sorted(ranked_golds, reverse=True))
    if ideal == 0.0:
        return 0.0
    return dcg(list(ranked_golds)) / ideal
