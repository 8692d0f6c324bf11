"""Multimodal review-helpfulness ranking.

End-to-end CPU pipeline: probe-mask-guided selective attention over review
text, contrastive representation learning across text/image and
product/review pairs, pairwise ranking training, and MAP/NDCG evaluation.
"""

__version__ = "0.1.0"
