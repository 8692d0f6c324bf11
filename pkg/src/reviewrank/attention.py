"""Selective attention: mask-reweighted self-attention, cross-field
attention, and masked pooling.

All functions are pure in their tensor arguments; learned weight matrices
are passed in explicitly. The probe mask enters twice: the outer product of
the real-valued mask rescales the self-attention weight matrix (hot-to-hot
pairs keep their weight, anything touching a cold token is damped by the
cold weight), and the same mask drives the final weighted pooling. No row
re-normalization happens after masking; the damping is the point.
"""

from __future__ import annotations

import math

from . import tensor as T
from .errors import ShapeMismatchError


def base_attention(h, w_a):
    """Scaled bilinear self-attention weights: softmax(h W h^T / sqrt(d))."""
    scores = T.scale(T.matmul(T.matmul(h, w_a), T.transpose(h)), 1.0 / math.sqrt(h.cols))
    return T.softmax_rows(scores)


def reweight(a, m):
    """Rescale attention weights by the outer product of the real mask.

    Entry (i, j) becomes ``m_i * m_j * a_ij``: alpha^2, alpha*beta, or beta^2
    times the base weight depending on which side of the mask each token
    falls on.
    """
    if m.rows != 1 or m.cols != a.rows or a.rows != a.cols:
        raise ShapeMismatchError(
            f"reweight: mask {m.shape} does not fit attention {a.shape}"
        )
    return T.mul(T.matmul(T.transpose(m), m), a)


def self_attend(h, a, w_v=None, plain_residual=False):
    """Residual self-attention readout: h + A (h W_v), or h + A h when plain."""
    if plain_residual or w_v is None:
        return T.add(h, T.matmul(a, h))
    return T.add(h, T.matmul(a, T.matmul(h, w_v)))


def cross_field_attend(h_query, h_context, w_c, w_u=None, plain_residual=False):
    """Attend from one field into another; queries keep a residual path."""
    scores = T.scale(
        T.matmul(T.matmul(h_query, w_c), T.transpose(h_context)),
        1.0 / math.sqrt(h_query.cols),
    )
    weights = T.softmax_rows(scores)
    if plain_residual or w_u is None:
        return T.add(h_query, T.matmul(weights, h_context))
    return T.add(h_query, T.matmul(weights, T.matmul(h_context, w_u)))


def masked_pool(h, m):
    """Mask-weighted mean of rows: sum_i m_i h_i / sum_i m_i."""
    if m.rows != 1 or m.cols != h.rows:
        raise ShapeMismatchError(f"masked_pool: mask {m.shape} does not fit {h.shape}")
    return T.div(T.matmul(m, h), T.sum_all(m))


def selective_self_attention(h, m, w_a, w_v=None, plain_residual=False):
    """Base attention, mask reweighting, and residual readout in one call."""
    return self_attend(h, reweight(base_attention(h, w_a), m), w_v, plain_residual)


def visual_pipeline(h_regions_review, h_regions_product, w_c, w_u=None, plain_residual=False):
    """Cross-attention between the two fields' region states, then mean pooling.

    Both directions share the same weights, so identical inputs produce
    identical pooled outputs on both sides.
    """
    attended_review = cross_field_attend(
        h_regions_review, h_regions_product, w_c, w_u, plain_residual
    )
    attended_product = cross_field_attend(
        h_regions_product, h_regions_review, w_c, w_u, plain_residual
    )
    return T.mean_rows(attended_review), T.mean_rows(attended_product)
