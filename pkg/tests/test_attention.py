"""Selective attention: reweighting equivalence, pooling, cross-field flow."""

import math

import numpy as np
import pytest

from reviewrank import attention as A
from reviewrank import tensor as T
from reviewrank.errors import ShapeMismatchError
from reviewrank.gradcheck import grad_check


def rand(rng, *shape):
    return rng.normal(size=shape)


def attention_oracle(h, w_a):
    """Dense recomputation with plain numpy."""
    scores = h @ w_a @ h.T / math.sqrt(h.shape[1])
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


class TestBaseAttention:
    def test_single_token_row_is_one(self):
        rng = np.random.default_rng(0)
        out = A.base_attention(T.Tensor(rand(rng, 1, 4)), T.Tensor(rand(rng, 4, 4)))
        np.testing.assert_allclose(out.data, [[1.0]], atol=1e-15)

    def test_zero_weight_matrix_gives_uniform_rows(self):
        rng = np.random.default_rng(1)
        out = A.base_attention(T.Tensor(rand(rng, 5, 3)), T.Tensor(np.zeros((3, 3))))
        np.testing.assert_allclose(out.data, np.full((5, 5), 0.2), atol=1e-15)

    def test_against_dense_oracle(self):
        rng = np.random.default_rng(2)
        h = rand(rng, 6, 4)
        w = rand(rng, 4, 4)
        out = A.base_attention(T.Tensor(h), T.Tensor(w))
        np.testing.assert_allclose(out.data, attention_oracle(h, w), atol=1e-12)

    def test_rows_are_distributions(self):
        rng = np.random.default_rng(3)
        out = A.base_attention(T.Tensor(rand(rng, 7, 5)), T.Tensor(rand(rng, 5, 5)))
        assert np.all(out.data >= 0)
        np.testing.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-9)


def branch_reweight_oracle(a, bits, alpha, beta):
    """The three-branch closed form, applied entry by entry."""
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if bits[i] and bits[j]:
                out[i, j] = alpha * alpha * a[i, j]
            elif not bits[i] and not bits[j]:
                out[i, j] = beta * beta * a[i, j]
            else:
                out[i, j] = alpha * beta * a[i, j]
    return out


def real_mask_row(bits, alpha, beta):
    return np.where(np.asarray(bits) == 1, alpha, beta)[None, :]


class TestReweight:
    def test_all_hot_alpha_one_is_identity(self):
        rng = np.random.default_rng(4)
        a = A.base_attention(T.Tensor(rand(rng, 4, 3)), T.Tensor(rand(rng, 3, 3)))
        m = T.Tensor(np.ones((1, 4)))
        out = A.reweight(a, m)
        np.testing.assert_array_equal(out.data, a.data)

    def test_hot_cold_entry(self):
        a = T.Tensor(np.full((2, 2), 0.2))
        m = T.Tensor(real_mask_row([1, 0], 1.0, 0.5))
        out = A.reweight(a, m)
        assert out.data[0, 1] == pytest.approx(0.1, abs=1e-15)

    def test_outer_product_equals_branch_form(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            l = int(rng.integers(1, 9))
            a = rng.uniform(0.0, 1.0, size=(l, l))
            bits = rng.integers(0, 2, size=l)
            alpha = 1.0
            beta = float(rng.uniform(0.05, 0.95))
            out = A.reweight(T.Tensor(a), T.Tensor(real_mask_row(bits, alpha, beta)))
            want = branch_reweight_oracle(a, bits, alpha, beta)
            np.testing.assert_array_equal(out.data, want)

    def test_monotone_mask_effect(self):
        """With alpha = 1, cold tokens never gain attention mass."""
        rng = np.random.default_rng(6)
        for _ in range(50):
            l = int(rng.integers(2, 8))
            a = rng.dirichlet(np.ones(l), size=l)
            bits = rng.integers(0, 2, size=l)
            beta = float(rng.uniform(0.05, 0.95))
            out = A.reweight(T.Tensor(a), T.Tensor(real_mask_row(bits, 1.0, beta))).data
            cold = bits == 0
            assert out[:, cold].sum() <= a[:, cold].sum() + 1e-12
            assert np.all(out <= a + 1e-15)

    def test_hot_cold_ratio_is_alpha_over_beta(self):
        """For equal base weights the hot/cold damping ratio is exactly alpha/beta."""
        rng = np.random.default_rng(7)
        for _ in range(200):
            beta = float(rng.uniform(0.05, 0.95))
            a = T.Tensor(np.full((2, 2), 0.5))  # uniform attention over two tokens
            m = T.Tensor(real_mask_row([1, 0], 1.0, beta))
            out = A.reweight(a, m).data
            assert out[0, 0] / out[0, 1] == 1.0 / beta

    def test_mask_length_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            A.reweight(T.Tensor(np.ones((3, 3))), T.Tensor(np.ones((1, 2))))


class TestSelfAttend:
    def test_zero_weights_degenerate_to_residual(self):
        rng = np.random.default_rng(8)
        h = T.Tensor(rand(rng, 4, 3))
        a = T.Tensor(np.zeros((4, 4)))
        out = A.self_attend(h, a, T.Tensor(rand(rng, 3, 3)))
        np.testing.assert_array_equal(out.data, h.data)

    def test_shape_preserved(self):
        rng = np.random.default_rng(9)
        h = T.Tensor(rand(rng, 5, 3))
        a = A.base_attention(h, T.Tensor(rand(rng, 3, 3)))
        assert A.self_attend(h, a, T.Tensor(rand(rng, 3, 3))).shape == (5, 3)
        assert A.self_attend(h, a, plain_residual=True).shape == (5, 3)

    def test_beta_gradient_nonzero_for_mixed_mask(self):
        """The cold weight must receive gradient whenever the mask mixes."""
        rng = np.random.default_rng(10)
        h = T.Tensor(rand(rng, 4, 3))
        w_a = T.Tensor(rand(rng, 3, 3))
        w_v = T.Tensor(rand(rng, 3, 3))
        bits = np.array([1, 0, 1, 0], dtype=np.float64)
        beta_param = T.Parameter([[0.4]], "beta_raw")

        def loss():
            m = T.add(
                T.Tensor(bits[None, :]),
                T.mul(T.Tensor((1.0 - bits)[None, :]), beta_param),
            )
            out = A.selective_self_attention(h, m, w_a, w_v)
            return T.sum_all(T.mul(out, out))

        err = grad_check(loss, [beta_param])
        assert err < 1e-6
        beta_param.zero_grad()
        loss().backward()
        assert abs(beta_param.grad[0, 0]) > 1e-6


class TestCrossFieldAttend:
    def test_single_context_token_gets_all_weight(self):
        rng = np.random.default_rng(11)
        h_r = T.Tensor(rand(rng, 5, 3))
        h_p = T.Tensor(rand(rng, 1, 3))
        w_c = T.Tensor(rand(rng, 3, 3))
        w_u = T.Tensor(rand(rng, 3, 3))
        out = A.cross_field_attend(h_r, h_p, w_c, w_u)
        want = h_r.data + np.repeat(h_p.data @ w_u.data, 5, axis=0)
        np.testing.assert_allclose(out.data, want, atol=1e-12)

    def test_output_shape_matches_query_side(self):
        rng = np.random.default_rng(12)
        out = A.cross_field_attend(
            T.Tensor(rand(rng, 6, 4)),
            T.Tensor(rand(rng, 3, 4)),
            T.Tensor(rand(rng, 4, 4)),
            T.Tensor(rand(rng, 4, 4)),
        )
        assert out.shape == (6, 4)

    def test_against_dense_oracle(self):
        rng = np.random.default_rng(13)
        h_r, h_p = rand(rng, 4, 3), rand(rng, 5, 3)
        w_c, w_u = rand(rng, 3, 3), rand(rng, 3, 3)
        out = A.cross_field_attend(T.Tensor(h_r), T.Tensor(h_p), T.Tensor(w_c), T.Tensor(w_u))
        scores = h_r @ w_c @ h_p.T / math.sqrt(3)
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        weights = e / e.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(out.data, h_r + weights @ (h_p @ w_u), atol=1e-12)


class TestMaskedPool:
    def test_constant_mask_is_plain_mean(self):
        rng = np.random.default_rng(14)
        h = rand(rng, 5, 3)
        m = T.Tensor(np.full((1, 5), 0.3))  # all-cold binary mask realized at beta
        out = A.masked_pool(T.Tensor(h), m)
        np.testing.assert_allclose(out.data, h.mean(axis=0, keepdims=True), atol=1e-12)

    def test_beta_to_zero_limit_selects_hot_sentence(self):
        rng = np.random.default_rng(15)
        h = rand(rng, 6, 3)
        bits = np.array([1, 1, 0, 0, 0, 0], dtype=np.float64)
        out = A.masked_pool(
            T.Tensor(h), T.Tensor(real_mask_row(bits, 1.0, 1e-9))
        )
        np.testing.assert_allclose(out.data, h[:2].mean(axis=0, keepdims=True), atol=1e-6)

    def test_against_direct_oracle(self):
        rng = np.random.default_rng(16)
        for _ in range(30):
            l = int(rng.integers(1, 9))
            h = rand(rng, l, 4)
            m = rng.uniform(0.1, 1.0, size=(1, l))
            out = A.masked_pool(T.Tensor(h), T.Tensor(m))
            np.testing.assert_allclose(out.data, (m @ h) / m.sum(), atol=1e-12)

    def test_gradients(self):
        rng = np.random.default_rng(17)
        h = T.Parameter(rand(rng, 4, 3), "h")
        m = T.Parameter(rng.uniform(0.2, 1.0, size=(1, 4)), "m")
        err = grad_check(lambda: T.sum_all(A.masked_pool(h, m)), [h, m])
        assert err < 1e-6


class TestVisualPipeline:
    def test_identical_inputs_symmetric_outputs(self):
        rng = np.random.default_rng(18)
        h = rand(rng, 4, 3)
        w_c, w_u = T.Tensor(rand(rng, 3, 3)), T.Tensor(rand(rng, 3, 3))
        pooled_r, pooled_p = A.visual_pipeline(T.Tensor(h), T.Tensor(h.copy()), w_c, w_u)
        np.testing.assert_array_equal(pooled_r.data, pooled_p.data)

    def test_single_region_each_pooling_is_identity(self):
        rng = np.random.default_rng(19)
        h_r, h_p = T.Tensor(rand(rng, 1, 3)), T.Tensor(rand(rng, 1, 3))
        w_c, w_u = T.Tensor(rand(rng, 3, 3)), T.Tensor(rand(rng, 3, 3))
        pooled_r, _ = A.visual_pipeline(h_r, h_p, w_c, w_u)
        attended = A.cross_field_attend(h_r, h_p, w_c, w_u)
        np.testing.assert_array_equal(pooled_r.data, attended.data)

    def test_against_oracle(self):
        rng = np.random.default_rng(20)
        h_r, h_p = rand(rng, 3, 4), rand(rng, 5, 4)
        w_c, w_u = rand(rng, 4, 4), rand(rng, 4, 4)
        pooled_r, pooled_p = A.visual_pipeline(
            T.Tensor(h_r), T.Tensor(h_p), T.Tensor(w_c), T.Tensor(w_u)
        )

        def attend(q, kv):
            s = q @ w_c @ kv.T / math.sqrt(4)
            e = np.exp(s - s.max(axis=1, keepdims=True))
            w = e / e.sum(axis=1, keepdims=True)
            return q + w @ (kv @ w_u)

        np.testing.assert_allclose(
            pooled_r.data, attend(h_r, h_p).mean(axis=0, keepdims=True), atol=1e-12
        )
        np.testing.assert_allclose(
            pooled_p.data, attend(h_p, h_r).mean(axis=0, keepdims=True), atol=1e-12
        )
