"""Embedding table, recurrent text encoder, and visual region encoder."""

import numpy as np
import pytest

from reviewrank import encoders as E
from reviewrank import tensor as T
from reviewrank.errors import CorpusFormatError, DegenerateInputError
from reviewrank.gradcheck import grad_check
from test_tensor import gru_oracle, make_gru_params


class TestEmbeddingTable:
    def test_unknown_tokens_share_unk_row(self):
        table = E.EmbeddingTable(["cat", "dog"], 4, np.random.default_rng(0))
        out = table.embed(["zebra", "yak", "emu"])
        for i in range(3):
            np.testing.assert_array_equal(out.data[i], table.weights.data[0])

    def test_dropout_zero_train_eval_identical(self):
        table = E.EmbeddingTable(["cat", "dog"], 4, np.random.default_rng(1))
        rng = np.random.default_rng(2)
        train = table.embed(["cat", "dog"], dropout_rate=0.0, rng=rng, training=True)
        eval_ = table.embed(["cat", "dog"], training=False)
        np.testing.assert_array_equal(train.data, eval_.data)

    def test_empty_input_rejected(self):
        table = E.EmbeddingTable(["cat"], 4, np.random.default_rng(3))
        with pytest.raises(DegenerateInputError):
            table.embed([])

    def test_pretrained_vector_read_back_exactly(self, tmp_path):
        values = [0.125, -3.5, 0.0078125]  # exactly representable
        path = tmp_path / "vectors.txt"
        path.write_text("cat " + " ".join(repr(v) for v in values) + "\n")
        pretrained = E.load_pretrained_embeddings(path, 3)
        table = E.EmbeddingTable(
            ["cat", "dog"], 3, np.random.default_rng(4), pretrained=pretrained
        )
        np.testing.assert_array_equal(
            table.embed(["cat"]).data, np.array([values])
        )

    def test_pretrained_dim_mismatch_rejected(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("cat 1.0 2.0\n")
        with pytest.raises(CorpusFormatError):
            E.load_pretrained_embeddings(path, 3)


def make_text_encoder(rng, d_in, d_h):
    return E.TextEncoder(make_gru_params(rng, d_in, d_h), d_h)


class TestTextEncoder:
    def test_length_one_sequence_state_equals_only_token_state(self):
        rng = np.random.default_rng(5)
        enc = make_text_encoder(rng, 3, 4)
        out = enc.encode(T.Tensor(rng.normal(size=(1, 3))))
        np.testing.assert_array_equal(out.token_states.data[0], out.sequence_state.data[0])

    def test_prefix_property_exact(self):
        """Causality: a prefix's states equal the full run's leading states."""
        rng = np.random.default_rng(6)
        enc = make_text_encoder(rng, 3, 5)
        x = rng.normal(size=(7, 3))
        full = enc.encode(T.Tensor(x)).token_states.data
        for k in (1, 3, 5):
            prefix = enc.encode(T.Tensor(x[:k])).token_states.data
            np.testing.assert_array_equal(prefix, full[:k])

    def test_against_cell_loop_oracle(self):
        rng = np.random.default_rng(7)
        enc = make_text_encoder(rng, 4, 6)
        x = rng.normal(size=(5, 4))
        out = enc.encode(T.Tensor(x))
        h = np.zeros((1, 6))
        for t in range(5):
            h = gru_oracle(x[t : t + 1], h, enc.params)
            np.testing.assert_allclose(out.token_states.data[t : t + 1], h, atol=1e-10)
        np.testing.assert_allclose(out.sequence_state.data, h, atol=1e-10)

    def test_gradients_through_sequence(self):
        rng = np.random.default_rng(8)
        enc = make_text_encoder(rng, 3, 4)
        x = T.Tensor(rng.normal(size=(4, 3)))
        err = grad_check(lambda: T.sum_all(enc.encode(x).token_states), enc.params.all())
        assert err < 1e-5


def make_visual_encoder(rng, d_in, d_v):
    return E.VisualEncoder(
        w_in=T.Parameter(rng.normal(scale=0.3, size=(d_in, d_v)), "w_in"),
        b_in=T.Parameter(np.zeros((1, d_v)), "b_in"),
        w_a=T.Parameter(rng.normal(scale=0.3, size=(d_v, d_v)), "w_a"),
        w_v=T.Parameter(rng.normal(scale=0.3, size=(d_v, d_v)), "w_v"),
    )


class TestVisualEncoder:
    def test_single_region_residual_form(self):
        rng = np.random.default_rng(9)
        enc = make_visual_encoder(rng, 5, 4)
        feats = rng.normal(size=(1, 5))
        out = enc.encode(feats)
        h = feats @ enc.w_in.data + enc.b_in.data
        np.testing.assert_allclose(out.data, h + h @ enc.w_v.data, atol=1e-12)
        assert out.shape == (1, 4)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(10)
        enc = make_visual_encoder(rng, 4, 4)
        feats = rng.normal(size=(5, 4))
        perm = rng.permutation(5)
        out = enc.encode(feats).data
        out_perm = enc.encode(feats[perm]).data
        np.testing.assert_array_equal(out_perm, out[perm])

    def test_against_dense_oracle(self):
        rng = np.random.default_rng(11)
        enc = make_visual_encoder(rng, 3, 4)
        feats = rng.normal(size=(4, 3))
        h = feats @ enc.w_in.data + enc.b_in.data
        scores = h @ enc.w_a.data @ h.T / np.sqrt(4)
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        weights = e / e.sum(axis=1, keepdims=True)
        want = h + weights @ (h @ enc.w_v.data)
        np.testing.assert_allclose(enc.encode(feats).data, want, atol=1e-12)

    def test_empty_features_rejected(self):
        enc = make_visual_encoder(np.random.default_rng(12), 3, 4)
        with pytest.raises(DegenerateInputError):
            enc.encode(np.zeros((0, 3)))

    def test_width_mismatch_rejected(self):
        enc = make_visual_encoder(np.random.default_rng(13), 3, 4)
        with pytest.raises(DegenerateInputError, match="width"):
            enc.encode(np.zeros((2, 7)))

    def test_gradients(self):
        rng = np.random.default_rng(14)
        enc = make_visual_encoder(rng, 3, 4)
        feats = rng.normal(size=(3, 3))
        params = [enc.w_in, enc.b_in, enc.w_a, enc.w_v]
        err = grad_check(lambda: T.sum_all(enc.encode(feats)), params)
        assert err < 1e-5
