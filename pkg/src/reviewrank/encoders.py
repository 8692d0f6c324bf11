"""Input encoders: token embeddings, recurrent text encoding, and
self-attentive visual encoding of precomputed region features."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import attention
from . import tensor as T
from .errors import CorpusFormatError, DegenerateInputError

UNK_TOKEN = "<unk>"
INIT_RANGE = 0.1


def load_pretrained_embeddings(path, dim):
    """Parse a word-vector text file: one word then `dim` floats per line."""
    vectors = {}
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise CorpusFormatError(
                    f"expected a word and {dim} floats, got {len(parts)} fields",
                    path=str(path),
                    line=lineno,
                )
            try:
                vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise CorpusFormatError(
                    "non-numeric embedding value", path=str(path), line=lineno
                )
    return vectors


class EmbeddingTable:
    """Vocabulary-indexed embedding rows; unknown tokens share the UNK row.

    Row 0 is the zero-initialized UNK row. Known rows draw from
    uniform(-0.1, 0.1) unless a pretrained vector file supplies them.
    """

    def __init__(self, vocab, dim, rng, dtype=np.float64, pretrained=None, trainable=True):
        self.dim = int(dim)
        self.index = {}
        weights = np.zeros((len(vocab) + 1, dim))
        for i, token in enumerate(vocab, start=1):
            if token in self.index:
                raise CorpusFormatError(f"duplicate vocab token {token!r}")
            self.index[token] = i
            if pretrained is not None and token in pretrained:
                vec = np.asarray(pretrained[token], dtype=np.float64)
                if vec.shape != (dim,):
                    raise CorpusFormatError(
                        f"pretrained vector for {token!r} has dim {vec.shape}"
                    )
                weights[i] = vec
            else:
                weights[i] = rng.uniform(-INIT_RANGE, INIT_RANGE, size=dim)
        self.weights = T.Parameter(weights.astype(dtype), "embeddings", embedding=True)
        self.trainable = trainable
        self.weights.requires_grad = trainable

    @property
    def vocab_size(self):
        return self.weights.rows

    def lookup(self, tokens):
        return [self.index.get(t, 0) for t in tokens]

    def embed(self, tokens, dropout_rate=0.0, rng=None, training=False):
        """Embedding rows for a token sequence; dropout only while training."""
        if not tokens:
            raise DegenerateInputError("cannot embed an empty token sequence")
        rows = T.gather_rows(self.weights, self.lookup(tokens))
        if training and dropout_rate > 0.0:
            rows = T.dropout(rows, dropout_rate, rng)
        return rows


@dataclass
class TextEncoding:
    token_states: object   # l x d_h
    sequence_state: object  # 1 x d_h, final hidden state


class TextEncoder:
    """Left-to-right GRU over embedded tokens.

    The scan is strictly causal: the states of a length-k prefix equal the
    first k states of the full run.
    """

    def __init__(self, params: T.GruParams, hidden_dim, dtype=np.float64):
        self.params = params
        self.hidden_dim = int(hidden_dim)
        self.dtype = dtype

    def encode(self, embeddings):
        # the fused scan does per-step input projections, which keeps prefix
        # runs bit-identical to full runs (batched GEMM is not row-stable
        # across sequence lengths)
        if embeddings.rows == 0:
            raise DegenerateInputError("cannot encode an empty sequence")
        states = T.gru_sequence(embeddings, self.params)
        return TextEncoding(
            token_states=states, sequence_state=T.row(states, states.rows - 1)
        )


class VisualEncoder:
    """Projects raw region features and runs residual self-attention over them."""

    def __init__(self, w_in, b_in, w_a, w_v, dtype=np.float64, plain_residual=False):
        self.w_in, self.b_in = w_in, b_in
        self.w_a, self.w_v = w_a, w_v
        self.dtype = dtype
        self.plain_residual = plain_residual

    def encode(self, features):
        features = np.asarray(features)
        if features.ndim != 2 or features.shape[0] < 1:
            raise DegenerateInputError(
                f"visual encoder needs at least one region row, got shape {features.shape}"
            )
        if features.shape[1] != self.w_in.rows:
            raise DegenerateInputError(
                f"region feature width {features.shape[1]} does not match "
                f"configured input dim {self.w_in.rows}"
            )
        h = T.add(T.matmul(T.Tensor(features.astype(self.dtype)), self.w_in), self.b_in)
        weights = attention.base_attention(h, self.w_a)
        return attention.self_attend(h, weights, self.w_v, self.plain_residual)
