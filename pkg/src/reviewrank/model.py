"""The full helpfulness model: one parameter registry plus the forward
pipeline from raw records to a scalar helpfulness score per review.

Pipeline per (product, review) instance:

* text: embed -> GRU -> mask-reweighted self-attention (review side) ->
  cross-field attention into the product's self-attended states -> masked
  pooling; the product side runs plain self-attention and mean pooling.
* vision: project precomputed region features -> self-attention per field ->
  cross-attention between the fields (shared weights, both directions) ->
  mean pooling. The product also keeps a standalone pooled visual state for
  its own text-image pair.
* four projection heads (modality x domain, fields share) map pooled states
  into the two contrastive spaces; the review-side projections concatenate
  into the linear scoring head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import attention
from . import tensor as T
from .contrastive import ProjectionHead
from .encoders import EmbeddingTable, TextEncoder, VisualEncoder
from .errors import ConfigError, DegenerateInputError
from .probe import probe_mask_for_review

INIT_NAMESPACE = 0


@dataclass
class ProductForward:
    product_id: str
    text_states: object        # product tokens after self-attention
    pooled_text: object        # 1 x d_h
    proj_text_ii: object
    proj_text_pr: object
    visual_states: object = None       # n x d_v
    pooled_visual: object = None       # standalone, 1 x d_v
    proj_visual_ii: object = None


@dataclass
class ReviewForward:
    review_id: str
    product_id: str
    score: int
    xi: object                 # 1 x 1 predicted helpfulness
    mask_bits: np.ndarray
    beta: object = None        # 1 x 1 tensor unless fixed or unmasked
    proj_ii_t: object = None
    proj_ii_v: object = None
    proj_pr_t: object = None   # (review, product) pair in the text pr space
    proj_pr_v: object = None


class HelpfulnessModel:
    def __init__(self, config, vocab, pretrained=None):
        config.validate()
        self.config = config
        self.dtype = config.dtype
        self.vocab = list(vocab)
        self._registry = {}
        rng = np.random.default_rng([INIT_NAMESPACE, config.seed])

        trainable = config.pretrained_embeddings is None or config.finetune_pretrained
        self.embeddings = EmbeddingTable(
            self.vocab,
            config.text_embed_dim,
            rng,
            dtype=self.dtype,
            pretrained=pretrained,
            trainable=trainable,
        )
        self._register(self.embeddings.weights)

        d_e, d_h, d_s = config.text_embed_dim, config.hidden_dim, config.shared_dim
        self.gru = T.GruParams(
            self._glorot("gru.w_z", (d_e, d_h), rng),
            self._glorot("gru.u_z", (d_h, d_h), rng),
            self._zeros("gru.b_z", (1, d_h)),
            self._glorot("gru.w_r", (d_e, d_h), rng),
            self._glorot("gru.u_r", (d_h, d_h), rng),
            self._zeros("gru.b_r", (1, d_h)),
            self._glorot("gru.w_c", (d_e, d_h), rng),
            self._glorot("gru.u_c", (d_h, d_h), rng),
            self._zeros("gru.b_c", (1, d_h)),
        )
        self.text_encoder = TextEncoder(self.gru, d_h, dtype=self.dtype)

        self.w_a_review = self._glorot("attn.review.w_a", (d_h, d_h), rng)
        self.w_v_review = self._glorot("attn.review.w_v", (d_h, d_h), rng)
        self.w_a_product = self._glorot("attn.product.w_a", (d_h, d_h), rng)
        self.w_v_product = self._glorot("attn.product.w_v", (d_h, d_h), rng)
        self.w_c_text = self._glorot("cross.text.w_c", (d_h, d_h), rng)
        self.w_u_text = self._glorot("cross.text.w_u", (d_h, d_h), rng)

        # zero init pins the cold-mask weight at exactly 0.5 before training
        self.w_gen = self._zeros("maskgen.w", (d_h, 1))
        self.b_gen = self._zeros("maskgen.b", (1, 1))

        head_in = {"t": d_h}
        if config.multimodal:
            d_vi, d_v = config.visual_input_dim, config.visual_dim
            self.visual_review = VisualEncoder(
                self._glorot("visual.review.w_in", (d_vi, d_v), rng),
                self._zeros("visual.review.b_in", (1, d_v)),
                self._glorot("visual.review.w_a", (d_v, d_v), rng),
                self._glorot("visual.review.w_v", (d_v, d_v), rng),
                dtype=self.dtype,
                plain_residual=config.plain_residual,
            )
            self.visual_product = VisualEncoder(
                self._glorot("visual.product.w_in", (d_vi, d_v), rng),
                self._zeros("visual.product.b_in", (1, d_v)),
                self._glorot("visual.product.w_a", (d_v, d_v), rng),
                self._glorot("visual.product.w_v", (d_v, d_v), rng),
                dtype=self.dtype,
                plain_residual=config.plain_residual,
            )
            self.w_c_visual = self._glorot("cross.visual.w_c", (d_v, d_v), rng)
            self.w_u_visual = self._glorot("cross.visual.w_u", (d_v, d_v), rng)
            head_in["v"] = d_v

        self.heads = {}
        for modality, d_in in head_in.items():
            for domain in ("ii", "pr"):
                prefix = f"heads.{modality}.{domain}"
                self.heads[(modality, domain)] = ProjectionHead(
                    self._glorot(f"{prefix}.w1", (d_in, d_s), rng),
                    self._zeros(f"{prefix}.b1", (1, d_s)),
                    self._glorot(f"{prefix}.w2", (d_s, d_s), rng),
                    self._zeros(f"{prefix}.b2", (1, d_s)),
                )

        feature_width = (4 if config.multimodal else 2) * d_s
        self.w_out = self._glorot("out.w", (feature_width, 1), rng)
        self.b_out = self._zeros("out.b", (1, 1))

        self.training = False

    # -- parameter bookkeeping ------------------------------------------------

    def _register(self, param):
        if param.name in self._registry:
            raise ConfigError(f"parameter {param.name!r} registered twice")
        self._registry[param.name] = param
        return param

    def _glorot(self, name, shape, rng):
        limit = np.sqrt(6.0 / (shape[0] + shape[1]))
        data = rng.uniform(-limit, limit, size=shape).astype(self.dtype)
        return self._register(T.Parameter(data, name))

    def _zeros(self, name, shape):
        return self._register(T.Parameter(np.zeros(shape, dtype=self.dtype), name))

    def parameters(self, trainable_only=False):
        params = list(self._registry.values())
        if trainable_only:
            params = [p for p in params if p.requires_grad]
        return params

    def named_parameters(self):
        return dict(self._registry)

    def parameter_count(self, include_embeddings=False):
        return sum(
            p.data.size
            for p in self._registry.values()
            if include_embeddings or not p.embedding
        )

    def zero_grad(self):
        for p in self._registry.values():
            p.zero_grad()

    def train_mode(self, on=True):
        self.training = on
        return self

    # -- forward passes -------------------------------------------------------

    def _embed(self, tokens, drop_rng):
        return self.embeddings.embed(
            tokens,
            dropout_rate=self.config.embed_dropout if self.training else 0.0,
            rng=drop_rng,
            training=self.training,
        )

    def encode_product(self, product, drop_rng=None):
        tokens = list(product.name) + [t for s in product.sentences for t in s]
        encoded = self.text_encoder.encode(self._embed(tokens, drop_rng))
        weights = attention.base_attention(encoded.token_states, self.w_a_product)
        states = attention.self_attend(
            encoded.token_states, weights, self.w_v_product, self.config.plain_residual
        )
        pooled = T.mean_rows(states)
        fwd = ProductForward(
            product_id=product.product_id,
            text_states=states,
            pooled_text=pooled,
            proj_text_ii=self.heads[("t", "ii")].project(pooled),
            proj_text_pr=self.heads[("t", "pr")].project(pooled),
        )
        if self.config.multimodal:
            if product.visual_features.shape[0] < 1:
                raise DegenerateInputError(
                    f"product {product.product_id} has no visual features in multimodal mode"
                )
            fwd.visual_states = self.visual_product.encode(product.visual_features)
            fwd.pooled_visual = T.mean_rows(fwd.visual_states)
            fwd.proj_visual_ii = self.heads[("v", "ii")].project(fwd.pooled_visual)
        return fwd

    def _real_mask(self, mask_bits, beta):
        hot = T.Tensor((mask_bits[None, :] * self.config.alpha).astype(self.dtype))
        cold = T.Tensor((1.0 - mask_bits[None, :]).astype(self.dtype))
        return T.add(hot, T.mul(cold, beta))

    def encode_review(self, review, product_fwd, mask_bits, drop_rng=None):
        config = self.config
        tokens = review.tokens
        if len(mask_bits) != len(tokens):
            raise DegenerateInputError(
                f"mask length {len(mask_bits)} does not match {len(tokens)} tokens "
                f"of review {review.review_id}"
            )
        encoded = self.text_encoder.encode(self._embed(tokens, drop_rng))
        states = encoded.token_states

        beta = None
        if config.no_probe_mask:
            mask_bits = np.ones(len(tokens))
            mask = T.Tensor(np.full((1, len(tokens)), config.alpha, dtype=self.dtype))
        else:
            mask_bits = np.asarray(mask_bits, dtype=np.float64)
            if config.fixed_beta is not None:
                beta = T.Tensor(np.array([[config.fixed_beta]], dtype=self.dtype))
            else:
                beta = T.sigmoid(
                    T.add(T.matmul(encoded.sequence_state, self.w_gen), self.b_gen)
                )
            mask = self._real_mask(mask_bits, beta)

        weights = attention.base_attention(states, self.w_a_review)
        if not config.no_probe_mask:
            weights = attention.reweight(weights, mask)
        attended = attention.self_attend(
            states, weights, self.w_v_review, config.plain_residual
        )
        crossed = attention.cross_field_attend(
            attended,
            product_fwd.text_states,
            self.w_c_text,
            self.w_u_text,
            config.plain_residual,
        )
        pooled_text = attention.masked_pool(crossed, mask)

        proj = {
            ("t", "ii"): self.heads[("t", "ii")].project(pooled_text),
            ("t", "pr"): self.heads[("t", "pr")].project(pooled_text),
        }
        proj_pr_t_product = product_fwd.proj_text_pr
        proj_pr_v_pair = None
        if config.multimodal:
            if review.visual_features.shape[0] < 1:
                raise DegenerateInputError(
                    f"review {review.review_id} has no visual features in multimodal mode"
                )
            regions = self.visual_review.encode(review.visual_features)
            pooled_v_review, pooled_v_product = attention.visual_pipeline(
                regions,
                product_fwd.visual_states,
                self.w_c_visual,
                self.w_u_visual,
                config.plain_residual,
            )
            proj[("v", "ii")] = self.heads[("v", "ii")].project(pooled_v_review)
            proj[("v", "pr")] = self.heads[("v", "pr")].project(pooled_v_review)
            proj_pr_v_pair = (
                proj[("v", "pr")],
                self.heads[("v", "pr")].project(pooled_v_product),
            )

        xi = self.predict(proj)
        return ReviewForward(
            review_id=review.review_id,
            product_id=review.product_id,
            score=review.helpfulness,
            xi=xi,
            mask_bits=np.asarray(mask_bits),
            beta=beta,
            proj_ii_t=proj[("t", "ii")],
            proj_ii_v=proj.get(("v", "ii")),
            proj_pr_t=(proj[("t", "pr")], proj_pr_t_product),
            proj_pr_v=proj_pr_v_pair,
        )

    def predict(self, proj):
        """Linear score over the concatenated review-side projections.

        Feature order is fixed: text/inner-instance, text/product-review,
        then the visual pair in the same domain order.
        """
        parts = [proj[("t", "ii")], proj[("t", "pr")]]
        if self.config.multimodal:
            if ("v", "ii") not in proj or ("v", "pr") not in proj:
                raise DegenerateInputError("missing visual projections in multimodal mode")
            parts += [proj[("v", "ii")], proj[("v", "pr")]]
        return T.add(T.matmul(T.concat_cols(parts), self.w_out), self.b_out)

    # -- batch assembly --------------------------------------------------------

    def forward_batch(self, batch, masks, drop_rng=None):
        """Run a list of (product, reviews) pairs; returns per-review forwards
        and the contrastive pair-set input entries."""
        review_forwards = []
        entries = []
        for product, reviews in batch:
            product_fwd = self.encode_product(product, drop_rng)
            entry = {
                "product_id": product.product_id,
                "product_text": product_fwd.proj_text_ii if self.config.multimodal else None,
                "product_visual": product_fwd.proj_visual_ii,
                "reviews": [],
            }
            for review in reviews:
                fwd = self.encode_review(
                    review, product_fwd, masks[review.review_id], drop_rng
                )
                review_forwards.append(fwd)
                entry["reviews"].append(
                    {
                        "review_id": fwd.review_id,
                        "score": fwd.score,
                        "ii_t": fwd.proj_ii_t,
                        "ii_v": fwd.proj_ii_v,
                        "pr_t": fwd.proj_pr_t,
                        "pr_v": fwd.proj_pr_v,
                    }
                )
            entries.append(entry)
        return review_forwards, entries


def build_vocab(corpus):
    """Sorted token vocabulary over product names, descriptions, and reviews."""
    tokens = set()
    for product in corpus.products:
        tokens.update(product.name)
        for sentence in product.sentences:
            tokens.update(sentence)
        for review in corpus.reviews_by_product[product.product_id]:
            for sentence in review.sentences:
                tokens.update(sentence)
    return sorted(tokens)


def prepare_masks(corpus, use_annotations=True):
    """Probe masks for every review in a corpus slice, as int8 arrays."""
    masks = {}
    for product in corpus.products:
        for review in corpus.reviews_by_product[product.product_id]:
            annotation = (
                corpus.annotations.get(review.review_id) if use_annotations else None
            )
            masks[review.review_id] = probe_mask_for_review(
                review, product, annotation
            ).values
    return masks
