"""Deterministic synthetic corpora with a planted helpfulness signal.

Each product owns a small content-word pool and a latent topic vector that
its region features scatter around. A review's gold score drives three
correlated signals:

* the sentences that mention the product (directly or through a pronoun)
  draw their remaining tokens from the product's own pool for good reviews,
  and from other products' pools or filler for bad ones;
* non-mention sentences are constant-distribution distractor noise, so
  pooling without a probe mask dilutes the text signal;
* the review's region features align with the product's visual topic in
  proportion to the score, so text-image and review-product similarities
  both rise with helpfulness.

Mention positions are bookkept into single-cluster annotations, which makes
the emitted gold masks exactly reproducible by the mask generator.
"""

from __future__ import annotations

import numpy as np

from .config import GeneratorConfig
from .corpus import (
    AnnotationRecord,
    Corpus,
    DatasetSplit,
    ProductRecord,
    ReviewRecord,
)
from .errors import ConfigError
from .probe import STOPWORDS, THIRD_PERSON_PRONOUNS, lemmatize

GENERATOR_NAMESPACE = 3

_SYLLABLES = [
    "ba", "be", "bo", "da", "de", "di", "fa", "fe", "ga", "go", "ka", "ke",
    "ki", "la", "le", "lo", "ma", "me", "mi", "na", "ne", "no", "pa", "pe",
    "po", "ra", "re", "ri", "sa", "se", "so", "ta", "te", "ti", "va", "ve",
    "vo", "za", "ze", "zo",
]
_GLUE = ["the", "a", "and", "was", "is", "very", "with", "for", "really", "so"]
_PRONOUNS = ["it", "they", "these"]

VOTE_RANGES = {0: (0, 1), 1: (2, 3), 2: (4, 7), 3: (8, 15), 4: (16, 200)}

_WORDS_PER_PRODUCT = 10


def _pseudo_words(rng, count, taken_lemmas):
    """Pronounceable pseudo-words with pairwise-distinct lemmas."""
    words = []
    while len(words) < count:
        n = int(rng.integers(2, 4))
        word = "".join(rng.choice(_SYLLABLES) for _ in range(n))
        lemma = lemmatize(word)
        if not lemma or lemma in taken_lemmas:
            continue
        taken_lemmas.add(lemma)
        words.append(word)
    return words


def _own_word_hit_rate(quality):
    # lexical overlap of mention sentences with the product's own pool
    return 0.05 + 0.9 * quality


def _pick(rng, pool):
    return pool[int(rng.integers(0, len(pool)))]


_SPLIT_CODES = {"train": 0, "dev": 1, "test": 2}


class _Generator:
    def __init__(self, config, seed):
        config.validate()
        self.config = config
        self.seed = int(seed)
        self.rng = np.random.default_rng([GENERATOR_NAMESPACE, seed])
        taken = set(STOPWORDS) | set(THIRD_PERSON_PRONOUNS) | set(_GLUE)
        self.content = _pseudo_words(self.rng, config.vocab_content, taken)
        self.filler = _pseudo_words(self.rng, config.vocab_filler, taken) + _GLUE
        # fixed map from latent topics to feature space, shared per corpus
        self.topic_map = self.rng.normal(size=(config.topic_dim, config.feature_dim))

    def _topic_features(self, topic, n_regions, rng):
        base = topic @ self.topic_map
        base = base / np.linalg.norm(base)
        rows = base[None, :] + rng.normal(
            scale=self.config.visual_noise, size=(n_regions, self.config.feature_dim)
        )
        return rows.astype(np.float32)

    def _random_topic(self, rng):
        t = rng.normal(size=self.config.topic_dim)
        return t / np.linalg.norm(t)

    def _sentence(self, rng, length, own_pool, own_rate, noise_pool):
        """Sentence with an exact own-pool word count (rounded from the rate).

        Fixing the count instead of sampling per token keeps the planted
        overlap signal's class gaps from drowning in binomial noise at
        desk-scale sentence lengths.
        """
        n_own = int(np.floor(own_rate * length + 0.5))
        tokens = [_pick(rng, own_pool) for _ in range(n_own)]
        for _ in range(length - n_own):
            if rng.random() < 0.5:
                tokens.append(_pick(rng, noise_pool))
            else:
                tokens.append(_pick(rng, self.filler))
        order = rng.permutation(length)
        return [tokens[i] for i in order]

    def _build_product(self, pid, rng):
        cfg = self.config
        own = [self.content[i] for i in rng.choice(len(self.content), size=_WORDS_PER_PRODUCT, replace=False)]
        name = own[: cfg.name_tokens]
        sentences = []
        for _ in range(cfg.description_sentences):
            sentences.append(
                self._sentence(rng, cfg.tokens_per_sentence, own, 0.7, self.filler)
            )
        topic = self._random_topic(rng)
        if cfg.text_only:
            features = np.zeros((0, cfg.feature_dim), dtype=np.float32)
        else:
            n_regions = int(rng.integers(cfg.regions_min, cfg.regions_max + 1))
            features = self._topic_features(topic, n_regions, rng)
        record = ProductRecord(
            product_id=pid, name=name, sentences=sentences, visual_features=features
        )
        return record, own, topic

    def _build_review(self, rid, product, own, topic, score, noise_pool, rng):
        cfg = self.config
        quality = score / 4.0
        n_sent = cfg.sentences_per_review
        n_mention = 1 if n_sent <= 2 else int(rng.integers(1, 3))
        mention_at = set(
            int(i) for i in rng.choice(n_sent, size=n_mention, replace=False)
        )
        own_rate = _own_word_hit_rate(quality)
        sentences = []
        spans = []
        for si in range(n_sent):
            if si in mention_at:
                tokens = self._sentence(
                    rng, cfg.tokens_per_sentence - 1, own, own_rate, noise_pool
                )
                pos = int(rng.integers(0, len(tokens) + 1))
                if rng.random() < cfg.pronoun_mention_rate:
                    mention = _pick(rng, _PRONOUNS)
                else:
                    mention = product.name[0]
                tokens.insert(pos, mention)
                spans.append((si, pos, pos + 1))
            else:
                tokens = self._sentence(
                    rng, cfg.tokens_per_sentence, own, 0.0, noise_pool
                )
            sentences.append(tokens)

        if cfg.text_only:
            features = np.zeros((0, cfg.feature_dim), dtype=np.float32)
        else:
            # drift orthogonal to the product topic: the review-product cosine
            # is then a clean monotone function of the score
            drift = self._random_topic(rng)
            drift = drift - (drift @ topic) * topic
            norm = np.linalg.norm(drift)
            if norm < 1e-9:
                drift = np.roll(topic, 1)
                drift = drift - (drift @ topic) * topic
                norm = np.linalg.norm(drift)
            drift = drift / norm
            mixed = quality * topic + (1.0 - quality) * drift
            mixed = mixed / np.linalg.norm(mixed)
            n_regions = int(rng.integers(cfg.regions_min, cfg.regions_max + 1))
            features = self._topic_features(mixed, n_regions, rng)

        lo, hi = VOTE_RANGES[score]
        votes = int(rng.integers(lo, hi + 1))
        review = ReviewRecord(
            review_id=rid,
            product_id=product.product_id,
            sentences=sentences,
            visual_features=features,
            votes=votes,
            helpfulness=score,
        )
        annotation = AnnotationRecord(
            review_id=rid,
            core_words=[lemmatize(t) for t in product.name],
            clusters=[spans],
        )
        mask = np.zeros(sum(len(s) for s in sentences), dtype=np.int8)
        bounds = review.boundaries
        for si, _, _ in spans:
            a, b = bounds[si]
            mask[a:b] = 1
        return review, annotation, mask

    def _score_cycle(self, m, rng):
        scores = [(i % 5) for i in range(m)]
        rng.shuffle(scores)
        return scores

    def build_corpus(self, prefix, n_products):
        cfg = self.config
        corpus = Corpus()
        gold_masks = {}
        for p_idx in range(n_products):
            rng = np.random.default_rng(
                [GENERATOR_NAMESPACE, self.seed, _SPLIT_CODES[prefix], p_idx]
            )
            pid = f"{prefix}_p{p_idx:04d}"
            product, own, topic = self._build_product(pid, rng)
            own_lemmas = {lemmatize(w) for w in own}
            noise_pool = [w for w in self.content if lemmatize(w) not in own_lemmas]
            corpus.products.append(product)
            corpus.reviews_by_product[pid] = []
            scores = self._score_cycle(cfg.reviews_per_product, rng)
            for j, score in enumerate(scores):
                rid = f"{pid}_r{j:02d}"
                review, annotation, mask = self._build_review(
                    rid, product, own, topic, score, noise_pool, rng
                )
                corpus.reviews_by_product[pid].append(review)
                corpus.annotations[rid] = annotation
                gold_masks[rid] = mask
        return corpus, gold_masks


def synthesize(config: GeneratorConfig, seed: int):
    """Build a full train/dev/test split plus gold probe masks per review.

    Deterministic: the same (config, seed) always produces identical data.
    Returns ``(DatasetSplit, {review_id: mask array})``.
    """
    if config.reviews_per_product < 2:
        raise ConfigError("reviews_per_product must be >= 2")
    gen = _Generator(config, seed)
    masks = {}
    corpora = {}
    for name, count in (
        ("train", config.train_products),
        ("dev", config.dev_products),
        ("test", config.test_products),
    ):
        corpus, gold = gen.build_corpus(name, count)
        corpora[name] = corpus
        masks.update(gold)
    return DatasetSplit(**corpora), masks
