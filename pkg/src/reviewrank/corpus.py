"""Data model, labeling, and corpus file ingestion.

Corpora arrive pre-tokenized: every text field is a list of whitespace-free
token strings. Three JSONL files describe a corpus slice:

* ``products.jsonl``  — ``{product_id, name, sentences, features_path}``
* ``reviews.jsonl``   — ``{review_id, product_id, sentences, features_path,
  votes, helpfulness?}``
* ``annotations.jsonl`` — ``{review_id, core_words, clusters}`` where each
  cluster is a list of ``[sentence_index, token_start, token_end)`` spans.

Visual features live in sidecar binary files (magic ``SFV1``, little-endian
u32 row/column counts, then f32 row-major payload), referenced by path
relative to the JSONL file.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AnnotationSpanError,
    CorpusFormatError,
    ReferentialError,
)

FEATURE_MAGIC = b"SFV1"


def label_from_votes(votes):
    """Helpfulness score from a vote count: floor(log2 votes) clipped to [0, 4].

    Votes of 0 or 1 land on the clip floor (log2 is 0 or undefined there).
    """
    if not isinstance(votes, int) or isinstance(votes, bool):
        raise CorpusFormatError(f"votes must be an integer, got {votes!r}")
    if votes < 0:
        raise CorpusFormatError(f"votes must be non-negative, got {votes}")
    if votes <= 1:
        return 0
    return min(votes.bit_length() - 1, 4)


def _token_count(sentences):
    return sum(len(s) for s in sentences)


def sentence_boundaries(sentences):
    """Flat (start, end) token offsets of each sentence."""
    bounds = []
    start = 0
    for s in sentences:
        bounds.append((start, start + len(s)))
        start += len(s)
    return bounds


@dataclass(eq=False)
class ProductRecord:
    product_id: str
    name: list
    sentences: list
    visual_features: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, ProductRecord)
            and self.product_id == other.product_id
            and self.name == other.name
            and self.sentences == other.sentences
            and np.array_equal(self.visual_features, other.visual_features)
        )


@dataclass(eq=False)
class ReviewRecord:
    review_id: str
    product_id: str
    sentences: list
    visual_features: np.ndarray
    votes: int | None
    helpfulness: int

    @property
    def tokens(self):
        return [t for s in self.sentences for t in s]

    @property
    def boundaries(self):
        return sentence_boundaries(self.sentences)

    def __eq__(self, other):
        return (
            isinstance(other, ReviewRecord)
            and self.review_id == other.review_id
            and self.product_id == other.product_id
            and self.sentences == other.sentences
            and self.votes == other.votes
            and self.helpfulness == other.helpfulness
            and np.array_equal(self.visual_features, other.visual_features)
        )


@dataclass
class AnnotationRecord:
    review_id: str
    core_words: list
    clusters: list  # list of clusters; each cluster a list of (sent, start, end)

    def validate_spans(self, review):
        for cluster in self.clusters:
            for sent, start, end in cluster:
                if not 0 <= sent < len(review.sentences):
                    raise AnnotationSpanError(
                        f"{self.review_id}: sentence index {sent} out of range"
                    )
                if not 0 <= start < end <= len(review.sentences[sent]):
                    raise AnnotationSpanError(
                        f"{self.review_id}: span [{start}, {end}) out of bounds for "
                        f"sentence {sent} of length {len(review.sentences[sent])}"
                    )


@dataclass(eq=False)
class Corpus:
    """One split's products, their reviews, and optional annotations."""

    products: list = field(default_factory=list)
    reviews_by_product: dict = field(default_factory=dict)
    annotations: dict = field(default_factory=dict)

    @property
    def reviews(self):
        return [r for p in self.products for r in self.reviews_by_product[p.product_id]]

    def product(self, product_id):
        for p in self.products:
            if p.product_id == product_id:
                return p
        raise ReferentialError(f"unknown product_id {product_id!r}")

    def __eq__(self, other):
        return (
            isinstance(other, Corpus)
            and self.products == other.products
            and self.reviews_by_product == other.reviews_by_product
            and self.annotations == other.annotations
        )


@dataclass(eq=False)
class DatasetSplit:
    train: Corpus
    dev: Corpus
    test: Corpus

    def __eq__(self, other):
        return (
            isinstance(other, DatasetSplit)
            and self.train == other.train
            and self.dev == other.dev
            and self.test == other.test
        )


# ---------------------------------------------------------------------------
# feature files

def write_features(path, matrix):
    arr = np.ascontiguousarray(np.asarray(matrix, dtype="<f4"))
    if arr.ndim != 2:
        raise CorpusFormatError(f"feature matrix must be 2-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise CorpusFormatError("feature matrix contains non-finite values")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_features(path):
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != FEATURE_MAGIC:
        raise CorpusFormatError("bad magic, not a feature file", path=str(path))
    if len(blob) < 12:
        raise CorpusFormatError("truncated header", path=str(path))
    n, d = struct.unpack("<II", blob[4:12])
    expected = 12 + n * d * 4
    if len(blob) != expected:
        raise CorpusFormatError(
            f"payload length {len(blob) - 12} does not match header {n}x{d}",
            path=str(path),
        )
    arr = np.frombuffer(blob, dtype="<f4", offset=12).reshape(n, d)
    if not np.all(np.isfinite(arr)):
        raise CorpusFormatError("non-finite feature values", path=str(path))
    return arr.astype(np.float32)


# ---------------------------------------------------------------------------
# JSONL parsing

def _iter_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"invalid JSON: {e}", path=str(path), line=lineno)
            if not isinstance(obj, dict):
                raise CorpusFormatError("line is not an object", path=str(path), line=lineno)
            yield lineno, obj


def _require(obj, key, path, lineno):
    if key not in obj:
        raise CorpusFormatError(f"missing field `{key}`", path=str(path), line=lineno)
    return obj[key]


def _check_sentences(value, path, lineno, key="sentences"):
    if (
        not isinstance(value, list)
        or not value
        or not all(
            isinstance(s, list) and all(isinstance(t, str) and t for t in s)
            for s in value
        )
    ):
        raise CorpusFormatError(
            f"`{key}` must be a non-empty list of token lists",
            path=str(path),
            line=lineno,
        )


def _load_feature_ref(obj, base_dir, path, lineno):
    rel = obj.get("features_path")
    if rel in (None, ""):
        return np.zeros((0, 0), dtype=np.float32)
    feat_path = Path(base_dir) / rel
    if not feat_path.exists():
        raise CorpusFormatError(
            f"features_path {rel!r} does not exist", path=str(path), line=lineno
        )
    return read_features(feat_path)


def load_products(path):
    path = Path(path)
    products = []
    seen = set()
    for lineno, obj in _iter_jsonl(path):
        pid = _require(obj, "product_id", path, lineno)
        name = _require(obj, "name", path, lineno)
        sentences = _require(obj, "sentences", path, lineno)
        if not isinstance(name, list) or not all(isinstance(t, str) for t in name):
            raise CorpusFormatError("`name` must be a token list", path=str(path), line=lineno)
        _check_sentences(sentences, path, lineno)
        if pid in seen:
            raise CorpusFormatError(f"duplicate product_id {pid!r}", path=str(path), line=lineno)
        seen.add(pid)
        products.append(
            ProductRecord(
                product_id=pid,
                name=name,
                sentences=sentences,
                visual_features=_load_feature_ref(obj, path.parent, path, lineno),
            )
        )
    return products


def load_reviews(path):
    path = Path(path)
    reviews = []
    seen = set()
    for lineno, obj in _iter_jsonl(path):
        rid = _require(obj, "review_id", path, lineno)
        pid = _require(obj, "product_id", path, lineno)
        sentences = _require(obj, "sentences", path, lineno)
        _check_sentences(sentences, path, lineno)
        if rid in seen:
            raise CorpusFormatError(f"duplicate review_id {rid!r}", path=str(path), line=lineno)
        seen.add(rid)
        votes = obj.get("votes")
        helpfulness = obj.get("helpfulness")
        if votes is None and helpfulness is None:
            raise CorpusFormatError(
                "review needs `votes` or `helpfulness`", path=str(path), line=lineno
            )
        if votes is not None:
            try:
                derived = label_from_votes(votes)
            except CorpusFormatError as e:
                raise CorpusFormatError(str(e), path=str(path), line=lineno)
            if helpfulness is not None and helpfulness != derived:
                raise CorpusFormatError(
                    f"helpfulness {helpfulness} inconsistent with votes {votes} "
                    f"(derives to {derived})",
                    path=str(path),
                    line=lineno,
                )
            helpfulness = derived
        if helpfulness not in (0, 1, 2, 3, 4):
            raise CorpusFormatError(
                f"helpfulness must be in 0..4, got {helpfulness!r}",
                path=str(path),
                line=lineno,
            )
        reviews.append(
            ReviewRecord(
                review_id=rid,
                product_id=pid,
                sentences=sentences,
                visual_features=_load_feature_ref(obj, path.parent, path, lineno),
                votes=votes,
                helpfulness=helpfulness,
            )
        )
    return reviews


def load_annotations(path):
    path = Path(path)
    annotations = {}
    for lineno, obj in _iter_jsonl(path):
        rid = _require(obj, "review_id", path, lineno)
        core_words = _require(obj, "core_words", path, lineno)
        clusters_raw = _require(obj, "clusters", path, lineno)
        if rid in annotations:
            raise CorpusFormatError(f"duplicate annotation for {rid!r}", path=str(path), line=lineno)
        clusters = []
        try:
            for cluster in clusters_raw:
                clusters.append([(int(s), int(a), int(b)) for s, a, b in cluster])
        except (TypeError, ValueError):
            raise CorpusFormatError(
                "`clusters` must be lists of [sent, start, end] triples",
                path=str(path),
                line=lineno,
            )
        annotations[rid] = AnnotationRecord(
            review_id=rid, core_words=list(core_words), clusters=clusters
        )
    return annotations


def assemble_corpus(products, reviews, annotations=None, validate_spans=True):
    """Group reviews under products and cross-validate references."""
    by_product = {p.product_id: [] for p in products}
    by_review = {}
    for r in reviews:
        if r.product_id not in by_product:
            raise ReferentialError(
                f"review {r.review_id!r} references unknown product {r.product_id!r}"
            )
        by_product[r.product_id].append(r)
        by_review[r.review_id] = r
    annotations = dict(annotations or {})
    for rid, ann in annotations.items():
        if rid not in by_review:
            raise ReferentialError(f"annotation references unknown review {rid!r}")
        if validate_spans:
            ann.validate_spans(by_review[rid])
    return Corpus(products=list(products), reviews_by_product=by_product, annotations=annotations)


def load_corpus_dir(directory):
    """Load one corpus slice from a directory of JSONL files."""
    directory = Path(directory)
    products = load_products(directory / "products.jsonl")
    reviews = load_reviews(directory / "reviews.jsonl")
    ann_path = directory / "annotations.jsonl"
    annotations = load_annotations(ann_path) if ann_path.exists() else {}
    return assemble_corpus(products, reviews, annotations)


def validate_train_pairability(corpus):
    """Every train product must offer at least one score-distinct review pair."""
    offenders = []
    for p in corpus.products:
        scores = {r.helpfulness for r in corpus.reviews_by_product[p.product_id]}
        if len(scores) < 2:
            offenders.append(p.product_id)
    if offenders:
        raise CorpusFormatError(
            "train split has products without distinct-score review pairs: "
            + ", ".join(offenders[:5])
            + ("..." if len(offenders) > 5 else "")
        )


def load_corpus(root):
    """Load a full train/dev/test split tree rooted at ``root``."""
    root = Path(root)
    split = DatasetSplit(
        train=load_corpus_dir(root / "train"),
        dev=load_corpus_dir(root / "dev"),
        test=load_corpus_dir(root / "test"),
    )
    validate_train_pairability(split.train)
    return split


# ---------------------------------------------------------------------------
# serialization

def _dump_line(obj):
    return json.dumps(obj, ensure_ascii=False) + "\n"


def save_corpus_dir(corpus, directory, features_dirname="features"):
    """Write one corpus slice; feature matrices land in a sidecar directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    feat_dir = directory / features_dirname

    def feature_ref(owner_id, matrix):
        if matrix.size == 0:
            return None
        rel = f"{features_dirname}/{owner_id}.sfv"
        write_features(directory / rel, matrix)
        return rel

    with open(directory / "products.jsonl", "w", encoding="utf-8") as fh:
        for p in corpus.products:
            fh.write(
                _dump_line(
                    {
                        "product_id": p.product_id,
                        "name": p.name,
                        "sentences": p.sentences,
                        "features_path": feature_ref(p.product_id, p.visual_features),
                    }
                )
            )
    with open(directory / "reviews.jsonl", "w", encoding="utf-8") as fh:
        for p in corpus.products:
            for r in corpus.reviews_by_product[p.product_id]:
                fh.write(
                    _dump_line(
                        {
                            "review_id": r.review_id,
                            "product_id": r.product_id,
                            "sentences": r.sentences,
                            "features_path": feature_ref(r.review_id, r.visual_features),
                            "votes": r.votes,
                            "helpfulness": r.helpfulness,
                        }
                    )
                )
    if corpus.annotations:
        with open(directory / "annotations.jsonl", "w", encoding="utf-8") as fh:
            for rid in sorted(corpus.annotations):
                ann = corpus.annotations[rid]
                fh.write(
                    _dump_line(
                        {
                            "review_id": ann.review_id,
                            "core_words": ann.core_words,
                            "clusters": [
                                [list(span) for span in cluster] for cluster in ann.clusters
                            ],
                        }
                    )
                )
    if feat_dir.exists() and not any(feat_dir.iterdir()):
        feat_dir.rmdir()


def save_corpus(split, root):
    root = Path(root)
    for name, corpus in (("train", split.train), ("dev", split.dev), ("test", split.test)):
        save_corpus_dir(corpus, root / name)
