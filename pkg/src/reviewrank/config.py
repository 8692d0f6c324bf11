"""Configuration objects and flat-JSON config file handling.

Precedence is flag > file > default: a config file fills in over the
dataclass defaults, and explicit CLI flags overwrite both.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass
class TrainConfig:
    """Model and training hyperparameters.

    The dimension defaults (300/128/128/64) are the full-scale operating
    point; desk-scale runs normally shrink them via a config file.
    """

    learning_rate: float = 1e-4
    kappa: float = 0.25          # auxiliary-loss weight
    gamma: float = 1.0           # ranking hinge margin
    batch_size: int = 32         # products per batch
    text_embed_dim: int = 300
    hidden_dim: int = 128
    visual_input_dim: int = 2048  # raw RoI feature width (detector fc layer)
    visual_dim: int = 128
    shared_dim: int = 64
    embed_dropout: float = 0.5
    epochs: int = 10
    seed: int = 0
    mode: str = "multimodal"     # "multimodal" | "text-only"
    precision: str = "f32"       # "f32" | "f64"
    alpha: float = 1.0           # hot-region mask weight
    plain_residual: bool = False  # add A'H directly instead of A'(H W_v)
    theta_hi: int = 3            # min score counted as a contrastive positive
    theta_lo: int = 1            # max score counted as a contrastive negative
    tau: float = 1.0             # contrastive temperature
    relevance_threshold: int = 1  # MAP relevance cut
    eval_every: int = 1          # dev evaluation cadence, in epochs
    pretrained_embeddings: str | None = None
    finetune_pretrained: bool = False
    # ablation switches
    no_probe_mask: bool = False
    fixed_beta: float | None = None
    no_cpc_ii: bool = False
    no_cpc_pr: bool = False

    def validate(self):
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.mode not in ("multimodal", "text-only"):
            raise ConfigError(f"mode must be multimodal|text-only, got {self.mode!r}")
        if self.precision not in ("f32", "f64"):
            raise ConfigError(f"precision must be f32|f64, got {self.precision!r}")
        if not 0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.fixed_beta is not None and not 0 < self.fixed_beta < self.alpha:
            raise ConfigError(
                f"fixed_beta must satisfy 0 < beta < alpha={self.alpha}, got {self.fixed_beta}"
            )
        if self.theta_hi <= self.theta_lo:
            raise ConfigError("theta_hi must exceed theta_lo")
        if self.tau <= 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if not 0 <= self.embed_dropout < 1:
            raise ConfigError(f"embed_dropout must be in [0, 1), got {self.embed_dropout}")
        for name in (
            "batch_size",
            "text_embed_dim",
            "hidden_dim",
            "visual_input_dim",
            "visual_dim",
            "shared_dim",
            "epochs",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        return self

    @property
    def multimodal(self):
        return self.mode == "multimodal"

    @property
    def dtype(self):
        import numpy as np

        return np.float64 if self.precision == "f64" else np.float32


@dataclass
class GeneratorConfig:
    """Shape and signal strength of the synthetic corpus."""

    train_products: int = 200
    dev_products: int = 40
    test_products: int = 40
    reviews_per_product: int = 10
    vocab_content: int = 400     # product-description word pool
    vocab_filler: int = 120      # neutral chatter word pool
    feature_dim: int = 64        # column count of generated RoI matrices
    regions_min: int = 3
    regions_max: int = 6
    topic_dim: int = 8           # latent dimension behind visual features
    sentences_per_review: int = 3
    tokens_per_sentence: int = 8
    description_sentences: int = 2
    name_tokens: int = 3
    visual_noise: float = 0.12
    pronoun_mention_rate: float = 0.35  # fraction of mention sites realized as pronouns
    text_only: bool = False

    def validate(self):
        if self.reviews_per_product < 2:
            raise ConfigError(
                f"reviews_per_product must be >= 2 for pairwise training, "
                f"got {self.reviews_per_product}"
            )
        for name in (
            "train_products",
            "dev_products",
            "test_products",
            "vocab_content",
            "vocab_filler",
            "feature_dim",
            "regions_min",
            "topic_dim",
            "sentences_per_review",
            "tokens_per_sentence",
            "description_sentences",
            "name_tokens",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.regions_max < self.regions_min:
            raise ConfigError("regions_max must be >= regions_min")
        if not 0 <= self.pronoun_mention_rate <= 1:
            raise ConfigError("pronoun_mention_rate must be in [0, 1]")
        return self


def _coerce(cls, key, value):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if key not in fields:
        raise ConfigError(f"unknown config key `{key}` for {cls.__name__}")
    return value


def from_mapping(cls, mapping):
    """Build a config dataclass from a flat dict, rejecting unknown keys."""
    for key in mapping:
        _coerce(cls, key, mapping[key])
    try:
        return cls(**mapping)
    except TypeError as e:
        raise ConfigError(str(e))


def load_config_file(cls, path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return from_mapping(cls, raw)


def bundled_config_path(name):
    """Filesystem path of a config shipped with the package (e.g. synth_desk)."""
    path = Path(__file__).parent / "configs" / f"{name}.json"
    if not path.exists():
        raise ConfigError(f"no bundled config named {name!r}")
    return path


def resolve_config(cls, file_path=None, overrides=None):
    """Merge defaults, an optional JSON file, and explicit overrides."""
    values = {}
    if file_path is not None:
        values.update(
            {
                f.name: getattr(load_config_file(cls, file_path), f.name)
                for f in dataclasses.fields(cls)
            }
        )
        # keep only keys the file actually set
        raw = json.loads(Path(file_path).read_text(encoding="utf-8"))
        values = {k: values[k] for k in raw}
    for key, value in (overrides or {}).items():
        if value is not None:
            _coerce(cls, key, value)
            values[key] = value
    return from_mapping(cls, values).validate()
