"""Pairwise ranking loss, loss composition, Adam, and the training loop."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .contrastive import build_pair_sets, cpc_inner_instance, cpc_product_review
from .errors import DivergenceError
from .metrics import evaluate_ranking
from .model import HelpfulnessModel, build_vocab, prepare_masks

SHUFFLE_NAMESPACE = 1
DROPOUT_NAMESPACE = 2


class Adam:
    """Standard Adam with bias correction; gradients are zeroed on step()."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * (g * g)
            m_hat = self.m[i] / (1 - self.beta1**self.t)
            v_hat = self.v[i] / (1 - self.beta2**self.t)
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)
        for p in self.params:
            p.zero_grad()


def ranking_loss(review_forwards, gamma):
    """Sum of hinge terms over every score-distinct review pair per product.

    Per product the pair hinges are evaluated as one masked matrix: entry
    (i, j) is max(0, gamma - xi_i + xi_j), kept only where gold_i > gold_j.
    Products whose reviews all share one gold score contribute nothing; they
    are counted in the diagnostics instead.
    """
    by_product = {}
    for fwd in review_forwards:
        by_product.setdefault(fwd.product_id, []).append(fwd)
    terms = []
    n_pairs = 0
    uniform_products = 0
    for product_id, fwds in by_product.items():
        scores = np.array([f.score for f in fwds])
        valid = (scores[:, None] > scores[None, :]).astype(np.float64)
        if not valid.any():
            uniform_products += 1
            continue
        n_pairs += int(valid.sum())
        xi_row = T.concat_cols([f.xi for f in fwds])
        diffs = T.sub(T.transpose(xi_row), xi_row)  # (i, j) -> xi_i - xi_j
        hinges = T.relu(T.affine(diffs, -1.0, gamma))
        terms.append(T.sum_all(T.mul(hinges, T.Tensor(valid))))
    total = T.add_n(terms) if terms else T.Tensor([[0.0]])
    return total, {"ranking_pairs": n_pairs, "uniform_products": uniform_products}


def total_loss(task, cpc_ii, cpc_pr, config):
    """Task loss plus kappa times whichever contrastive terms are enabled."""
    aux = []
    if not config.no_cpc_ii and cpc_ii is not None:
        aux.append(cpc_ii)
    if not config.no_cpc_pr and cpc_pr is not None:
        aux.append(cpc_pr)
    if not aux or config.kappa == 0.0:
        return task
    return T.add(task, T.scale(T.add_n(aux), config.kappa))


def batch_losses(model, batch, masks, drop_rng=None):
    """Forward one batch and compose every loss term."""
    config = model.config
    review_forwards, entries = model.forward_batch(batch, masks, drop_rng)
    task, rank_diag = ranking_loss(review_forwards, config.gamma)

    sets = build_pair_sets(
        entries,
        theta_hi=config.theta_hi,
        theta_lo=config.theta_lo,
        multimodal=config.multimodal,
    )
    if config.multimodal:
        cpc_ii_loss, ii_active = cpc_inner_instance(sets, config.tau)
        by_modality, cpc_pr_loss, pr_active = cpc_product_review(sets, config.tau)
    else:
        cpc_ii_loss, ii_active = None, False
        by_modality, cpc_pr_loss, pr_active = cpc_product_review(
            sets, config.tau, modalities=("t",)
        )
    loss = total_loss(task, cpc_ii_loss, cpc_pr_loss, config)
    diagnostics = {
        **rank_diag,
        **sets.sizes(),
        "ii_active": ii_active,
        "pr_active_t": pr_active.get("t", False),
        "l_task": task.item(),
        "cpc_ii": cpc_ii_loss.item() if cpc_ii_loss is not None else 0.0,
        "cpc_pr_t": by_modality["t"].item() if "t" in by_modality else 0.0,
        "cpc_pr_v": by_modality["v"].item() if "v" in by_modality else 0.0,
        "cpc_pr": cpc_pr_loss.item() if cpc_pr_loss is not None else 0.0,
        "loss": loss.item(),
    }
    return loss, review_forwards, diagnostics


def score_corpus(model, corpus, masks=None):
    """Predicted score rows for metric evaluation; runs in eval mode."""
    was_training = model.training
    model.train_mode(False)
    if masks is None:
        masks = prepare_masks(corpus)
    rows = []
    try:
        for product in corpus.products:
            reviews = corpus.reviews_by_product[product.product_id]
            if not reviews:
                continue
            product_fwd = model.encode_product(product)
            ids, preds, golds = [], [], []
            for review in reviews:
                fwd = model.encode_review(review, product_fwd, masks[review.review_id])
                ids.append(review.review_id)
                preds.append(fwd.xi.item())
                golds.append(review.helpfulness)
            rows.append((product.product_id, ids, preds, golds))
    finally:
        model.train_mode(was_training)
    return rows


def evaluate_model(model, corpus, masks=None):
    rows = score_corpus(model, corpus, masks)
    return evaluate_ranking(rows, threshold=model.config.relevance_threshold)


@dataclass
class TrainResult:
    model: HelpfulnessModel
    history: list = field(default_factory=list)
    best_epoch: int | None = None
    best_dev_map: float | None = None
    best_state: dict | None = None
    diverged: bool = False


def _snapshot(model):
    return {name: p.data.copy() for name, p in model.named_parameters().items()}


def _restore(model, state):
    for name, p in model.named_parameters().items():
        p.data[...] = state[name]


def _params_finite(model):
    return all(np.all(np.isfinite(p.data)) for p in model.parameters())


def train(split, config, log_writer=None, pretrained=None):
    """Train on a dataset split; deterministic given (seed, config, data).

    ``log_writer`` receives one dict per logged event (steps and dev evals).
    Keeps the best-dev-MAP parameter snapshot in the result; a non-finite
    loss aborts with the last good state restored.
    """
    config.validate()
    vocab = build_vocab(split.train)
    model = HelpfulnessModel(config, vocab, pretrained=pretrained)
    train_masks = prepare_masks(split.train)
    dev_masks = prepare_masks(split.dev)
    optimizer = Adam(model.parameters(trainable_only=True), lr=config.learning_rate)
    shuffle_rng = np.random.default_rng([SHUFFLE_NAMESPACE, config.seed])
    drop_rng = np.random.default_rng([DROPOUT_NAMESPACE, config.seed])

    result = TrainResult(model=model)
    last_good = _snapshot(model)
    products = split.train.products
    step = 0

    def emit(record):
        result.history.append(record)
        if log_writer is not None:
            log_writer(record)

    for epoch in range(1, config.epochs + 1):
        model.train_mode(True)
        order = shuffle_rng.permutation(len(products))
        for start in range(0, len(products), config.batch_size):
            chunk = order[start : start + config.batch_size]
            batch = [
                (products[i], split.train.reviews_by_product[products[i].product_id])
                for i in chunk
            ]
            model.zero_grad()
            loss, review_forwards, diagnostics = batch_losses(
                model, batch, train_masks, drop_rng
            )
            if not math.isfinite(diagnostics["loss"]):
                _restore(model, last_good)
                result.diverged = True
                emit({"epoch": epoch, "step": step, "event": "divergence"})
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch} step {step}; "
                    "last good parameters restored"
                )
            loss.backward()
            optimizer.step()
            if not _params_finite(model):
                _restore(model, last_good)
                result.diverged = True
                emit({"epoch": epoch, "step": step, "event": "divergence"})
                raise DivergenceError(
                    f"non-finite parameters after epoch {epoch} step {step}; "
                    "last good parameters restored"
                )
            last_good = _snapshot(model)
            step += 1
            emit({"epoch": epoch, "step": step, **diagnostics})

        if config.eval_every and epoch % config.eval_every == 0 and split.dev.products:
            report = evaluate_model(model, split.dev, dev_masks)
            emit(
                {
                    "epoch": epoch,
                    "event": "dev_eval",
                    "dev_map": report.map,
                    "dev_ndcg3": report.ndcg3,
                    "dev_ndcg5": report.ndcg5,
                }
            )
            if result.best_dev_map is None or report.map > result.best_dev_map:
                result.best_dev_map = report.map
                result.best_epoch = epoch
                result.best_state = _snapshot(model)

    if result.best_state is None:
        result.best_state = _snapshot(model)
        result.best_epoch = config.epochs
    return result


def jsonl_writer(path):
    """Line-per-record JSON writer for the training log."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = open(path, "w", encoding="utf-8")

    def write(record):
        handle.write(json.dumps(record, ensure_ascii=False) + "\n")
        handle.flush()

    write.close = handle.close
    return write
