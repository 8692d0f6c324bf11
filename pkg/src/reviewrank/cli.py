"""Command-line surface: synth, train, eval, probe-mask, annotate-heuristic.

Every command is deterministic in (inputs, seed) and leaves exactly one
``run_manifest.json`` in its output directory. Exit codes: 0 success,
1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .checkpoint import load_model, save_checkpoint
from .config import GeneratorConfig, TrainConfig, resolve_config
from .corpus import load_corpus, load_corpus_dir, save_corpus
from .errors import ConfigError, ReviewRankError
from .metrics import evaluate_ranking, reference_average_precision, reference_ndcg_at
from .model import prepare_masks
from .probe import extract_core_words, heuristic_annotate, probe_mask_for_review
from .train import jsonl_writer, score_corpus, train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _content_hash(paths):
    digest = hashlib.sha256()
    for path in sorted(str(p) for p in paths):
        p = Path(path)
        if p.is_file():
            digest.update(p.name.encode())
            digest.update(p.read_bytes())
        elif p.is_dir():
            for child in sorted(p.rglob("*")):
                if child.is_file():
                    digest.update(str(child.relative_to(p)).encode())
                    digest.update(child.read_bytes())
    return digest.hexdigest()


def _write_manifest(out_dir, command, config, seed, inputs):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": f"reviewrank {__version__}",
        "command": command,
        "config": dataclasses.asdict(config) if config is not None else None,
        "seed": seed,
        "input_hash": _content_hash(inputs),
        "created_unix": time.time(),
    }
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def _ensure_fresh_dir(path, force):
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise ConfigError(
            f"output directory {path} is not empty (use --force to overwrite)"
        )
    path.mkdir(parents=True, exist_ok=True)


def _overrides(args, names):
    return {name: getattr(args, name) for name in names if getattr(args, name) is not None}


# ---------------------------------------------------------------------------


def cmd_synth(args):
    config = resolve_config(
        GeneratorConfig,
        args.config,
        _overrides(
            args,
            ["train_products", "dev_products", "test_products", "reviews_per_product"],
        ),
    )
    _ensure_fresh_dir(args.out, args.force)
    from .synthgen import synthesize

    split, gold_masks = synthesize(config, args.seed)
    save_corpus(split, args.out)
    for name, corpus in (("train", split.train), ("dev", split.dev), ("test", split.test)):
        with open(Path(args.out) / name / "masks_gold.jsonl", "w", encoding="utf-8") as fh:
            for review in corpus.reviews:
                record = {
                    "review_id": review.review_id,
                    "mask": [int(b) for b in gold_masks[review.review_id]],
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    _write_manifest(
        args.out, "synth", config, args.seed, [args.config] if args.config else []
    )
    print(
        json.dumps(
            {
                "out": str(args.out),
                "train_products": config.train_products,
                "reviews": sum(
                    len(c.reviews) for c in (split.train, split.dev, split.test)
                ),
            }
        )
    )
    return EXIT_OK


TRAIN_FLAG_OVERRIDES = [
    "learning_rate",
    "kappa",
    "gamma",
    "batch_size",
    "epochs",
    "seed",
    "mode",
    "fixed_beta",
    "eval_every",
]


def cmd_train(args):
    data_dir = Path(args.data)
    if not data_dir.is_dir():
        raise ConfigError(f"data directory {data_dir} does not exist")
    overrides = _overrides(args, TRAIN_FLAG_OVERRIDES)
    for flag in ("no_probe_mask", "no_cpc_ii", "no_cpc_pr"):
        if getattr(args, flag):
            overrides[flag] = True
    config = resolve_config(TrainConfig, args.config, overrides)
    split = load_corpus(data_dir)

    if config.multimodal:
        widths = {
            p.visual_features.shape[1]
            for p in split.train.products
            if p.visual_features.size
        }
        if not widths:
            raise ConfigError(
                "corpus has no visual features; use mode=text-only or regenerate"
            )
        if widths != {config.visual_input_dim}:
            raise ConfigError(
                f"visual_input_dim={config.visual_input_dim} does not match "
                f"corpus feature widths {sorted(widths)}"
            )

    _ensure_fresh_dir(args.out, args.force)
    log = jsonl_writer(Path(args.out) / "train_log.jsonl")
    pretrained = None
    if config.pretrained_embeddings:
        from .encoders import load_pretrained_embeddings

        pretrained = load_pretrained_embeddings(
            config.pretrained_embeddings, config.text_embed_dim
        )
    try:
        result = train(split, config, log_writer=log, pretrained=pretrained)
    finally:
        log.close()
    # persist the best-dev parameters (falls back to the final state)
    for name, param in result.model.named_parameters().items():
        param.data[...] = result.best_state[name]
    checkpoint_path = Path(args.out) / "checkpoint.sncl"
    save_checkpoint(checkpoint_path, result.model)
    _write_manifest(args.out, "train", config, config.seed, [data_dir] + ([args.config] if args.config else []))
    print(
        json.dumps(
            {
                "checkpoint": str(checkpoint_path),
                "best_epoch": result.best_epoch,
                "best_dev_map": result.best_dev_map,
                "parameters": result.model.parameter_count(),
            }
        )
    )
    return EXIT_OK


def cmd_eval(args):
    model = load_model(args.checkpoint)
    corpus = load_corpus_dir(Path(args.data) / args.split)
    masks = prepare_masks(corpus)
    rows = score_corpus(model, corpus, masks)
    report = evaluate_ranking(rows, threshold=model.config.relevance_threshold)
    if args.check_metrics:
        for product_id, ids, preds, golds in rows:
            order = sorted(range(len(preds)), key=lambda i: (-preds[i], ids[i]))
            ranked = [golds[i] for i in order]
            want_ap = reference_average_precision(
                ranked, model.config.relevance_threshold
            )
            got = next(p for p in report.per_product if p.product_id == product_id)
            ap_match = (got.ap is None and want_ap is None) or (
                got.ap is not None
                and want_ap is not None
                and abs(got.ap - want_ap) < 1e-12
            )
            if not ap_match or abs(got.ndcg5 - reference_ndcg_at(ranked, 5)) > 1e-12:
                raise ReviewRankError(
                    f"metric cross-check failed for product {product_id}"
                )
    if args.per_product:
        with open(args.per_product, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["product_id", "n_reviews", "n_relevant", "ap", "ndcg3", "ndcg5"])
            for p in report.per_product:
                writer.writerow(
                    [p.product_id, p.n_reviews, p.n_relevant, p.ap, p.ndcg3, p.ndcg5]
                )
    print(json.dumps(report.to_dict()))
    return EXIT_OK


def cmd_probe_mask(args):
    from .corpus import load_annotations, load_products, load_reviews

    products = {p.product_id: p for p in load_products(args.products)}
    reviews = load_reviews(args.reviews)
    annotations = load_annotations(args.annotations) if args.annotations else {}
    with open(args.out, "w", encoding="utf-8") as fh:
        for review in reviews:
            product = products.get(review.product_id)
            if product is None:
                raise ReviewRankError(
                    f"review {review.review_id} references unknown product "
                    f"{review.product_id}"
                )
            mask = probe_mask_for_review(
                review, product, annotations.get(review.review_id)
            )
            fh.write(
                json.dumps(
                    {"review_id": review.review_id, "mask": [int(b) for b in mask.values]},
                    ensure_ascii=False,
                )
                + "\n"
            )
    return EXIT_OK


def cmd_annotate_heuristic(args):
    from .corpus import load_products, load_reviews

    products = {p.product_id: p for p in load_products(args.products)}
    reviews = load_reviews(args.reviews)
    records = []
    for review in reviews:
        product = products.get(review.product_id)
        if product is None:
            raise ReviewRankError(
                f"review {review.review_id} references unknown product {review.product_id}"
            )
        core = extract_core_words(product.name) if product.name else []
        records.append(heuristic_annotate(review, core))
    records.sort(key=lambda r: r.review_id)
    with open(args.out, "w", encoding="utf-8") as fh:
        for ann in records:
            fh.write(
                json.dumps(
                    {
                        "review_id": ann.review_id,
                        "core_words": ann.core_words,
                        "clusters": [[list(s) for s in c] for c in ann.clusters],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="reviewrank",
        description="Multimodal review-helpfulness ranking pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--force", action="store_true")
    p.add_argument("--train-products", dest="train_products", type=int)
    p.add_argument("--dev-products", dest="dev_products", type=int)
    p.add_argument("--test-products", dest="test_products", type=int)
    p.add_argument("--reviews-per-product", dest="reviews_per_product", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a corpus directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--force", action="store_true")
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["multimodal", "text-only"])
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--no-probe-mask", dest="no_probe_mask", action="store_true")
    p.add_argument("--fixed-beta", dest="fixed_beta", type=float)
    p.add_argument("--no-cpc-ii", dest="no_cpc_ii", action="store_true")
    p.add_argument("--no-cpc-pr", dest="no_cpc_pr", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=["train", "dev", "test"])
    p.add_argument("--per-product", dest="per_product")
    p.add_argument(
        "--check-metrics",
        dest="check_metrics",
        action="store_true",
        help="re-derive MAP/NDCG with the brute-force reference and compare",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe-mask", help="emit probe masks for a corpus")
    p.add_argument("--products", required=True)
    p.add_argument("--reviews", required=True)
    p.add_argument("--annotations")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_probe_mask)

    p = sub.add_parser(
        "annotate-heuristic", help="emit heuristic coreference annotations"
    )
    p.add_argument("--products", required=True)
    p.add_argument("--reviews", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate_heuristic)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ReviewRankError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
