"""End-to-end CLI behavior on a miniature corpus."""

import json

import numpy as np
import pytest

from reviewrank.cli import main

GEN_CONFIG = {
    "train_products": 4,
    "dev_products": 2,
    "test_products": 2,
    "reviews_per_product": 6,
    "vocab_content": 50,
    "vocab_filler": 25,
    "feature_dim": 8,
    "regions_min": 2,
    "regions_max": 3,
    "topic_dim": 4,
    "sentences_per_review": 2,
    "tokens_per_sentence": 5,
    "description_sentences": 1,
}

TRAIN_CONFIG = {
    "learning_rate": 3e-3,
    "batch_size": 2,
    "text_embed_dim": 12,
    "hidden_dim": 12,
    "visual_input_dim": 8,
    "visual_dim": 8,
    "shared_dim": 6,
    "embed_dropout": 0.0,
    "epochs": 2,
    "seed": 3,
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    gen_cfg = root / "gen.json"
    gen_cfg.write_text(json.dumps(GEN_CONFIG))
    train_cfg = root / "train.json"
    train_cfg.write_text(json.dumps(TRAIN_CONFIG))
    data = root / "data"
    code = main(["synth", "--out", str(data), "--seed", "7", "--config", str(gen_cfg)])
    assert code == 0
    return root, data, train_cfg


class TestSynth:
    def test_produces_loadable_split_with_manifest(self, workspace):
        root, data, _ = workspace
        from reviewrank.corpus import load_corpus

        split = load_corpus(data)
        assert len(split.train.products) == 4
        manifest = json.loads((data / "run_manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 7
        assert (data / "train" / "masks_gold.jsonl").exists()

    def test_refuses_nonempty_out_without_force(self, workspace, capsys):
        root, data, _ = workspace
        gen_cfg = root / "gen.json"
        code = main(["synth", "--out", str(data), "--seed", "7", "--config", str(gen_cfg)])
        assert code == 2
        assert "force" in capsys.readouterr().err

    def test_seed_repeat_identical_bytes(self, workspace, tmp_path):
        root, _, _ = workspace
        gen_cfg = root / "gen.json"
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "--out", str(a), "--seed", "9", "--config", str(gen_cfg)]) == 0
        assert main(["synth", "--out", str(b), "--seed", "9", "--config", str(gen_cfg)]) == 0
        for rel in ("train/products.jsonl", "train/reviews.jsonl", "train/annotations.jsonl",
                    "dev/reviews.jsonl", "test/masks_gold.jsonl"):
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_generated_sizes_match_config(self, workspace):
        _, data, _ = workspace
        lines = (data / "train" / "reviews.jsonl").read_text().strip().splitlines()
        assert len(lines) == 4 * 6
        dev_lines = (data / "dev" / "reviews.jsonl").read_text().strip().splitlines()
        assert len(dev_lines) == 2 * 6


@pytest.fixture(scope="module")
def trained(workspace, tmp_path_factory):
    root, data, train_cfg = workspace
    out = tmp_path_factory.mktemp("run")
    code = main(
        ["train", "--data", str(data), "--out", str(out), "--config", str(train_cfg), "--force"]
    )
    assert code == 0
    return out


class TestTrain:
    def test_missing_data_dir_exit_2(self, workspace, capsys):
        root, _, train_cfg = workspace
        code = main(["train", "--data", str(root / "nope"), "--out", str(root / "o"),
                     "--config", str(train_cfg)])
        assert code == 2

    def test_outputs_checkpoint_log_manifest(self, trained):
        assert (trained / "checkpoint.sncl").exists()
        log_lines = (trained / "train_log.jsonl").read_text().strip().splitlines()
        records = [json.loads(l) for l in log_lines]
        assert any("l_task" in r for r in records)
        assert any(r.get("event") == "dev_eval" for r in records)
        assert (trained / "run_manifest.json").exists()

    def test_kappa_zero_equals_both_cpc_flags(self, workspace, tmp_path):
        root, data, train_cfg = workspace
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["train", "--data", str(data), "--out", str(out_a),
                     "--config", str(train_cfg), "--kappa", "0.0", "--epochs", "1"]) == 0
        assert main(["train", "--data", str(data), "--out", str(out_b),
                     "--config", str(train_cfg), "--no-cpc-ii", "--no-cpc-pr",
                     "--epochs", "1"]) == 0

        def losses(path):
            return [
                json.loads(l)["loss"]
                for l in (path / "train_log.jsonl").read_text().splitlines()
                if "loss" in json.loads(l)
            ]

        assert losses(out_a) == losses(out_b)

    def test_fixed_beta_flag_lands_in_checkpoint_config(self, workspace, tmp_path):
        root, data, train_cfg = workspace
        out = tmp_path / "fb"
        assert main(["train", "--data", str(data), "--out", str(out),
                     "--config", str(train_cfg), "--fixed-beta", "0.5",
                     "--epochs", "1"]) == 0
        from reviewrank.checkpoint import read_checkpoint

        _, config_map, _, _ = read_checkpoint(out / "checkpoint.sncl")
        assert config_map["fixed_beta"] == 0.5

    def test_visual_width_mismatch_exit_2(self, workspace, tmp_path, capsys):
        root, data, _ = workspace
        bad_cfg = tmp_path / "bad.json"
        bad_cfg.write_text(json.dumps({**TRAIN_CONFIG, "visual_input_dim": 99}))
        code = main(["train", "--data", str(data), "--out", str(tmp_path / "o"),
                     "--config", str(bad_cfg)])
        assert code == 2
        assert "visual_input_dim" in capsys.readouterr().err

    def test_unknown_config_key_exit_2(self, workspace, tmp_path, capsys):
        root, data, _ = workspace
        bad_cfg = tmp_path / "bad.json"
        bad_cfg.write_text(json.dumps({"learningrate": 1e-3}))
        code = main(["train", "--data", str(data), "--out", str(tmp_path / "o"),
                     "--config", str(bad_cfg)])
        assert code == 2
        assert "learningrate" in capsys.readouterr().err


class TestEval:
    def test_eval_twice_identical_output(self, workspace, trained, capsys):
        _, data, _ = workspace
        args = ["eval", "--checkpoint", str(trained / "checkpoint.sncl"), "--data", str(data)]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        second = capsys.readouterr().out
        assert first == second
        report = json.loads(first)
        assert 0.0 <= report["map"] <= 1.0

    def test_eval_matches_training_dev_numbers(self, workspace, trained, capsys):
        _, data, _ = workspace
        records = [
            json.loads(l)
            for l in (trained / "train_log.jsonl").read_text().splitlines()
        ]
        dev_evals = [r for r in records if r.get("event") == "dev_eval"]
        best = max(dev_evals, key=lambda r: r["dev_map"])
        assert main(["eval", "--checkpoint", str(trained / "checkpoint.sncl"),
                     "--data", str(data), "--split", "dev"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["map"] == pytest.approx(best["dev_map"], abs=1e-12)
        assert report["ndcg5"] == pytest.approx(best["dev_ndcg5"], abs=1e-12)

    def test_check_metrics_flag_passes(self, workspace, trained, capsys):
        _, data, _ = workspace
        assert main(["eval", "--checkpoint", str(trained / "checkpoint.sncl"),
                     "--data", str(data), "--check-metrics"]) == 0
        capsys.readouterr()

    def test_per_product_csv(self, workspace, trained, tmp_path, capsys):
        _, data, _ = workspace
        csv_path = tmp_path / "per_product.csv"
        assert main(["eval", "--checkpoint", str(trained / "checkpoint.sncl"),
                     "--data", str(data), "--per-product", str(csv_path)]) == 0
        capsys.readouterr()
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0].startswith("product_id,")
        assert len(lines) == 3  # header + 2 test products


class TestTextOnly:
    def test_text_only_corpus_trains_and_evals(self, tmp_path, capsys):
        gen_cfg = tmp_path / "gen.json"
        gen_cfg.write_text(json.dumps({**GEN_CONFIG, "text_only": True}))
        train_cfg = tmp_path / "train.json"
        train_cfg.write_text(json.dumps({**TRAIN_CONFIG, "mode": "text-only"}))
        data = tmp_path / "data"
        out = tmp_path / "run"
        assert main(["synth", "--out", str(data), "--seed", "4", "--config", str(gen_cfg)]) == 0
        assert main(["train", "--data", str(data), "--out", str(out),
                     "--config", str(train_cfg)]) == 0
        capsys.readouterr()
        assert main(["eval", "--checkpoint", str(out / "checkpoint.sncl"),
                     "--data", str(data)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert 0.0 <= report["map"] <= 1.0

    def test_multimodal_mode_on_text_only_corpus_exit_2(self, tmp_path, capsys):
        gen_cfg = tmp_path / "gen.json"
        gen_cfg.write_text(json.dumps({**GEN_CONFIG, "text_only": True}))
        train_cfg = tmp_path / "train.json"
        train_cfg.write_text(json.dumps(TRAIN_CONFIG))
        data = tmp_path / "data"
        assert main(["synth", "--out", str(data), "--seed", "4", "--config", str(gen_cfg)]) == 0
        code = main(["train", "--data", str(data), "--out", str(tmp_path / "o"),
                     "--config", str(train_cfg)])
        assert code == 2
        assert "text-only" in capsys.readouterr().err


class TestProbeMaskCli:
    def test_masks_emitted_for_every_review(self, workspace, tmp_path, capsys):
        _, data, _ = workspace
        out = tmp_path / "masks.jsonl"
        assert main(["probe-mask",
                     "--products", str(data / "train" / "products.jsonl"),
                     "--reviews", str(data / "train" / "reviews.jsonl"),
                     "--annotations", str(data / "train" / "annotations.jsonl"),
                     "--out", str(out)]) == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 24
        gold = {
            json.loads(l)["review_id"]: json.loads(l)["mask"]
            for l in (data / "train" / "masks_gold.jsonl").read_text().splitlines()
        }
        for record in lines:
            assert record["mask"] == gold[record["review_id"]]

    def test_heuristic_annotations_round_trip(self, workspace, tmp_path):
        _, data, _ = workspace
        out = tmp_path / "ann.jsonl"
        assert main(["annotate-heuristic",
                     "--products", str(data / "train" / "products.jsonl"),
                     "--reviews", str(data / "train" / "reviews.jsonl"),
                     "--out", str(out)]) == 0
        from reviewrank.corpus import load_annotations

        annotations = load_annotations(out)
        assert len(annotations) == 24
