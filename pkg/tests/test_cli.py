"""End-to-end runs of the crosscap command line."""

import filecmp
import json
from pathlib import Path

import pytest

from crosscap import __version__
from crosscap.cli import main


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Drive every stage once on a small synthetic corpus; share the artifacts."""
    root = tmp_path_factory.mktemp("pipeline")
    data = root / "data"
    clf = root / "classifier"
    cap = root / "captioner"
    assert run(["synth", "--out", data, "--images", 40, "--rho", 0.5,
                "--seed", 1]) == 0
    assert run(["train-classifier",
                "--train-target", data / "train_labels.jsonl",
                "--train-source", data / "train_source.jsonl",
                "--val-target", data / "val_labels.jsonl",
                "--val-source", data / "val_source.jsonl",
                "--out", clf, "--embed-dim", 8, "--hidden-dim", 8,
                "--epochs", 8, "--batch-size", 16, "--patience", 8,
                "--dropout", 0.0, "--lr", 5e-3]) == 0
    scored = root / "train_scored.jsonl"
    assert run(["score", "--target", data / "train_target.jsonl",
                "--source", data / "train_source.jsonl",
                "--classifier", clf, "--out", scored]) == 0
    assert run(["train-captioner", "--train", scored,
                "--val", data / "val_target.jsonl",
                "--features", data / "features.txt", "--out", cap,
                "--strategy", "weighted-loss", "--embed-dim", 8,
                "--hidden-dim", 8, "--epochs", 3, "--batch-size", 8,
                "--lr0", 0.05, "--min-count", 1]) == 0
    candidates = root / "candidates.jsonl"
    assert run(["caption", "--features", data / "test_features.txt",
                "--model", cap, "--out", candidates,
                "--beam", 3, "--max-len", 8, "--topk", 2]) == 0
    reranked = root / "reranked.jsonl"
    assert run(["rerank", "--candidates", candidates, "--classifier", clf,
                "--out", reranked, "--source", data / "test_source.jsonl"]) == 0
    report = root / "report.json"
    assert run(["evaluate", "--candidates", candidates,
                "--references", data / "test_references.jsonl",
                "--out", report]) == 0
    return {"root": root, "data": data, "clf": clf, "cap": cap,
            "scored": scored, "candidates": candidates,
            "reranked": reranked, "report": report}


class TestPipelineArtifacts:
    def test_synth_layout_and_manifest(self, pipeline):
        data = pipeline["data"]
        for split in ("train", "val", "test"):
            for suffix in ("target", "source", "labels", "references"):
                assert (data / f"{split}_{suffix}.jsonl").exists()
            assert (data / f"{split}_features.txt").exists()
        manifest = json.loads((data / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["config"]["images"] == 40
        assert manifest["config"]["rho"] == 0.5
        assert manifest["generator"]["splits"]["train"]["images"] == 32

    def test_classifier_artifacts(self, pipeline):
        clf = pipeline["clf"]
        for view in ("target_words", "target_pos", "source_words", "source_pos"):
            assert (clf / f"view_{view}.bin").exists()
            assert (clf / f"vocab_{view}.txt").exists()
        manifest = json.loads((clf / "manifest.json").read_text())
        assert set(manifest["views"]) == {
            "target_words", "target_pos", "source_words", "source_pos"}
        assert 0.0 <= manifest["val_accuracy"] <= 1.0

    def test_scored_file_has_probabilities(self, pipeline):
        lines = pipeline["scored"].read_text().splitlines()
        assert lines
        for line in lines:
            score = json.loads(line)["fluency"]
            assert 0.0 <= score <= 1.0
        assert Path(str(pipeline["scored"]) + ".manifest.json").exists()

    def test_captioner_manifest_tracks_training(self, pipeline):
        manifest = json.loads((pipeline["cap"] / "manifest.json").read_text())
        assert manifest["config"]["strategy"] == "weighted-loss"
        assert len(manifest["train_losses"]) == 3
        assert len(manifest["epoch_sizes"]) == 3

    def test_candidates_ranked_per_image(self, pipeline):
        rows = [json.loads(l) for l in
                pipeline["candidates"].read_text().splitlines()]
        by_image = {}
        for row in rows:
            by_image.setdefault(row["image_id"], []).append(row)
        assert len(by_image) == 4  # test split of 40 images at 10%
        for group in by_image.values():
            assert [r["rank"] for r in group] == list(range(1, len(group) + 1))
            logprobs = [r["logprob"] for r in group]
            assert logprobs == sorted(logprobs, reverse=True)

    def test_rerank_orders_by_fluency(self, pipeline):
        rows = [json.loads(l) for l in
                pipeline["reranked"].read_text().splitlines()]
        by_image = {}
        for row in rows:
            by_image.setdefault(row["image_id"], []).append(row)
        for group in by_image.values():
            assert [r["rank"] for r in group] == list(range(1, len(group) + 1))
            scores = [r["fluency"] for r in group]
            assert scores == sorted(scores, reverse=True)
            assert all(0.0 <= f <= 1.0 for f in scores)
            for row in group:
                if row["tokens"]:
                    # source file supplied, toy tagger on: all four views
                    assert row["degraded"] is False
                else:
                    # the under-trained pipeline model can decode nothing;
                    # empty candidates score 0.0, flagged, and sort last
                    assert row["degraded"] is True
                    assert row["fluency"] == 0.0
                    assert row["rank"] == len(group)

    def test_evaluation_report(self, pipeline):
        report = json.loads(pipeline["report"].read_text())
        for key in ("bleu4", "rouge_l", "cider"):
            assert 0.0 <= report[key] <= 100.0
        assert report["cider_variant"] == "plain"
        assert len(report["per_image"]) == 4


class TestSynthDeterminism:
    def test_identical_reruns_write_identical_data(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["synth", "--out", out, "--images", 12,
                        "--rho", 0.3, "--seed", 7]) == 0
        names = [p.name for p in a.iterdir() if p.name != "manifest.json"]
        match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        assert not mismatch and not errors
        assert sorted(match) == sorted(names)


class TestConfigHandling:
    def test_config_file_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# corpus size\n"
            f"out = {tmp_path / 'from_cfg'}\n"
            "images = 9\n"
            "rho = 0.25\n")
        assert run(["synth", "--config", cfg]) == 0
        manifest = json.loads((tmp_path / "from_cfg" / "manifest.json").read_text())
        assert manifest["config"]["images"] == 9
        assert manifest["config"]["rho"] == 0.25

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"out = {tmp_path / 'ignored'}\nimages = 9\n")
        assert run(["synth", "--config", cfg, "--out", tmp_path / "flagged",
                    "--images", 5]) == 0
        manifest = json.loads((tmp_path / "flagged" / "manifest.json").read_text())
        assert manifest["config"]["images"] == 5

    def test_malformed_config_line_reported(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("images 9\n")
        assert run(["synth", "--config", cfg, "--out", tmp_path / "x"]) == 1
        err = capsys.readouterr().err
        assert "error:" in err and "key=value" in err

    def test_data_root_resolves_relative_paths(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CROSSCAP_DATA_ROOT", str(tmp_path))
        assert run(["synth", "--out", "nested/corpus", "--images", 6]) == 0
        assert (tmp_path / "nested" / "corpus" / "manifest.json").exists()


class TestErrorReporting:
    def test_missing_required_flag_named(self, capsys):
        assert run(["synth", "--images", 5]) == 1
        assert "missing required flag --out" in capsys.readouterr().err

    def test_guided_strategy_without_scores_points_at_score_command(
            self, pipeline, capsys):
        data = pipeline["data"]
        code = run(["train-captioner", "--train", data / "train_target.jsonl",
                    "--val", data / "val_target.jsonl",
                    "--features", data / "features.txt",
                    "--out", pipeline["root"] / "unused",
                    "--strategy", "fluency-only", "--epochs", 1])
        assert code == 1
        err = capsys.readouterr().err
        assert "score subcommand" in err and "fluency-only" in err

    def test_unreadable_input_reported_not_raised(self, tmp_path, capsys):
        assert run(["score", "--target", tmp_path / "absent.jsonl",
                    "--source", tmp_path / "absent.jsonl",
                    "--classifier", tmp_path, "--out", tmp_path / "o"]) == 1
        assert "error:" in capsys.readouterr().err


class TestGradcheckCommand:
    def test_both_families_pass(self, capsys):
        assert run(["gradcheck"]) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 2
        assert "classifier" in out and "captioner" in out


class TestVersion:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out
