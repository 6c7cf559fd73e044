import hashlib
import os

import numpy as np
import pytest

from captchakit.cli import dispatch
from captchakit.dataset import load_split
from captchakit.imageio import MANIFEST_NAME, load_manifest
from captchakit.labelsvc import make_server
from captchakit.nn import load_weights


def tree_digest(root):
    h = hashlib.sha256()
    for dirpath, dirnames, filenames in sorted(os.walk(root)):
        dirnames.sort()
        for name in sorted(filenames):
            full = os.path.join(dirpath, name)
            h.update(os.path.relpath(full, root).encode())
            with open(full, "rb") as f:
                h.update(f.read())
    return h.hexdigest()


def run(capsys, *argv):
    code = dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDispatchPlumbing:
    def test_no_command_is_usage_error(self, capsys):
        assert dispatch([]) == 2

    def test_unknown_command(self, capsys):
        assert dispatch(["frobnicate"]) == 2

    def test_unknown_flag(self, capsys):
        assert dispatch(["generate", "--nope", "--out", "x"]) == 2

    def test_missing_required_flag(self, capsys):
        assert dispatch(["train", "--data", "d"]) == 2

    def test_help_exits_zero(self, capsys):
        assert dispatch(["--help"]) == 0
        assert dispatch(["generate", "--help"]) == 0

    def test_domain_error_exits_one(self, tmp_path, capsys):
        code, out, err = run(
            capsys,
            "preprocess", "--in", str(tmp_path / "missing.pgm"),
            "--mode", "otsu", "--out", str(tmp_path / "o.pgm"),
        )
        assert code == 1
        assert err.startswith("error:")
        assert out == ""

    def test_bad_threads(self, capsys):
        assert dispatch(["--threads", "0", "grad-check"]) == 2


class TestGenerate:
    def test_counts_and_splits(self, tmp_path, capsys):
        out = tmp_path / "d"
        code, stdout, _ = run(
            capsys,
            "generate", "--style", "clean", "--length", "3", "--count", "50",
            "--seed", "7", "--out", str(out),
        )
        assert code == 0
        assert stdout == "train=40\nval=5\ntest=5\n"
        manifest = load_manifest(out / MANIFEST_NAME)
        assert len(manifest) == 50
        assert all(len(r.label) == 3 for r in manifest.records)

    def test_same_seed_same_tree(self, tmp_path, capsys):
        args = ["generate", "--style", "jam", "--length", "4", "--count", "40",
                "--seed", "7"]
        assert dispatch(args + ["--out", str(tmp_path / "a")]) == 0
        assert dispatch(args + ["--out", str(tmp_path / "b")]) == 0
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
        assert dispatch(args[:-2] + ["--seed", "8", "--out", str(tmp_path / "c")]) == 0
        assert tree_digest(tmp_path / "a") != tree_digest(tmp_path / "c")

    def test_cells_dataset(self, tmp_path, capsys):
        out = tmp_path / "cells"
        code, stdout, _ = run(
            capsys,
            "generate", "--cells", "--charset", "0123456789", "--per-class", "20",
            "--cell", "12", "--seed", "3", "--out", str(out),
        )
        assert code == 0
        assert stdout == "train=160\nval=20\ntest=20\n"
        xs, labels = load_split(out, "train")
        assert xs.shape == (160, 12, 12, 1)
        assert set("".join(labels)) <= set("0123456789")

    def test_cells_needs_charset(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "generate", "--cells", "--out", str(tmp_path / "x")
        )
        assert code == 1
        assert "--charset" in err


class TestPreprocessSegment:
    def test_preprocess_writes_mask(self, tmp_path, capsys):
        assert dispatch([
            "generate", "--style", "jam", "--length", "3", "--count", "4",
            "--seed", "1", "--out", str(tmp_path / "d"),
        ]) == 0
        capsys.readouterr()
        rec = load_manifest(tmp_path / "d" / MANIFEST_NAME).records[0]
        out = tmp_path / "mask.pgm"
        code, stdout, _ = run(
            capsys,
            "preprocess", "--in", str(tmp_path / "d" / rec.file),
            "--mode", "jam", "--out", str(out),
        )
        assert code == 0
        assert stdout.strip() == str(out)
        assert out.exists()

    def test_segment_writes_cells(self, tmp_path, capsys):
        assert dispatch([
            "generate", "--style", "clean", "--length", "4", "--count", "4",
            "--seed", "5", "--out", str(tmp_path / "d"),
        ]) == 0
        capsys.readouterr()
        rec = load_manifest(tmp_path / "d" / MANIFEST_NAME).records[0]
        out = tmp_path / "cells"
        code, stdout, _ = run(
            capsys,
            "segment", "--in", str(tmp_path / "d" / rec.file),
            "--mode", "otsu", "--cell", "16", "--out", str(out),
        )
        assert code == 0
        assert stdout == "cells=4\n"
        assert sorted(os.listdir(out)) == [f"cell_{i:02d}.pgm" for i in range(4)]


class TestKnnCommands:
    @pytest.fixture
    def jam_dir(self, tmp_path):
        assert dispatch([
            "generate", "--style", "jam", "--length", "3", "--count", "120",
            "--seed", "11", "--out", str(tmp_path / "jam"),
        ]) == 0
        return tmp_path / "jam"

    def test_train_then_eval(self, jam_dir, tmp_path, capsys):
        model_path = tmp_path / "m.knn"
        code, stdout, _ = run(
            capsys,
            "knn-train", "--data", str(jam_dir), "--mode", "jam",
            "--cell", "20", "--out", str(model_path),
        )
        assert code == 0
        assert stdout.startswith("n=")
        assert model_path.exists()

        csv_path = tmp_path / "sweep.csv"
        code, stdout, _ = run(
            capsys,
            "knn-eval", "--model", str(model_path), "--data", str(jam_dir),
            "--split", "val", "--mode", "jam", "--cell", "20",
            "--ks", "1,3", "--out", str(csv_path),
        )
        assert code == 0
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "k,accuracy"
        ks = [line.split(",")[0] for line in lines[1:]]
        assert ks == ["1", "3"]
        for line in lines[1:]:
            assert 0.0 <= float(line.split(",")[1]) <= 1.0

    def test_eval_to_stdout(self, jam_dir, tmp_path, capsys):
        model_path = tmp_path / "m.knn"
        assert dispatch([
            "knn-train", "--data", str(jam_dir), "--mode", "jam",
            "--cell", "20", "--out", str(model_path),
        ]) == 0
        capsys.readouterr()
        code, stdout, _ = run(
            capsys,
            "knn-eval", "--model", str(model_path), "--data", str(jam_dir),
            "--mode", "jam", "--cell", "20", "--ks", "1",
        )
        assert code == 0
        assert stdout.splitlines()[0] == "k,accuracy"


class TestTrainPredictEval:
    def test_char_training_on_cells(self, tmp_path, capsys):
        cells = tmp_path / "cells"
        assert dispatch([
            "generate", "--cells", "--charset", "01234", "--per-class", "30",
            "--cell", "12", "--seed", "3", "--out", str(cells),
        ]) == 0
        capsys.readouterr()
        weights = tmp_path / "w.cfw"
        history = tmp_path / "h.csv"
        code, stdout, _ = run(
            capsys,
            "train", "--data", str(cells), "--arch", "char", "--epochs", "2",
            "--batch-size", "32", "--seed", "1", "--history", str(history),
            "--out", str(weights),
        )
        assert code == 0
        assert stdout.startswith("full=") and " per_char=" in stdout
        model = load_weights(weights)
        assert model.spec.input_shape == (12, 12, 1)
        assert history.read_text().splitlines()[0].startswith("epoch,train_loss")

    def test_multihead_pipeline_to_eval(self, tmp_path, capsys):
        data = tmp_path / "d"
        assert dispatch([
            "generate", "--style", "clean", "--charset", "ABC", "--length", "2",
            "--count", "90", "--seed", "9", "--out", str(data),
        ]) == 0
        weights = tmp_path / "w.cfw"
        assert dispatch([
            "train", "--data", str(data), "--mode", "otsu", "--epochs", "1",
            "--seed", "1", "--out", str(weights),
        ]) == 0
        capsys.readouterr()

        preds = tmp_path / "preds.txt"
        code, stdout, _ = run(
            capsys,
            "predict", "--weights", str(weights), "--data", str(data),
            "--split", "test", "--mode", "otsu", "--out", str(preds),
        )
        assert code == 0
        manifest = load_manifest(data / MANIFEST_NAME)
        test_labels = [r.label for r in manifest.by_split("test")]
        pred_lines = preds.read_text().splitlines()
        assert len(pred_lines) == len(test_labels)
        assert all(len(line) == 2 for line in pred_lines)

        truth = tmp_path / "truth.txt"
        truth.write_text("\n".join(test_labels) + "\n")
        code, stdout, _ = run(
            capsys, "eval", "--pred", str(preds), "--truth", str(truth)
        )
        assert code == 0
        assert stdout.startswith("full=")

    def test_predict_without_out_prints_lines(self, tmp_path, capsys):
        data = tmp_path / "d"
        assert dispatch([
            "generate", "--style", "clean", "--charset", "AB", "--length", "1",
            "--count", "30", "--seed", "2", "--out", str(data),
        ]) == 0
        weights = tmp_path / "w.cfw"
        assert dispatch([
            "train", "--data", str(data), "--mode", "otsu", "--epochs", "1",
            "--seed", "1", "--out", str(weights),
        ]) == 0
        capsys.readouterr()
        code, stdout, _ = run(
            capsys,
            "predict", "--weights", str(weights), "--data", str(data),
            "--split", "test", "--mode", "otsu",
        )
        assert code == 0
        assert len(stdout.splitlines()) == 3


class TestEvalCommand:
    def test_documented_example(self, tmp_path, capsys):
        pred = tmp_path / "p.txt"
        truth = tmp_path / "t.txt"
        pred.write_text("AB\nCD\n")
        truth.write_text("AB\nCC\n")
        code, stdout, _ = run(capsys, "eval", "--pred", str(pred), "--truth", str(truth))
        assert code == 0
        assert stdout == "full=0.5 per_char=0.75\n"

    def test_report_and_confusion_files(self, tmp_path, capsys):
        pred = tmp_path / "p.txt"
        truth = tmp_path / "t.txt"
        pred.write_text("AB\nCD\n")
        truth.write_text("AB\nCC\n")
        report = tmp_path / "r.csv"
        confusion = tmp_path / "c.csv"
        code, _, _ = run(
            capsys,
            "eval", "--pred", str(pred), "--truth", str(truth),
            "--report", str(report), "--confusion", str(confusion),
        )
        assert code == 0
        assert report.read_text().splitlines()[0] == "metric,value"
        assert confusion.read_text().splitlines()[0] == "truth\\pred,A,B,C,D"

    def test_mismatched_files_domain_error(self, tmp_path, capsys):
        pred = tmp_path / "p.txt"
        truth = tmp_path / "t.txt"
        pred.write_text("AB\n")
        truth.write_text("AB\nCC\n")
        code, _, err = run(capsys, "eval", "--pred", str(pred), "--truth", str(truth))
        assert code == 1
        assert "error:" in err


class TestStudyEmbedGradCheck:
    def test_length_study_csv(self, tmp_path, capsys):
        out = tmp_path / "study.csv"
        code, stdout, _ = run(
            capsys,
            "length-study", "--lengths", "1", "--samples", "60", "--epochs", "1",
            "--seed", "5", "--work", str(tmp_path / "work"), "--out", str(out),
        )
        assert code == 0
        assert stdout.startswith("L=1 full=")
        lines = out.read_text().splitlines()
        assert lines[0] == "L,ours_full,ours_per_char,reference_percent"
        assert len(lines) == 2

    def test_embed_writes_csv(self, tmp_path, capsys):
        data = tmp_path / "jam"
        # jam noise keeps raw pixel vectors distinct, which sigma search needs
        assert dispatch([
            "generate", "--style", "jam", "--length", "3", "--count", "40",
            "--seed", "3", "--out", str(data),
        ]) == 0
        capsys.readouterr()
        out = tmp_path / "emb.csv"
        code, stdout, _ = run(
            capsys,
            "embed", "--data", str(data), "--split", "train", "--sample", "24",
            "--perplexity", "5", "--iters", "40", "--seed", "4", "--out", str(out),
        )
        assert code == 0
        assert stdout.startswith("n=24 kl=")
        lines = out.read_text().splitlines()
        assert lines[0] == "id,label,y1,y2"
        assert len(lines) == 25

    def test_grad_check_passes(self, capsys):
        code, stdout, _ = run(capsys, "grad-check", "--seed", "3")
        assert code == 0
        assert stdout.startswith("max_rel_err=")
        assert float(stdout.split("=")[1]) < 1e-4


class TestLabelServe:
    def test_busy_port_is_domain_error(self, tmp_path, capsys):
        from captchakit.imageio import DatasetManifest, GrayImage, ManifestRecord, write_manifest, write_pgm

        write_pgm(GrayImage(np.zeros((4, 4), np.uint8)), tmp_path / "a.pgm")
        write_manifest(
            DatasetManifest([ManifestRecord("a.pgm", "", "unlabeled")]),
            tmp_path / MANIFEST_NAME,
        )
        blocker = make_server(str(tmp_path), "01")
        try:
            port = blocker.server_address[1]
            code, _, err = run(
                capsys,
                "label-serve", "--data", str(tmp_path), "--charset", "01",
                "--port", str(port),
            )
            assert code == 1
            assert "error:" in err
        finally:
            blocker.server_close()
