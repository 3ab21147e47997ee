import csv
import io

import numpy as np
import pytest
from PIL import Image

from wavelight import model, trainer
from wavelight.cli import main

FAST = [
    "--set", "width_scale=0.125", "--set", "synth_size=32",
    "--set", "blur_kernel=9", "--set", "blur_sigma=2",
]


def write_checkpoint(tmp_path, width_scale=0.25, levels=3):
    cfg = model.ModelConfig.default(levels=levels, width_scale=width_scale)
    params = model.build(cfg, seed=0)
    path = tmp_path / "ck.wdrn"
    trainer.save_checkpoint(trainer.Checkpoint.from_params(params), path)
    return path


def write_pngs(directory, sizes, seed=0):
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    names = []
    for i, size in enumerate(sizes):
        arr = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        name = f"img{i}.png"
        Image.fromarray(arr, "RGB").save(directory / name)
        names.append(name)
    return names


class TestTrainCommand:
    def test_synthetic_run_writes_artifacts(self, tmp_path):
        out = tmp_path / "run1"
        rc = main(["train", "--synthetic", "8", "--out", str(out),
                   "--set", "epochs=1", "--set", "batch_size=6", *FAST])
        assert rc == 0
        for artifact in ("checkpoint.wdrn", "log.csv", "summary.txt", "split.tsv"):
            assert (out / artifact).exists(), artifact
        assert "total" in (out / "summary.txt").read_text()

    def test_epochs_zero_degenerate_run(self, tmp_path):
        cfile = tmp_path / "c.cfg"
        cfile.write_text("epochs = 0\nwidth_scale = 0.125\nsynth_size = 32\n")
        out = tmp_path / "run0"
        rc = main(["train", "--config", str(cfile), "--synthetic", "4", "--out", str(out)])
        assert rc == 0
        lines = (out / "log.csv").read_text().splitlines()
        assert len(lines) == 1 and lines[0].startswith("epoch,")
        assert (out / "checkpoint.wdrn").exists()
        assert (out / "summary.txt").exists()

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfile = tmp_path / "c.cfg"
        cfile.write_text("epoxhs = 3\n")
        rc = main(["train", "--config", str(cfile), "--synthetic", "4", "--out", str(tmp_path / "x")])
        assert rc == 2

    def test_unknown_set_key_exits_2(self, tmp_path):
        rc = main(["train", "--synthetic", "4", "--out", str(tmp_path / "x"),
                   "--set", "noxsuch=1"])
        assert rc == 2

    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as e:
            main(["train", "--out", "somewhere"])  # neither --data nor --synthetic
        assert e.value.code == 2


class TestInferCommand:
    def test_identity_checkpoint_reproduces_bytes(self, tmp_path):
        ck = write_checkpoint(tmp_path)
        names = write_pngs(tmp_path / "in", [64, 32])
        rc = main(["infer", "--checkpoint", str(ck), "--input", str(tmp_path / "in"),
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        for name in names:
            assert (tmp_path / "out" / name).read_bytes() == (tmp_path / "in" / name).read_bytes()

    def test_empty_input_warns_and_exits_zero(self, tmp_path, capsys):
        ck = write_checkpoint(tmp_path)
        (tmp_path / "in").mkdir()
        rc = main(["infer", "--checkpoint", str(ck), "--input", str(tmp_path / "in"),
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        assert "warning" in capsys.readouterr().err

    def test_indivisible_file_fails_others_processed(self, tmp_path, capsys):
        ck = write_checkpoint(tmp_path)
        write_pngs(tmp_path / "in", [64, 24])  # 24 not divisible by 16
        rc = main(["infer", "--checkpoint", str(ck), "--input", str(tmp_path / "in"),
                   "--out", str(tmp_path / "out")])
        assert rc == 1
        assert (tmp_path / "out" / "img0.png").exists()
        assert not (tmp_path / "out" / "img1.png").exists()
        assert "divisible" in capsys.readouterr().err


class TestEvalCommand:
    def test_identical_directories(self, tmp_path, capsys):
        write_pngs(tmp_path / "gt", [32, 32])
        write_pngs(tmp_path / "pred", [32, 32])  # same seed: identical images
        rc = main(["eval", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt")])
        assert rc == 0
        rows = [r for r in csv.reader(io.StringIO(capsys.readouterr().out)) if r and not r[0].startswith("#")]
        header, first = rows[0], rows[1]
        assert header == ["name", "psnr_db", "ssim", "lpips", "mps"]
        assert first[1] == "inf" and float(first[2]) == 1.0

    def test_lpips_column_yields_mps(self, tmp_path, capsys):
        write_pngs(tmp_path / "gt", [32])
        write_pngs(tmp_path / "pred", [32])
        (tmp_path / "l.csv").write_text("name,lpips\nimg0,0.3405\n")
        rc = main(["eval", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                   "--lpips", str(tmp_path / "l.csv")])
        assert rc == 0
        rows = [r for r in csv.reader(io.StringIO(capsys.readouterr().out)) if r and not r[0].startswith("#")]
        # identical images: S = 1, so MPS = 0.5 * (1 + 1 - L)
        assert float(rows[1][4]) == pytest.approx(0.5 * (1 + 1 - 0.3405), abs=1e-6)

    def test_missing_ground_truth_row_and_nonzero_exit(self, tmp_path, capsys):
        write_pngs(tmp_path / "pred", [32, 32])
        write_pngs(tmp_path / "gt", [32])
        rc = main(["eval", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt")])
        captured = capsys.readouterr()
        assert rc == 1
        assert "img1" in captured.err
        assert "img1" in captured.out  # error row still present


class TestAblateCommand:
    def test_domain_emits_two_rows(self, tmp_path):
        rc = main(["ablate", "--which", "domain", "--synthetic", "4", "--steps", "2",
                   "--out", str(tmp_path)])
        assert rc == 0
        rows = (tmp_path / "ablation.csv").read_text().splitlines()
        assert rows[0] == "variant,psnr,ssim"
        assert [r.split(",")[0] for r in rows[1:]] == ["wavelet", "strided"]

    def test_levels_emits_three_rows(self, tmp_path):
        rc = main(["ablate", "--which", "levels", "--synthetic", "4", "--steps", "2",
                   "--out", str(tmp_path)])
        assert rc == 0
        rows = (tmp_path / "ablation.csv").read_text().splitlines()
        assert [r.split(",")[0] for r in rows[1:]] == ["2_level", "3_level", "4_level"]
        for label in ("2_level", "3_level", "4_level"):
            assert (tmp_path / f"log_{label}.csv").exists()

    def test_identical_seeds_identical_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            rc = main(["ablate", "--which", "domain", "--synthetic", "4", "--steps", "2",
                       "--seed", "3", "--out", str(out)])
            assert rc == 0
        assert (a / "ablation.csv").read_bytes() == (b / "ablation.csv").read_bytes()


class TestGradcheckCommand:
    def test_corrupted_backward_detected(self, capsys):
        rc = main(["gradcheck", "--corrupt", "relu"])
        assert rc == 1
        out = capsys.readouterr().out
        assert "FAIL" in out
        # one row per checked operation
        assert "conv2d" in out and "ssim_loss" in out and "model_e2e" in out
