import numpy as np
import pytest
from PIL import Image

from decam.cli import main, resolve_scorer
from decam.scorer import BridgeScorer, DiscOracle, TwoBlobOracle
from decam.smio import read_sm_raw, write_sm_raw

import reference


@pytest.fixture
def gray_png(tmp_path):
    path = tmp_path / "input.png"
    Image.fromarray(np.full((24, 24), 128, dtype=np.uint8), "L").save(path)
    return path


@pytest.fixture
def rgb_png(tmp_path):
    rng = np.random.default_rng(0)
    arr = (rng.random((24, 24, 3)) * 255).astype(np.uint8)
    path = tmp_path / "rgb.png"
    Image.fromarray(arr, "RGB").save(path)
    return path


def explain_args(image, out_dir, **overrides):
    args = {
        "--scorer": "disc:12,12,6",
        "--class": "0",
        "--alpha": "1.0",
        "--pop": "24",
        "--max-iter": "15",
        "--seed": "7",
        "--batch-size": "24",
    }
    args.update({k: str(v) for k, v in overrides.items()})
    argv = ["explain", "--image", str(image), "--out-dir", str(out_dir)]
    for key, value in args.items():
        argv += [key, value]
    return argv


class TestResolveScorer:
    def test_disc_spec(self, gray_png):
        image = np.full((24, 24, 1), 0.5)
        scorer = resolve_scorer("disc:12,12,6", image)
        assert isinstance(scorer, DiscOracle)

    def test_twoblob_spec(self):
        image = np.full((24, 24, 1), 0.5)
        scorer = resolve_scorer("twoblob:7,7,4,17,17,4", image)
        assert isinstance(scorer, TwoBlobOracle)

    def test_unknown_spec_rejected(self):
        with pytest.raises(ValueError):
            resolve_scorer("magic:1,2,3", np.full((24, 24, 1), 0.5))

    def test_env_bridge(self, monkeypatch):
        import sys
        from pathlib import Path

        echo = Path(__file__).resolve().parent / "echo_bridge.py"
        monkeypatch.setenv("DECAM_BRIDGE_CMD", f"{sys.executable} {echo}")
        scorer = resolve_scorer(None, None)
        assert isinstance(scorer, BridgeScorer)
        scorer.close()


class TestExplain:
    def test_writes_all_artifacts(self, gray_png, tmp_path):
        out = tmp_path / "out"
        assert main(explain_args(gray_png, out)) == 0
        for name in ("saliency.png", "saliency.raw", "overlay.png", "manifest.txt"):
            assert (out / name).exists()
        manifest = (out / "manifest.txt").read_text()
        assert "seed=7" in manifest and "scorer=disc:12,12,6" in manifest

    def test_same_seed_byte_identical_raw(self, gray_png, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(explain_args(gray_png, out_a)) == 0
        assert main(explain_args(gray_png, out_b)) == 0
        assert (out_a / "saliency.raw").read_bytes() == (out_b / "saliency.raw").read_bytes()
        assert (out_a / "saliency.png").read_bytes() == (out_b / "saliency.png").read_bytes()

    def test_png_matches_quantized_raw(self, gray_png, tmp_path):
        out = tmp_path / "out"
        assert main(explain_args(gray_png, out)) == 0
        raw = read_sm_raw(out / "saliency.raw")
        png = np.asarray(Image.open(out / "saliency.png"), dtype=np.float64)
        assert np.array_equal(png, np.round(raw * 255.0))

    def test_disc_mass_concentrates(self, gray_png, tmp_path):
        out = tmp_path / "out"
        argv = explain_args(
            gray_png, out, **{"--pop": 100, "--max-iter": 120, "--seed": 7}
        )
        assert main(argv) == 0
        sm = read_sm_raw(out / "saliency.raw")
        disc = reference.lattice_disc(24, 24, 12, 12, 6).astype(bool)
        assert sm[disc].sum() / sm.sum() >= 0.6

    def test_unreadable_image_is_usage_error(self, tmp_path):
        argv = explain_args(tmp_path / "missing.png", tmp_path / "out")
        assert main(argv) == 1

    def test_bad_scorer_spec_is_usage_error(self, gray_png, tmp_path):
        argv = explain_args(gray_png, tmp_path / "out", **{"--scorer": "nope:1"})
        assert main(argv) == 1

    def test_dead_bridge_is_scorer_failure(self, gray_png, tmp_path):
        argv = explain_args(
            gray_png, tmp_path / "out", **{"--scorer": "bridge:/nonexistent/prog"}
        )
        assert main(argv) == 2

    def test_degenerate_saliency_exit_code(self, gray_png, tmp_path, monkeypatch):
        from decam import cli
        from decam.errors import DegenerateSaliencyError

        def boom(*args, **kwargs):
            raise DegenerateSaliencyError("all candidate masks are empty")

        monkeypatch.setattr(cli, "aggregate", boom)
        argv = explain_args(gray_png, tmp_path / "out", **{"--max-iter": 1, "--pop": 6})
        assert main(argv) == 3

    def test_alpha_warning_for_bridge(self, gray_png, tmp_path, capsys):
        import sys
        from pathlib import Path

        echo = Path(__file__).resolve().parent / "echo_bridge.py"
        argv = [
            "explain",
            "--image", str(gray_png),
            "--out-dir", str(tmp_path / "out"),
            "--scorer", f"bridge:{sys.executable} {echo} --channels 1",
            "--class", "0",
            "--pop", "8",
            "--max-iter", "2",
            "--seed", "1",
        ]
        assert main(argv) == 0
        err = capsys.readouterr().err
        assert "alpha" in err and "logit scale" in err


class TestEvaluate:
    @pytest.fixture
    def sm_file(self, tmp_path):
        path = tmp_path / "gt.raw"
        write_sm_raw(path, reference.lattice_disc(24, 24, 12, 12, 6).astype(np.float64))
        return path

    def eval_args(self, sm, image, out, **overrides):
        argv = [
            "evaluate",
            "--sm", str(sm),
            "--image", str(image),
            "--scorer", "disc:12,12,6",
            "--class", "0",
            "--steps", "20",
            "--out-dir", str(out),
        ]
        for key, value in overrides.items():
            argv += [key, str(value)]
        return argv

    def test_reports_positive_diffauc_for_ground_truth(self, gray_png, sm_file, tmp_path, capsys):
        out = tmp_path / "ev"
        assert main(self.eval_args(sm_file, gray_png, out)) == 0
        txt = (out / "report.txt").read_text()
        diff = float(dict(line.split("=") for line in txt.strip().splitlines())["diff_auc"])
        assert diff > 0
        assert "diff_auc=" in capsys.readouterr().out

    def test_steps_two_gives_three_rows(self, gray_png, sm_file, tmp_path):
        out = tmp_path / "ev2"
        assert main(self.eval_args(sm_file, gray_png, out, **{"--steps": 2})) == 0
        rows = (out / "deletion.csv").read_text().strip().splitlines()
        assert rows[0] == "x,y"
        assert [float(r.split(",")[0]) for r in rows[1:]] == [0.0, 0.5, 1.0]

    def test_constant_sm_completes(self, gray_png, tmp_path):
        sm = tmp_path / "const.raw"
        write_sm_raw(sm, np.full((24, 24), 0.25))
        out = tmp_path / "ev3"
        assert main(self.eval_args(sm, gray_png, out)) == 0

    def test_bad_magic_is_usage_error(self, gray_png, tmp_path):
        bad = tmp_path / "bad.raw"
        bad.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
        assert main(self.eval_args(bad, gray_png, tmp_path / "ev4")) == 1

    def test_size_mismatch_is_usage_error(self, gray_png, tmp_path):
        bad = tmp_path / "short.raw"
        import struct

        bad.write_bytes(b"DECAMSM1" + struct.pack("<II", 24, 24) + b"\x00" * 100)
        assert main(self.eval_args(bad, gray_png, tmp_path / "ev5")) == 1

    def test_wrong_shape_sm_rejected(self, gray_png, tmp_path):
        sm = tmp_path / "wrong.raw"
        write_sm_raw(sm, np.full((32, 32), 0.5))
        assert main(self.eval_args(sm, gray_png, tmp_path / "ev6")) == 1


class TestEvaluateExplainPipeline:
    def test_end_to_end(self, gray_png, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(explain_args(gray_png, out, **{"--pop": 60, "--max-iter": 60})) == 0
        argv = [
            "evaluate",
            "--sm", str(out / "saliency.raw"),
            "--image", str(gray_png),
            "--scorer", "disc:12,12,6",
            "--class", "0",
            "--steps", "25",
            "--out-dir", str(out),
        ]
        assert main(argv) == 0
        txt = (out / "report.txt").read_text()
        diff = float(dict(line.split("=") for line in txt.strip().splitlines())["diff_auc"])
        assert np.isfinite(diff)
        assert diff > 0


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") >= 4
    assert "FAIL" not in out


def test_selftest_with_bridge(capsys):
    import sys
    from pathlib import Path

    echo = Path(__file__).resolve().parent / "echo_bridge.py"
    assert main(["selftest", "--scorer", f"bridge:{sys.executable} {echo}"]) == 0
    out = capsys.readouterr().out
    assert "PASS bridge-consistency" in out
