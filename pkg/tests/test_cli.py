import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from convnorm.cli import _read_shapes, main
from convnorm.io import BatchNormLayer, Conv2dLayer, DenseLayer, save_model
from convnorm.norms import Kernel4D


def conv(name, data, hw, stride=1, padding=0):
    return Conv2dLayer(name, Kernel4D.from_array(np.asarray(data, dtype=float), hw, stride, padding))


@pytest.fixture
def manifest(tmp_path):
    def make(layers):
        path = tmp_path / "model.json"
        save_model(path, layers)
        return str(path)

    return make


def run_json(capsys, argv):
    code = main(argv + ["--format", "json"])
    return code, json.loads(capsys.readouterr().out)


def test_norms_zero_layer(manifest, capsys):
    code, rows = run_json(capsys, ["norms", manifest([conv("z", np.zeros((2, 2, 3, 3)), 6)])])
    assert code == 0
    assert rows[0]["l1"] == rows[0]["linf"] == rows[0]["l2_upper"] == rows[0]["frobenius"] == 0.0


def test_norms_values(manifest, capsys):
    layers = [
        conv("c", np.array([3.0, -4.0]).reshape(2, 1, 1, 1), 3),
        DenseLayer("fc", np.array([[1.0, -2.0], [3.0, -4.0]])),
        BatchNormLayer("bn", np.array([-3.0, 1.0]), np.array([1.0, 2.0])),
    ]
    code, rows = run_json(capsys, ["norms", manifest(layers)])
    assert code == 0
    assert (rows[0]["l1"], rows[0]["linf"], rows[0]["assumption1"]) == (7.0, 4.0, True)
    assert (rows[1]["l1"], rows[1]["linf"], rows[1]["kind"]) == (6.0, 7.0, "dense")
    assert rows[2]["l1"] == rows[2]["linf"] == 3.0


def test_norms_assumption_violation(manifest, capsys):
    path = manifest([conv("ok", np.ones((1, 1, 3, 3)), 5), conv("bad", np.ones((1, 1, 5, 5)), 5)])
    code, rows = run_json(capsys, ["norms", path])
    assert code == 2
    assert rows[0]["assumption1"] is True
    bad = rows[1]
    assert bad["assumption1"] is False and bad["source"] == "oracle"
    # a 5x5 kernel over a 5x5 input gives a single output pixel
    assert bad["l1"] == 1.0 and bad["linf"] == 25.0


def test_norms_formats_are_deterministic(manifest, capsys, rng):
    path = manifest([conv("c", rng.standard_normal((3, 2, 3, 3)), 7, 2, 1), DenseLayer("fc", rng.standard_normal((3, 4)))])
    outputs = {}
    for fmt in ("table", "json", "csv"):
        runs = []
        for _ in range(2):
            assert main(["norms", path, "--format", fmt]) == 0
            runs.append(capsys.readouterr().out)
        assert runs[0] == runs[1]
        outputs[fmt] = runs[0]
    header = next(csv.reader(outputs["csv"].splitlines()))
    assert header == ["layer", "kind", "l1", "linf", "l2_upper", "frobenius", "assumption1", "source"]
    assert outputs["table"].splitlines()[0].split() == header


def test_norms_missing_manifest(tmp_path, capsys):
    assert main(["norms", str(tmp_path / "nope.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_verify_passes(capsys):
    assert main(["verify", "--trials", "20", "--seed", "42"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_verify_zero_trials(capsys):
    assert main(["verify", "--trials", "0"]) == 0
    captured = capsys.readouterr()
    assert "PASS" in captured.out and "warning" in captured.err


@pytest.mark.parametrize("which", ["l1", "linf"])
def test_verify_catches_corrupted_formula(capsys, which):
    assert main(["verify", "--trials", "5", "--inject-fault", which]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "geometry=ConvGeometry(" in out and f"check={which}" in out


def test_bench_custom_shape(tmp_path, capsys):
    shapes = tmp_path / "shapes.txt"
    shapes.write_text("# k1 k2 d_in d_out\n1 1 1 1\n")
    code = main(["bench", "--shapes", str(shapes), "--runs", "1", "--slow-runs", "1", "--input", "4", "4", "--format", "json"])
    assert code == 0
    (row,) = json.loads(capsys.readouterr().out)
    assert row["shape"] == "1x1x1x1"
    assert row["l1_median"] >= 0 and row["oracle_median"] is not None and row["power_iter_median"] is not None


def test_bench_rejects_bad_shape_file(tmp_path, capsys):
    shapes = tmp_path / "shapes.txt"
    shapes.write_text("3 3 3\n")
    assert main(["bench", "--shapes", str(shapes)]) == 1


def test_decay_demo(manifest, tmp_path, capsys, rng):
    path = manifest([
        conv("c1", rng.standard_normal((2, 2, 3, 3)) * 0.3, 6, 1, 1),
        BatchNormLayer("bn", np.ones(2), np.ones(2)),
        DenseLayer("fc", rng.standard_normal((2, 3)) * 0.3),
    ])
    out = tmp_path / "trace.csv"
    argv = ["decay-demo", path, "--norm", "linf", "--steps", "10", "--out", str(out)]
    assert main(argv) == 0
    printed = capsys.readouterr().out
    assert "c1: linf norm" in printed and "fc: linf norm" in printed and "bn" not in printed
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["step", "layer", "norm"]
    assert len(rows) == 1 + 11 * 2
    first = out.read_bytes()
    assert main(argv) == 0
    assert out.read_bytes() == first


def test_decay_demo_assumption_failure(manifest, capsys):
    path = manifest([conv("bad", np.ones((1, 1, 5, 5)), 5)])
    assert main(["decay-demo", path, "--steps", "2"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "convnorm", "verify", "--trials", "2"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout


def test_bench_shape_set_alias():
    assert _read_shapes("table1") == _read_shapes("standard")
    assert len(_read_shapes("standard")) == 6
