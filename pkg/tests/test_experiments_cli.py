import csv
import math

import numpy as np
import pytest
from click.testing import CliRunner

from synscale import experiments as ex
from synscale import nn
from synscale.cli import _float_list, main
from synscale.exceptions import ParseError

from test_data import write_idx


@pytest.fixture(scope="module")
def fake_mnist(tmp_path_factory):
    # digits drawn as a bright band whose row depends on the label
    d = tmp_path_factory.mktemp("mnist")
    rng = np.random.default_rng(0)
    for split, n in (("train", 400), ("t10k", 120)):
        labels = rng.integers(0, 10, n).astype(np.uint8)
        images = rng.integers(0, 40, size=(n, 28, 28)).astype(np.uint8)
        for i, lab in enumerate(labels):
            images[i, 2 + 2 * lab: 4 + 2 * lab, 4:24] = 250
        write_idx(d / f"{split}-images-idx3-ubyte", images)
        write_idx(d / f"{split}-labels-idx1-ubyte", labels)
    return d


@pytest.fixture(scope="module")
def trained(fake_mnist, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    res = CliRunner().invoke(main, ["train", "--data-dir", str(fake_mnist), "--epochs", "3",
                                    "--lr", "0.01", "--out-dir", str(out)])
    assert res.exit_code == 0, res.output
    return out


SWEEP_ARGS = ["--epsilons", "0:1:0.25", "--modes", "none,analytic,empirical,retrain",
              "--retrain-epochs", "1"]


@pytest.fixture(scope="module")
def swept(fake_mnist, trained):
    res = CliRunner().invoke(main, ["sweep", "--data-dir", str(fake_mnist),
                                    "--out-dir", str(trained), *SWEEP_ARGS])
    assert res.exit_code == 0, res.output
    return trained / "single-layer-sigmoid-seed0-sweep.csv"


def _drop_wall(path):
    with open(path, newline="") as fh:
        return [row[:-1] for row in csv.reader(fh)]


def test_float_list():
    assert _float_list("0:1:0.25") == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert _float_list("1, 0.5,0.25") == (1.0, 0.5, 0.25)
    assert len(_float_list("0:1:0.05")) == 21


def test_train_outputs(trained):
    net = nn.load_network(trained / "single-layer-sigmoid-seed0.npz")
    assert (net.n_in, net.n_out) == (784, 10)
    with open(trained / "single-layer-sigmoid-seed0-train.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == ex.TRAIN_LOG_HEADER and len(rows) == 4


def test_train_env_var(fake_mnist, tmp_path):
    res = CliRunner().invoke(main, ["train", "--epochs", "1", "--out-dir", str(tmp_path)],
                             env={"SYNSCALE_MNIST_DIR": str(fake_mnist)})
    assert res.exit_code == 0, res.output


def test_train_missing_data_dir(tmp_path):
    res = CliRunner().invoke(main, ["train", "--out-dir", str(tmp_path)], env={"SYNSCALE_MNIST_DIR": ""})
    assert res.exit_code != 0


def test_sweep_rows(swept):
    rows = ex.read_sweep(swept)
    assert len(rows) == 5 * 4
    assert [(r.epsilon, r.mode) for r in rows] == sorted((r.epsilon, r.mode) for r in rows)
    for r in rows:
        assert 0 <= r.test_accuracy <= 1 and r.nasp >= 0
    ones = {r.mode: r for r in rows if r.epsilon == 1.0}
    assert abs(ones["none"].nasp - 1) <= 1e-9
    none = [r.nasp for r in rows if r.mode == "none"]
    assert all(a <= b for a, b in zip(none, none[1:]))


def test_sweep_deterministic(fake_mnist, trained, swept, tmp_path):
    again = tmp_path / "again.csv"
    res = CliRunner().invoke(main, ["sweep", "--data-dir", str(fake_mnist), "--out-dir", str(trained),
                                    *SWEEP_ARGS, "--out", str(again)])
    assert res.exit_code == 0, res.output
    assert _drop_wall(again) == _drop_wall(swept)


def test_report_cli(swept, tmp_path):
    out = tmp_path / "report.csv"
    res = CliRunner().invoke(main, ["report", str(swept), "--out", str(out)])
    assert res.exit_code == 0, res.output
    lines = res.output.strip().splitlines()
    assert lines[0] == ",".join(ex.REPORT_HEADER)
    assert len(lines) == 5
    assert out.read_text().splitlines() == lines


def test_report_round_trip(swept):
    rows = ex.read_sweep(swept)
    text = swept.read_text()
    assert ex.parse_sweep_csv(text) == rows
    assert ex.report(ex.parse_sweep_csv(text)) == ex.report(rows)


def _row(eps, mode, acc, nasp):
    return ex.SweepRow(eps, mode, acc, nasp, acc, 0.0)


def test_report_logic():
    rows = [_row(1.0, "none", 0.92, 1.0), _row(0.5, "none", 0.91, 0.6), _row(0.2, "none", 0.80, 0.3),
            _row(1.0, "analytic", 0.92, 1.0), _row(0.2, "analytic", 0.905, 0.25),
            _row(1.0, "retrain", 0.5, 1.0), _row(0.2, "retrain", 0.6, 0.2)]
    rep = {r.mode: r for r in ex.report(rows, margin=0.02)}
    assert rep["none"].baseline_accuracy == 0.92
    assert rep["none"].accuracy_floor == pytest.approx(0.90)
    assert rep["none"].epsilon == 0.5 and rep["none"].power_reduction == pytest.approx(0.4)
    assert rep["analytic"].epsilon == 0.2 and rep["analytic"].power_reduction == pytest.approx(0.75)
    assert math.isnan(rep["retrain"].epsilon)


def test_report_no_baseline():
    with pytest.raises(ValueError):
        ex.report([_row(0.5, "none", 0.9, 0.5)])


@pytest.mark.parametrize("text, line", [
    ("", 1),
    ("a,b\n", 1),
    (",".join(ex.SWEEP_HEADER) + "\n", 2),
    (",".join(ex.SWEEP_HEADER) + "\n1,none,0.9,1,0.9,0.1\n0.5,none,0.8\n", 3),
    (",".join(ex.SWEEP_HEADER) + "\n1,none,abc,1,0.9,0.1\n", 2),
    (",".join(ex.SWEEP_HEADER) + "\n1,none,nan,1,0.9,0.1\n", 2),
])
def test_parse_errors(text, line):
    with pytest.raises(ParseError) as info:
        ex.parse_sweep_csv(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_report_cli_parse_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("nonsense\n")
    res = CliRunner().invoke(main, ["report", str(bad)])
    assert res.exit_code == 1
    assert "line 1" in res.output


def test_tuning_curve_cli(tmp_path):
    out = tmp_path / "tc.csv"
    res = CliRunner().invoke(main, ["tuning-curve", "--activation", "relu", "--out", str(out)])
    assert res.exit_code == 0, res.output
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["theta_deg", "eps_1", "eps_0.5", "eps_0.25"]
    assert len(rows) == 362
    assert max(float(v) for v in (r[1] for r in rows[1:])) == 1.0


def test_tuning_curves_peak_at_zero():
    theta, curves = ex.tuning_curves("sigmoid", [1.0, 0.5])
    for curve in curves.values():
        assert theta[np.argmax(curve)] == 0.0


def test_half_width_half_max():
    theta = np.arange(-180.0, 181.0)
    tri = np.clip(1 - np.abs(theta) / 100, 0, None)
    assert ex.half_width_half_max(theta, tri) == pytest.approx(50.0)
    assert ex.half_width_half_max(theta, np.ones_like(theta)) == 180.0


def test_fig2_cli(tmp_path):
    res = CliRunner().invoke(main, ["fig2", "--n-samples", "10000", "--out-dir", str(tmp_path)])
    assert res.exit_code == 0, res.output
    with open(tmp_path / "fig2.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == ex.FIG2_HEADER and len(rows) == 42
    at_one = [float(v) for v in rows[21][1:]]
    assert rows[21][0] == "1"
    np.testing.assert_allclose(at_one, 0.0, atol=1e-4)


def test_experiment_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ex.ExperimentConfig(tmp_path, architecture="cnn")
    with pytest.raises(ValueError):
        ex.ExperimentConfig(tmp_path, epsilons=(-0.1,))
    cfg = ex.ExperimentConfig(tmp_path, architecture="mlp-1000-relu-sigmoid", seed=3, out_dir=tmp_path)
    assert cfg.sweep_path.name == "mlp-1000-relu-sigmoid-seed3-sweep.csv"
