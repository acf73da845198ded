"""Experiment drivers behind the command line: training, epsilon sweeps,
tuning curves, the single-neuron bias comparison and the summary report.

All outputs are plain CSV (UTF-8, header row, '.' decimals).
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import nn
from .data import Batch, load_split
from .estimators import DenseNetClassifier
from .exceptions import ParseError
from .nn import Activation, activation_apply
from .numerics import GaussianParams
from .oracle import FIG2_BIAS, FIG2_PARAMS, OracleConfig, numeric_optimal_delta_b
from .power import nasp
from .scaling import (
    BiasMode,
    NeuronStats,
    ScalingPolicy,
    analytic_delta_b,
    apply_policy,
    collect_stats,
)

ARCHITECTURES = {
    "single-layer-sigmoid": ((), "relu"),
    "mlp-1000-relu-sigmoid": ((1000,), "relu"),
}
DEFAULT_EPSILONS = tuple(round(0.05 * i, 2) for i in range(21))
FIG2_EPSILONS = tuple(round(0.05 * i, 2) for i in range(41))
DEFAULT_MODES = ("none", "analytic", "retrain")
SWEEP_HEADER = ("epsilon", "mode", "test_accuracy", "nasp", "train_accuracy", "wall_seconds")
TRAIN_LOG_HEADER = ("epoch", "train_loss", "train_accuracy", "test_accuracy", "seconds")
ISO_ACCURACY_MARGIN = 0.02


@dataclass
class ExperimentConfig:
    data_dir: Path
    architecture: str = "single-layer-sigmoid"
    epochs: int = 25
    epsilons: tuple = DEFAULT_EPSILONS
    modes: tuple = DEFAULT_MODES
    seed: int = 0
    out_dir: Path = Path("results")
    retrain_epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}; "
                             f"choose from {sorted(ARCHITECTURES)}")
        if any(e < 0 for e in self.epsilons):
            raise ValueError("epsilon grid values must be non-negative")
        self.modes = tuple(BiasMode(m).value for m in self.modes)
        self.data_dir = Path(self.data_dir)
        self.out_dir = Path(self.out_dir)

    @property
    def model_path(self) -> Path:
        return self.out_dir / f"{self.architecture}-seed{self.seed}.npz"

    @property
    def train_log_path(self) -> Path:
        return self.out_dir / f"{self.architecture}-seed{self.seed}-train.csv"

    @property
    def sweep_path(self) -> Path:
        return self.out_dir / f"{self.architecture}-seed{self.seed}-sweep.csv"


@dataclass
class SweepRow:
    epsilon: float
    mode: str
    test_accuracy: float
    nasp: float
    train_accuracy: float
    wall_seconds: float


@dataclass
class TrainResult:
    model_path: Path
    log_path: Path
    test_accuracy: float
    seconds: float
    history: list = field(default_factory=list)


def format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.12g}"


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


def run_train(config: ExperimentConfig, verbose: bool = False) -> TrainResult:
    """Train the configured architecture and save the model and per-epoch log."""
    train = load_split(config.data_dir, "train")
    test = load_split(config.data_dir, "test")
    hidden, hidden_act = ARCHITECTURES[config.architecture]
    clf = DenseNetClassifier(hidden_layer_sizes=hidden, hidden_activation=hidden_act,
                             output_activation="sigmoid", epochs=config.epochs,
                             batch_size=config.batch_size, learning_rate=config.learning_rate,
                             random_state=config.seed, verbose=verbose)
    start = time.perf_counter()
    clf.fit(train.inputs, train.labels, eval_set=(test.inputs, test.labels))
    seconds = time.perf_counter() - start
    config.out_dir.mkdir(parents=True, exist_ok=True)
    nn.save_network(clf.network_, config.model_path)
    rows = [(log.epoch, log.train_loss, log.train_accuracy, log.extra["eval_accuracy"], log.seconds)
            for log in clf.history_]
    write_csv(config.train_log_path, TRAIN_LOG_HEADER, rows)
    test_acc = nn.accuracy(clf.network_, test.inputs, test.targets)
    return TrainResult(config.model_path, config.train_log_path, test_acc, seconds, clf.history_)


def sweep_network(net: nn.Network, train: Batch, test: Batch, epsilons, modes,
                  retrain_epochs: int = 10, seed: int = 0, progress=None) -> list[SweepRow]:
    """Evaluate every (epsilon, mode) pair; rows come back sorted by epsilon then mode."""
    stats = collect_stats(net, train.inputs)
    rows = []
    for eps in sorted(set(float(e) for e in epsilons)):
        for mode in sorted(set(BiasMode(m).value for m in modes)):
            start = time.perf_counter()
            policy = ScalingPolicy(eps, mode)
            scaled = apply_policy(net, policy, stats, train.inputs, train.targets,
                                  retrain_epochs=retrain_epochs, seed=seed)
            row = SweepRow(
                epsilon=eps,
                mode=mode,
                test_accuracy=nn.accuracy(scaled, test.inputs, test.targets),
                nasp=nasp(net, eps, policy.delta_b, test.inputs).nasp,
                train_accuracy=nn.accuracy(scaled, train.inputs, train.targets),
                wall_seconds=time.perf_counter() - start,
            )
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


def write_sweep(path, rows) -> Path:
    return write_csv(path, SWEEP_HEADER, [
        (r.epsilon, r.mode, r.test_accuracy, r.nasp, r.train_accuracy, f"{r.wall_seconds:.3f}")
        for r in rows
    ])


def run_sweep(config: ExperimentConfig, model_path=None, out_path=None, progress=None) -> Path:
    net = nn.load_network(model_path or config.model_path)
    train = load_split(config.data_dir, "train")
    test = load_split(config.data_dir, "test")
    rows = sweep_network(net, train, test, config.epsilons, config.modes,
                         config.retrain_epochs, config.seed, progress)
    return write_sweep(out_path or config.sweep_path, rows)


def parse_sweep_csv(text: str) -> list[SweepRow]:
    """Parse sweep CSV text, reporting the 1-based line of any malformed row."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty sweep file", line=1) from None
    if tuple(h.strip() for h in header) != SWEEP_HEADER:
        raise ParseError(f"expected header {','.join(SWEEP_HEADER)}", line=1)
    rows = []
    for line_no, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(SWEEP_HEADER):
            raise ParseError(f"expected {len(SWEEP_HEADER)} fields, got {len(rec)}", line=line_no)
        try:
            row = SweepRow(float(rec[0]), rec[1].strip(), float(rec[2]), float(rec[3]),
                           float(rec[4]), float(rec[5]))
        except ValueError as exc:
            raise ParseError(str(exc), line=line_no) from None
        if not all(math.isfinite(v) for v in (row.epsilon, row.test_accuracy, row.nasp)):
            raise ParseError("non-finite value", line=line_no)
        rows.append(row)
    if not rows:
        raise ParseError("sweep file has a header but no rows", line=2)
    return rows


def read_sweep(path) -> list[SweepRow]:
    return parse_sweep_csv(Path(path).read_text(encoding="utf-8"))


@dataclass
class ReportRow:
    mode: str
    baseline_accuracy: float
    accuracy_floor: float
    epsilon: float
    test_accuracy: float
    nasp: float
    power_reduction: float


REPORT_HEADER = tuple(f.name for f in fields(ReportRow))


def baseline_accuracy(rows) -> float:
    """Accuracy of the unscaled network: the eps=1 row without adjustment."""
    at_one = [r for r in rows if abs(r.epsilon - 1.0) < 1e-9]
    plain = [r for r in at_one if r.mode == BiasMode.NONE.value]
    if plain:
        return plain[0].test_accuracy
    if not at_one:
        raise ValueError("sweep has no epsilon=1 rows to take a baseline from")
    return max(r.test_accuracy for r in at_one)


def report(rows, margin: float = ISO_ACCURACY_MARGIN) -> list[ReportRow]:
    """Per mode, power saved at the smallest epsilon still within ``margin`` of baseline."""
    base = baseline_accuracy(rows)
    floor = base - margin
    out = []
    for mode in sorted({r.mode for r in rows}):
        ok = [r for r in rows if r.mode == mode and r.test_accuracy >= floor - 1e-12]
        if ok:
            best = min(ok, key=lambda r: r.epsilon)
            out.append(ReportRow(mode, base, floor, best.epsilon, best.test_accuracy,
                                 best.nasp, 1.0 - best.nasp))
        else:
            nan = float("nan")
            out.append(ReportRow(mode, base, floor, nan, nan, nan, nan))
    return out


def write_report(path, rows) -> Path:
    return write_csv(path, REPORT_HEADER, [tuple(asdict(r).values()) for r in rows])


def tuning_curves(activation, epsilons, step_deg: float = 1.0):
    """Normalized output vs. angle between unit input and weight vectors.

    Bias is 0 and the adjustment comes from the table with mu=0, sigma=1.
    Returns ``(theta_deg, {epsilon: curve})``.
    """
    kind = Activation(activation)
    if kind not in (Activation.RELU, Activation.SIGMOID):
        raise ValueError("tuning curves are defined for relu and sigmoid")
    theta = np.arange(-180.0, 180.0 + step_deg / 2, step_deg)
    cos = np.cos(np.deg2rad(theta))
    stats = NeuronStats(0.0, 1.0)
    curves = {}
    for eps in epsilons:
        db = analytic_delta_b(kind, stats, 0.0, eps)
        x = activation_apply(kind, eps * cos + db)
        peak = x.max()
        curves[float(eps)] = x / peak if peak > 0 else x
    return theta, curves


def half_width_half_max(theta_deg, curve) -> float:
    """Half-width in degrees of the region around the peak where curve >= max/2.

    Interpolates linearly between samples; returns 180 when the curve stays
    above half its maximum over the whole circle.
    """
    theta = np.asarray(theta_deg, dtype=float)
    y = np.asarray(curve, dtype=float)
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    j = i
    while j + 1 < len(y) and y[j + 1] >= half:
        j += 1
    if j + 1 == len(y):
        return 180.0
    # linear interpolation between samples j and j+1
    t = (y[j] - half) / (y[j] - y[j + 1])
    return float(theta[j] + t * (theta[j + 1] - theta[j]) - theta[i])


def write_tuning_curves(path, theta, curves) -> Path:
    keys = list(curves)
    header = ("theta_deg", *[f"eps_{format_value(k)}" for k in keys])
    rows = [(t, *[curves[k][n] for k in keys]) for n, t in enumerate(theta)]
    return write_csv(path, header, rows)


FIG2_HEADER = ("epsilon", "relu_numeric", "relu_analytic", "sigmoid_numeric", "sigmoid_analytic")


def fig2_rows(epsilons=FIG2_EPSILONS, params: GaussianParams = FIG2_PARAMS,
              bias: float = FIG2_BIAS, n_samples: int = 200_000, seed: int = 0):
    """(epsilon, numeric, analytic) pairs for a ReLU and a sigmoid neuron."""
    stats = NeuronStats(params.mu, params.sigma)
    cfgs = {kind: OracleConfig(params, bias, kind, n_samples, seed)
            for kind in (Activation.RELU, Activation.SIGMOID)}
    rows = []
    for eps in epsilons:
        row = [float(eps)]
        for kind, cfg in cfgs.items():
            row.append(numeric_optimal_delta_b(cfg, eps))
            row.append(analytic_delta_b(kind, stats, bias, eps))
        rows.append(tuple(row))
    return rows
