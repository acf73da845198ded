"""Command line entry point: ``synscale {train,sweep,tuning-curve,fig2,report}``."""
from __future__ import annotations

import math
from pathlib import Path

import click

from . import experiments as ex
from .data import DATA_DIR_ENV


def _float_list(text: str) -> tuple[float, ...]:
    """Parse ``"1,0.5,0.25"`` or a ``start:stop:step`` range (inclusive)."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(n))
    return tuple(float(v) for v in text.split(",") if v.strip())


class FloatList(click.ParamType):
    name = "floats"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            return _float_list(value)
        except ValueError:
            self.fail(f"{value!r} is not a comma list or start:stop:step range", param, ctx)


FLOATS = FloatList()

data_dir_option = click.option(
    "--data-dir", type=click.Path(exists=True, file_okay=False, path_type=Path),
    envvar=DATA_DIR_ENV, required=True,
    help=f"Directory with the four MNIST IDX files (or set {DATA_DIR_ENV}).")
arch_option = click.option(
    "--arch", "architecture", type=click.Choice(sorted(ex.ARCHITECTURES)),
    default="single-layer-sigmoid", show_default=True)
seed_option = click.option("--seed", type=int, default=0, show_default=True)
out_dir_option = click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path),
                              default=Path("results"), show_default=True)


@click.group()
def main():
    """Weight scaling with bias compensation for low-power crossbar inference."""


@main.command()
@data_dir_option
@arch_option
@click.option("--epochs", type=int, default=25, show_default=True)
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@seed_option
@out_dir_option
@click.option("-v", "--verbose", is_flag=True)
def train(data_dir, architecture, epochs, batch_size, lr, seed, out_dir, verbose):
    """Train a network and write the model file plus a per-epoch log."""
    cfg = ex.ExperimentConfig(data_dir, architecture, epochs=epochs, seed=seed, out_dir=out_dir,
                              batch_size=batch_size, learning_rate=lr)
    res = ex.run_train(cfg, verbose=verbose)
    click.echo(f"model: {res.model_path}")
    click.echo(f"log: {res.log_path}")
    click.echo(f"test accuracy: {res.test_accuracy:.4f} ({res.seconds:.1f}s)")


@main.command()
@data_dir_option
@arch_option
@click.option("--model", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Model file; defaults to the one `train` writes for --arch/--seed.")
@click.option("--epsilons", type=FLOATS, default="0:1:0.05", show_default=True)
@click.option("--modes", default=",".join(ex.DEFAULT_MODES), show_default=True,
              help="Comma list from none, analytic, empirical, retrain.")
@click.option("--retrain-epochs", type=int, default=10, show_default=True)
@seed_option
@out_dir_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path))
def sweep(data_dir, architecture, model, epsilons, modes, retrain_epochs, seed, out_dir, out):
    """Evaluate accuracy and NASP over an epsilon grid for each bias mode."""
    cfg = ex.ExperimentConfig(data_dir, architecture, epsilons=epsilons,
                              modes=tuple(m.strip() for m in modes.split(",") if m.strip()),
                              seed=seed, out_dir=out_dir, retrain_epochs=retrain_epochs)

    def progress(row):
        click.echo(f"eps={row.epsilon:.2f} {row.mode:<9} acc={row.test_accuracy:.4f} "
                   f"nasp={row.nasp:.4f} ({row.wall_seconds:.1f}s)", err=True)

    path = ex.run_sweep(cfg, model_path=model, out_path=out, progress=progress)
    click.echo(str(path))


@main.command("tuning-curve")
@click.option("--activation", type=click.Choice(["relu", "sigmoid"]), required=True)
@click.option("--epsilons", type=FLOATS, default="1,0.5,0.25", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def tuning_curve(activation, epsilons, out):
    """Normalized neuron output vs. input/weight angle for several epsilons."""
    theta, curves = ex.tuning_curves(activation, epsilons)
    ex.write_tuning_curves(out, theta, curves)
    for eps, curve in curves.items():
        click.echo(f"eps={eps:g} hwhm={ex.half_width_half_max(theta, curve):.1f} deg")
    click.echo(str(out))


@main.command()
@click.option("--n-samples", type=int, default=200_000, show_default=True)
@seed_option
@out_dir_option
def fig2(n_samples, seed, out_dir):
    """Brute-force vs. closed-form optimal bias adjustment for one neuron."""
    rows = ex.fig2_rows(n_samples=n_samples, seed=seed)
    path = ex.write_csv(Path(out_dir) / "fig2.csv", ex.FIG2_HEADER, rows)
    click.echo(str(path))


@main.command()
@click.argument("sweep_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--margin", type=float, default=ex.ISO_ACCURACY_MARGIN, show_default=True,
              help="Allowed accuracy drop from the eps=1 baseline.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path))
def report(sweep_csv, margin, out):
    """Power reduction at iso-accuracy for each bias mode of a sweep."""
    try:
        rows = ex.report(ex.read_sweep(sweep_csv), margin)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(",".join(ex.REPORT_HEADER))
    for r in rows:
        click.echo(",".join(ex.format_value(v) for v in (r.mode, r.baseline_accuracy, r.accuracy_floor,
                                                r.epsilon, r.test_accuracy, r.nasp,
                                                r.power_reduction)))
    if out is not None:
        ex.write_report(out, rows)


if __name__ == "__main__":
    main()
