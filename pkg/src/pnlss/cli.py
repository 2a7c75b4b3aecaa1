"""Command-line front end for the identification pipeline.

Every stage of the workflow (excitation design, nonparametric FRF
estimation, subspace initialization, nonlinear optimization, validation)
is exposed as a subcommand operating on stable on-disk formats, so runs
can be scripted, inspected, and replayed. ``case-study`` chains the whole
pipeline on the built-in oscillator benchmark and records a manifest that
reproduces the run byte for byte.

Exit codes: 0 success, 2 bad configuration or usage, 3 numerical failure
(divergence, singularity), 4 I/O or file-format trouble.
"""

import csv
import functools
import logging
import math
import os
import sys

import click
import numpy as np

from . import __version__
from .dataset import DataRecord, average_periods, concatenate, relative_rms_error
from .duffing import DuffingParams, default_train_config, make_benchmark
from .exceptions import (
    ConfigurationError,
    DataFormatError,
    DivergenceError,
    NumericalError,
    PnlssError,
)
from .fileio import (
    _write_csv,
    config_hash,
    format_float,
    load_frf,
    load_linear_models,
    load_manifest,
    load_model,
    load_record,
    load_weighting,
    read_json_file,
    save_frf,
    save_linear_models,
    save_manifest,
    save_model,
    save_record,
    write_json_file,
)
from .frf import classify_distortions, estimate_bla
from .linear import simulate_linear
from .model import init_from_linear, simulate
from .multisine import GRIDS, MultisineConfig, generate_multisine
from .optimize import LmConfig
from .optimize import optimize as run_lm
from .subspace import WEIGHTINGS, SubspaceConfig, loop_orders

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_RULES = ("full", "statesonly", "inputsonly", "none")

_log = logging.getLogger(__name__)


def _fail(message, code):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _mapped_errors(fn):
    """Translate library exceptions into the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except ConfigurationError as exc:
            _fail(str(exc), EXIT_CONFIG)
        except (NumericalError, DivergenceError) as exc:
            _fail(str(exc), EXIT_NUMERIC)
        except (DataFormatError, OSError) as exc:
            _fail(str(exc), EXIT_IO)

    return wrapper


def _resolve_seed(ctx, seed, fallback=0):
    if seed is not None:
        return int(seed)
    top = (ctx.obj or {}).get("seed")
    return fallback if top is None else int(top)


def _parse_int_list(text, flag):
    try:
        values = [int(tok) for tok in str(text).replace(" ", "").split(",") if tok]
    except ValueError:
        raise click.UsageError(
            f"{flag} expects a comma-separated list of integers, got {text!r}"
        )
    if not values:
        raise click.UsageError(f"{flag} must name at least one integer")
    return values


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _sidecar_path(path):
    root, ext = os.path.splitext(path)
    return root + ".json" if ext.lower() == ".csv" else path + ".json"


@click.group(name="pnlss")
@click.version_option(__version__, prog_name="pnlss")
@click.option("--seed", type=int, default=None,
              help="Default seed for subcommands that draw random numbers.")
@click.option("--threads", type=int, default=None,
              help="Cap BLAS/OpenMP thread pools (sets *_NUM_THREADS).")
@click.option("--log-level", type=click.Choice(["debug", "info", "warning", "error"]),
              default="warning", show_default=True)
@click.pass_context
def cli(ctx, seed, threads, log_level):
    """Polynomial nonlinear state-space identification pipeline."""
    logging.basicConfig(level=getattr(logging, log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    if threads is not None:
        if threads < 1:
            raise click.UsageError("--threads must be a positive integer")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    ctx.obj = {"seed": seed}


def main():
    cli(prog_name="pnlss")


# ------------------------------------------------------------ gen-multisine

def _write_signals(out_path, config, signals):
    _ensure_parent(out_path)

    def rows():
        for r, sig in enumerate(signals):
            for s, v in enumerate(sig.samples):
                yield [str(r), str(s), format_float(v)]

    _write_csv(out_path, ["realization", "sample_index", "u"], rows())
    write_json_file(
        _sidecar_path(out_path),
        {
            "kind": "multisine-signals",
            "config": {
                "n_samples": config.n_samples,
                "fs": config.fs,
                "grid": config.grid,
                "group_size": config.group_size,
                "f_max_ratio": config.f_max_ratio,
                "realizations": config.realizations,
                "periods": config.periods,
                "rms": config.rms,
                "seed": config.seed,
            },
            "excited_lines": signals[0].excited_lines,
            "amplitude": signals[0].amplitude,
            "phases": np.stack([sig.phases for sig in signals]),
        },
    )


@cli.command("gen-multisine")
@click.option("--n", "n_samples", type=int, required=True, help="Samples per period.")
@click.option("--fs", type=float, required=True, help="Sample rate in Hz.")
@click.option("--grid", type=click.Choice(GRIDS), default="odd", show_default=True)
@click.option("--group-size", type=int, default=4, show_default=True)
@click.option("--fmax-ratio", type=float, default=0.9, show_default=True,
              help="Excited band as a fraction of Nyquist.")
@click.option("--rms", type=float, default=1.0, show_default=True)
@click.option("--realizations", type=int, default=1, show_default=True)
@click.option("--periods", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="CSV of samples; a config sidecar JSON lands next to it.")
@click.pass_context
@_mapped_errors
def gen_multisine_cmd(ctx, n_samples, fs, grid, group_size, fmax_ratio, rms,
                      realizations, periods, seed, out_path):
    """Design random-phase multisine realizations."""
    config = MultisineConfig(
        n_samples=n_samples, fs=fs, grid=grid, group_size=group_size,
        f_max_ratio=fmax_ratio, realizations=realizations, periods=periods,
        rms=rms, seed=_resolve_seed(ctx, seed),
    )
    signals = generate_multisine(config)
    _write_signals(out_path, config, signals)
    click.echo(f"{len(signals)} realization(s), "
               f"{signals[0].excited_lines.size} excited lines -> {out_path}")


# ------------------------------------------------------------------ bla

def _bla_impl(in_dir, out_path):
    rec = load_record(in_dir)
    if not isinstance(rec, DataRecord):
        raise ConfigurationError(
            "nonparametric estimation needs a raw periodic record, not "
            "concatenated data"
        )
    frf = estimate_bla(rec)
    _ensure_parent(out_path)
    save_frf(out_path, frf)
    return frf


@cli.command("bla")
@click.option("--in", "in_dir", type=click.Path(), required=True,
              help="Record directory (record.csv + record.json).")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_mapped_errors
def bla_cmd(in_dir, out_path):
    """Averaged FRF with noise and total covariance per excited line."""
    frf = _bla_impl(in_dir, out_path)
    click.echo(f"{frf.lines.size} lines, R={frf.dof[0]} P={frf.dof[1]} -> {out_path}")


# ------------------------------------------------------------- distortion

def _distortion_impl(in_dir, out_path):
    rec = load_record(in_dir)
    if not isinstance(rec, DataRecord):
        raise ConfigurationError("distortion analysis needs a raw periodic record")
    spectrum = classify_distortions(rec)
    _ensure_parent(out_path)

    def rows():
        for k, cls, lvl in zip(spectrum.lines, spectrum.line_class, spectrum.level):
            yield [str(int(k)), format_float(int(k) * rec.fs / rec.n_samples),
                   cls.value, format_float(lvl)]

    _write_csv(out_path, ["line", "freq_hz", "class", "level"], rows())
    return spectrum


@cli.command("distortion")
@click.option("--in", "in_dir", type=click.Path(), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_mapped_errors
def distortion_cmd(in_dir, out_path):
    """Classify spectral lines as excited/odd/even and report levels."""
    spectrum = _distortion_impl(in_dir, out_path)
    click.echo(f"{len(spectrum.lines)} lines classified -> {out_path}")


# -------------------------------------------------------------- subspace

def _subspace_impl(frf_path, orders, iters, weighting, block_rows, out_path):
    frf = load_frf(frf_path)
    config = SubspaceConfig(orders=tuple(orders), block_rows=block_rows,
                            lm_iterations=iters, weighting=weighting)
    fits = loop_orders(frf, config)
    _ensure_parent(out_path)
    save_linear_models(out_path, fits)
    return fits


@cli.command("subspace")
@click.option("--frf", "frf_path", type=click.Path(), required=True)
@click.option("--orders", default="1,2,3", show_default=True,
              help="Comma-separated model orders to try.")
@click.option("--iters", type=int, default=100, show_default=True,
              help="Iterative refinement steps per order.")
@click.option("--weighting", type=click.Choice(WEIGHTINGS), default="total",
              show_default=True)
@click.option("--block-rows", type=int, default=None,
              help="Hankel block rows (default: max order + 2).")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_mapped_errors
def subspace_cmd(frf_path, orders, iters, weighting, block_rows, out_path):
    """Estimate linear state-space models of several orders from an FRF."""
    order_list = _parse_int_list(orders, "--orders")
    fits = _subspace_impl(frf_path, order_list, iters, weighting, block_rows,
                          out_path)
    for n in order_list:
        fit = fits[n]
        if fit.error:
            click.echo(f"order {n}: failed ({fit.error})")
        else:
            click.echo(f"order {n}: cost {format_float(fit.cost)}")


# ------------------------------------------------------------------ init

def _init_impl(linear_path, order, nx, ny, state_rule, output_rule, out_path):
    models = load_linear_models(linear_path)
    if order not in models:
        raise ConfigurationError(f"order {order} is not present in {linear_path}")
    lin, _cost, error = models[order]
    if lin is None:
        raise NumericalError(f"order {order} failed during estimation: {error}")
    model = init_from_linear(
        lin,
        state_degrees=tuple(sorted(set(nx))),
        output_degrees=tuple(sorted(set(ny))),
        state_rule=state_rule,
        output_rule=output_rule,
    )
    _ensure_parent(out_path)
    save_model(out_path, model)
    return model


@cli.command("init")
@click.option("--linear", "linear_path", type=click.Path(), required=True,
              help="Linear model collection (subspace output).")
@click.option("--order", type=int, required=True)
@click.option("--nx", default="2,3", show_default=True,
              help="State polynomial degrees.")
@click.option("--ny", default="2,3", show_default=True,
              help="Output polynomial degrees.")
@click.option("--state-rule", type=click.Choice(_RULES), default="full",
              show_default=True)
@click.option("--output-rule", type=click.Choice(_RULES), default="full",
              show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_mapped_errors
def init_cmd(linear_path, order, nx, ny, state_rule, output_rule, out_path):
    """Wrap a linear model into a polynomial model with zero coefficients."""
    model = _init_impl(
        linear_path, order,
        _parse_int_list(nx, "--nx"), _parse_int_list(ny, "--ny"),
        state_rule, output_rule, out_path,
    )
    click.echo(f"n={model.n}, {model.n_parameters} parameters -> {out_path}")


# -------------------------------------------------------------- optimize

def _load_sim_data(path, t1, t2):
    """Record directory -> ConcatenatedRecord ready for simulation."""
    rec = load_record(path)
    if isinstance(rec, DataRecord):
        if rec.periodic and rec.n_periods > 1:
            rec = average_periods(rec)
        return concatenate([rec], prepend=t1, t2=t2)
    if t1 or t2:
        raise ConfigurationError(
            "--t1/--t2 apply to raw records; this data is already concatenated"
        )
    return rec


def _parse_weighting(spec):
    if spec == "uniform":
        return None
    if spec.startswith("invcov:"):
        return load_weighting(spec[len("invcov:"):])
    raise ConfigurationError(
        f"unknown weighting {spec!r}; use 'uniform' or 'invcov:<file>'"
    )


def _write_trace(trace_dir, trace):
    os.makedirs(trace_dir, exist_ok=True)
    # drop leftovers from longer previous runs so reruns are byte-identical
    for name in os.listdir(trace_dir):
        if name == "trace.json" or (
            name.startswith("model_") and name.endswith(".json")
        ):
            os.remove(os.path.join(trace_dir, name))
    for i, model in enumerate(trace.models):
        save_model(os.path.join(trace_dir, f"model_{i + 1:04d}.json"), model)
    write_json_file(
        os.path.join(trace_dir, "trace.json"),
        {
            "kind": "optimization-trace",
            "costs": np.asarray(trace.costs, dtype=float),
            "lambdas": np.asarray(trace.lambdas, dtype=float),
            "step_successes": [bool(s) for s in trace.step_successes],
            "iterations_run": int(trace.meta["iterations_run"]),
            "stopped_early": bool(trace.meta["stopped_early"]),
        },
    )


def _read_trace_dir(trace_dir):
    try:
        names = sorted(
            name for name in os.listdir(trace_dir)
            if name.startswith("model_") and name.endswith(".json")
        )
    except OSError as exc:
        raise DataFormatError(f"cannot read trace directory: {exc}") from exc
    if not names:
        raise DataFormatError(f"{trace_dir}: no model_*.json files")
    return names, [load_model(os.path.join(trace_dir, name)) for name in names]


def _optimize_impl(model_path, data_path, t1, t2, iters, lambda0,
                   weighting_spec, trace_dir):
    model0 = load_model(model_path)
    data = _load_sim_data(data_path, t1, t2)
    weighting = _parse_weighting(weighting_spec)
    config = LmConfig(max_iterations=iters, lambda0=lambda0, weighting=weighting)
    trace = run_lm(model0, data, config)
    _write_trace(trace_dir, trace)
    return trace


@cli.command("optimize")
@click.option("--model", "model_path", type=click.Path(), required=True,
              help="Initial polynomial model JSON.")
@click.option("--data", "data_path", type=click.Path(), required=True,
              help="Training record directory.")
@click.option("--t1", type=int, default=0, show_default=True,
              help="Transient samples prepended per segment.")
@click.option("--t2", type=int, default=0, show_default=True,
              help="Extra samples masked at each segment start.")
@click.option("--iters", type=int, default=100, show_default=True)
@click.option("--lambda0", type=float, default=100.0, show_default=True)
@click.option("--weighting", default="uniform", show_default=True,
              help="'uniform' or 'invcov:<weighting.json>'.")
@click.option("--trace", "trace_dir", type=click.Path(), required=True,
              help="Directory receiving model_0001.json... and trace.json.")
@_mapped_errors
def optimize_cmd(model_path, data_path, t1, t2, iters, lambda0, weighting,
                 trace_dir):
    """Minimize the simulation error with a damped Gauss-Newton loop."""
    trace = _optimize_impl(model_path, data_path, t1, t2, iters, lambda0,
                           weighting, trace_dir)
    click.echo(
        f"cost {format_float(trace.costs[0])} -> {format_float(trace.costs[-1])} "
        f"in {trace.meta['iterations_run']} iterations "
        f"({len(trace.models) - 1} accepted) -> {trace_dir}"
    )


# -------------------------------------------------------------- simulate

def _read_input_matrix(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataFormatError(f"{path}: empty CSV")
        rows = list(reader)
    u_cols = [i for i, c in enumerate(header) if c == "u" or c.startswith("u_")]
    if not u_cols:
        raise DataFormatError(
            f"{path}: no input columns (expected 'u' or 'u_1', 'u_2', ...)"
        )
    try:
        data = np.array(
            [[float(row[i]) for i in u_cols] for row in rows], dtype=float
        )
    except (ValueError, IndexError) as exc:
        raise DataFormatError(f"{path}: malformed CSV ({exc})") from exc
    if "realization" in header:
        ridx = header.index("realization")
        if len({row[ridx] for row in rows}) > 1:
            raise ConfigurationError(
                "input CSV holds several realizations; filter to one first"
            )
    return data


def _write_output_csv(path, y):
    p = y.shape[1]
    _ensure_parent(path)

    def rows():
        for s in range(y.shape[0]):
            yield [str(s)] + [format_float(v) for v in y[s]]

    _write_csv(path, ["sample"] + [f"y_{j + 1}" for j in range(p)], rows())


@cli.command("simulate")
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--in", "in_path", type=click.Path(), required=True,
              help="Input CSV with 'u' or 'u_1'.. columns.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_mapped_errors
def simulate_cmd(model_path, in_path, out_path):
    """Run a polynomial model over an input sequence."""
    model = load_model(model_path)
    u = _read_input_matrix(in_path)
    if u.shape[1] != model.m:
        raise ConfigurationError(
            f"model expects {model.m} input(s), CSV has {u.shape[1]}"
        )
    result = simulate(model, u)
    if result.diverged:
        raise NumericalError(
            f"simulation diverged at sample {result.divergence_index}"
        )
    _write_output_csv(out_path, result.y)
    click.echo(f"{result.y.shape[0]} samples -> {out_path}")


# -------------------------------------------------------------- validate

def _finite_or_inf(err):
    return float(err) if np.isfinite(err) else math.inf


def _model_errors(models, data):
    mask = data.cost_mask()
    errs = []
    for model in models:
        result = simulate(model, data.u)
        if result.diverged:
            errs.append(math.inf)
            continue
        errs.append(
            _finite_or_inf(relative_rms_error(data.y, result.y, mask).pooled)
        )
    return errs


def _validate_impl(trace_dir, data_path, t1, t2, train_path, train_t1,
                   train_t2, linear_path, order, report_path, pred_path):
    names, models = _read_trace_dir(trace_dir)
    val = _load_sim_data(data_path, t1, t2)
    errs = _model_errors(models, val)

    best = None
    for i, err in enumerate(errs):
        if math.isfinite(err) and (best is None or err <= errs[best]):
            best = i
    if best is None:
        raise NumericalError("every trace model diverged on the validation data")

    report = None
    linear = None
    if linear_path is not None:
        if order is None:
            raise click.UsageError("--linear needs --order")
        entries = load_linear_models(linear_path)
        if order not in entries:
            raise ConfigurationError(f"order {order} not present in {linear_path}")
        linear, _cost, error = entries[order]
        if linear is None:
            raise NumericalError(f"order {order} failed during estimation: {error}")

    if report_path is not None:
        if train_path is None or linear is None:
            raise click.UsageError(
                "--report needs --train-data, --linear, and --order"
            )
        train = _load_sim_data(train_path, train_t1, train_t2)
        train_mask = train.cost_mask()
        val_mask = val.cost_mask()
        best_result = simulate(models[best], train.u)
        if best_result.diverged:
            raise NumericalError("selected model diverged on the training data")
        pnlss_train = relative_rms_error(train.y, best_result.y, train_mask).pooled
        lin_val_y, _ = simulate_linear(linear, val.u)
        lin_train_y, _ = simulate_linear(linear, train.u)
        report = {
            "kind": "case-study-report",
            "tool_version": __version__,
            "n_models": len(models),
            "best_model": names[best],
            "linear_order": int(order),
            "pnlss_train_rrmse": _finite_or_inf(pnlss_train),
            "pnlss_val_rrmse": errs[best],
            "linear_train_rrmse": _finite_or_inf(
                relative_rms_error(train.y, lin_train_y, train_mask).pooled
            ),
            "linear_val_rrmse": _finite_or_inf(
                relative_rms_error(val.y, lin_val_y, val_mask).pooled
            ),
        }
        _ensure_parent(report_path)
        write_json_file(report_path, report)

    if pred_path is not None:
        if linear is None:
            raise click.UsageError("--pred-out needs --linear and --order")
        mask = val.cost_mask()
        best_sim = simulate(models[best], val.u)
        if best_sim.diverged:
            raise NumericalError("selected model diverged on the validation data")
        lin_y, _ = simulate_linear(linear, val.u)
        p = val.n_outputs
        suffix = [""] if p == 1 else [f"_{j + 1}" for j in range(p)]
        header = (
            ["sample"]
            + [f"y_true{s}" for s in suffix]
            + [f"err_linear{s}" for s in suffix]
            + [f"err_pnlss{s}" for s in suffix]
        )
        idx = np.nonzero(mask)[0]
        _ensure_parent(pred_path)

        def rows():
            for s in idx:
                yield (
                    [str(int(s))]
                    + [format_float(v) for v in val.y[s]]
                    + [format_float(v) for v in (val.y[s] - lin_y[s])]
                    + [format_float(v) for v in (val.y[s] - best_sim.y[s])]
                )

        _write_csv(pred_path, header, rows())

    return names, errs, best, report


@cli.command("validate")
@click.option("--trace", "trace_dir", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True,
              help="Validation record directory.")
@click.option("--t1", type=int, default=0, show_default=True)
@click.option("--t2", type=int, default=0, show_default=True)
@click.option("--train-data", "train_path", type=click.Path(), default=None,
              help="Training record, needed for --report.")
@click.option("--train-t1", type=int, default=0, show_default=True)
@click.option("--train-t2", type=int, default=0, show_default=True)
@click.option("--linear", "linear_path", type=click.Path(), default=None,
              help="Linear model collection for the baseline columns.")
@click.option("--order", type=int, default=None)
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write summary JSON with train/val errors.")
@click.option("--pred-out", "pred_path", type=click.Path(), default=None,
              help="Write per-sample errors of the best model as CSV.")
@_mapped_errors
def validate_cmd(trace_dir, data_path, t1, t2, train_path, train_t1, train_t2,
                 linear_path, order, report_path, pred_path):
    """Score every traced model on held-out data (CSV table to stdout)."""
    names, errs, best, _report = _validate_impl(
        trace_dir, data_path, t1, t2, train_path, train_t1, train_t2,
        linear_path, order, report_path, pred_path,
    )
    click.echo("model,rel_rmse")
    for name, err in zip(names, errs):
        click.echo(f"{name},{'inf' if math.isinf(err) else format_float(err)}")
    click.echo(f"# best: {names[best]}", err=True)


# --------------------------------------------------------------- duffing

def _duffing_impl(params, train_cfg, substeps, out_train, out_val):
    train, val = make_benchmark(params, train_cfg, substeps=substeps)
    save_record(out_train, train)
    save_record(out_val, val)
    return train, val


def _ingest_impl(ingest_path, fs, realizations, periods, excited, out_train):
    with open(ingest_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataFormatError(f"{ingest_path}: empty CSV")
        rows = list(reader)
    u_cols = [i for i, c in enumerate(header) if c == "u" or c.startswith("u_")]
    y_cols = [i for i, c in enumerate(header) if c == "y" or c.startswith("y_")]
    if not u_cols or not y_cols:
        raise DataFormatError(
            f"{ingest_path}: need 'u'/'u_1'.. and 'y'/'y_1'.. columns"
        )
    try:
        data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise DataFormatError(f"{ingest_path}: malformed CSV ({exc})") from exc
    total = data.shape[0]
    if total % (realizations * periods):
        raise ConfigurationError(
            f"{total} rows do not divide into {realizations} realization(s) "
            f"x {periods} period(s)"
        )
    n = total // (realizations * periods)
    u = data[:, u_cols].reshape(realizations, periods, n, len(u_cols))
    y = data[:, y_cols].reshape(realizations, periods, n, len(y_cols))
    rec = DataRecord(
        u=u, y=y, fs=fs,
        excited_lines=np.asarray(excited, dtype=int),
        periodic=True,
        meta={"source": os.path.basename(ingest_path)},
    )
    save_record(out_train, rec)
    return rec


@cli.command("duffing")
@click.option("--preset", type=click.Choice(["default"]), default="default",
              show_default=True)
@click.option("--out-train", "out_train", type=click.Path(), default=None)
@click.option("--out-val", "out_val", type=click.Path(), default=None)
@click.option("--alpha", type=float, default=None, help="Linear stiffness.")
@click.option("--beta", type=float, default=None, help="Cubic stiffness.")
@click.option("--c", "damping", type=float, default=None, help="Damping.")
@click.option("--fs", type=float, default=None, help="Sample rate in Hz.")
@click.option("--rms", type=float, default=None, help="Training excitation RMS.")
@click.option("--noise-std", type=float, default=None,
              help="Output noise standard deviation.")
@click.option("--substeps", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--ingest", "ingest_path", type=click.Path(), default=None,
              help="Wrap an existing u/y CSV as a record instead of simulating.")
@click.option("--realizations", type=int, default=1, show_default=True,
              help="Row blocking for --ingest.")
@click.option("--periods", type=int, default=1, show_default=True,
              help="Row blocking for --ingest.")
@click.option("--excited-lines", "excited_text", default="",
              help="Comma list of excited lines for --ingest.")
@click.pass_context
@_mapped_errors
def duffing_cmd(ctx, preset, out_train, out_val, alpha, beta, damping, fs, rms,
                noise_std, substeps, seed, ingest_path, realizations, periods,
                excited_text):
    """Generate (or ingest) oscillator benchmark data."""
    if out_train is None:
        raise click.UsageError("--out-train is required")
    if ingest_path is not None:
        if fs is None:
            raise click.UsageError("--ingest needs --fs")
        excited = (
            _parse_int_list(excited_text, "--excited-lines") if excited_text else []
        )
        rec = _ingest_impl(ingest_path, fs, realizations, periods, excited,
                           out_train)
        click.echo(
            f"wrapped {rec.n_realizations}x{rec.n_periods}x{rec.n_samples} "
            f"samples -> {out_train}"
        )
        return
    if out_val is None:
        raise click.UsageError("--out-val is required unless --ingest is used")
    kw = {"seed": _resolve_seed(ctx, seed)}
    if alpha is not None:
        kw["alpha"] = alpha
    if beta is not None:
        kw["beta"] = beta
    if damping is not None:
        kw["damping"] = damping
    if fs is not None:
        kw["fs"] = fs
    if noise_std is not None:
        kw["noise_std"] = noise_std
    params = DuffingParams(**kw)
    cfg_kw = {"seed": params.seed}
    if rms is not None:
        cfg_kw["rms"] = rms
    train_cfg = default_train_config(**cfg_kw)
    if fs is not None:
        train_cfg = MultisineConfig(
            n_samples=train_cfg.n_samples, fs=fs, grid=train_cfg.grid,
            group_size=train_cfg.group_size, f_max_ratio=train_cfg.f_max_ratio,
            realizations=train_cfg.realizations, periods=train_cfg.periods,
            rms=train_cfg.rms, seed=train_cfg.seed,
        )
    train, val = _duffing_impl(params, train_cfg, substeps, out_train, out_val)
    click.echo(
        f"train {train.n_realizations}x{train.n_periods}x{train.n_samples} "
        f"-> {out_train}; validation {val.n_samples} samples -> {out_val}"
    )


# ------------------------------------------------------------- case-study

def _case_study_stages(workdir, seed):
    """Stage table: (name, argv, impl, kwargs, inputs, outputs, config)."""
    params = DuffingParams(seed=seed)
    train_cfg = default_train_config(seed=seed)
    n = train_cfg.n_samples
    wd = lambda *parts: os.path.join(workdir, *parts)

    stages = [
        (
            "duffing",
            ["duffing", "--preset", "default", "--seed", str(seed),
             "--out-train", "train", "--out-val", "val"],
            _duffing_impl,
            dict(params=params, train_cfg=train_cfg, substeps=10,
                 out_train=wd("train"), out_val=wd("val")),
            [],
            ["train/record.csv", "train/record.json",
             "val/record.csv", "val/record.json"],
            {"preset": "default", "seed": seed},
        ),
        (
            "bla",
            ["bla", "--in", "train", "--out", "frf.json"],
            _bla_impl,
            dict(in_dir=wd("train"), out_path=wd("frf.json")),
            ["train/record.csv", "train/record.json"],
            ["frf.json"],
            {"in": "train", "out": "frf.json"},
        ),
        (
            "subspace",
            ["subspace", "--frf", "frf.json", "--orders", "1,2,3",
             "--iters", "100", "--weighting", "total", "--out", "linear.json"],
            _subspace_impl,
            dict(frf_path=wd("frf.json"), orders=[1, 2, 3], iters=100,
                 weighting="total", block_rows=None, out_path=wd("linear.json")),
            ["frf.json"],
            ["linear.json"],
            {"orders": [1, 2, 3], "iters": 100, "weighting": "total"},
        ),
        (
            "init",
            ["init", "--linear", "linear.json", "--order", "2",
             "--nx", "2,3", "--ny", "2,3", "--state-rule", "statesonly",
             "--output-rule", "none", "--out", "init.json"],
            _init_impl,
            dict(linear_path=wd("linear.json"), order=2, nx=[2, 3], ny=[2, 3],
                 state_rule="statesonly", output_rule="none",
                 out_path=wd("init.json")),
            ["linear.json"],
            ["init.json"],
            {"order": 2, "nx": [2, 3], "ny": [2, 3],
             "state_rule": "statesonly", "output_rule": "none"},
        ),
        (
            "optimize",
            ["optimize", "--model", "init.json", "--data", "train",
             "--t1", str(n), "--t2", "0", "--iters", "100",
             "--lambda0", "100.0", "--weighting", "uniform", "--trace", "trace"],
            _optimize_impl,
            dict(model_path=wd("init.json"), data_path=wd("train"), t1=n, t2=0,
                 iters=100, lambda0=100.0, weighting_spec="uniform",
                 trace_dir=wd("trace")),
            ["init.json", "train/record.csv", "train/record.json"],
            ["trace/trace.json"],
            {"t1": n, "t2": 0, "iters": 100, "lambda0": 100.0,
             "weighting": "uniform"},
        ),
        (
            "validate",
            ["validate", "--trace", "trace", "--data", "val",
             "--train-data", "train", "--train-t1", str(n),
             "--linear", "linear.json", "--order", "2",
             "--report", "report.json", "--pred-out", "predictions.csv"],
            _validate_impl,
            dict(trace_dir=wd("trace"), data_path=wd("val"), t1=0, t2=0,
                 train_path=wd("train"), train_t1=n, train_t2=0,
                 linear_path=wd("linear.json"), order=2,
                 report_path=wd("report.json"), pred_path=wd("predictions.csv")),
            ["trace/trace.json", "val/record.csv", "val/record.json",
             "train/record.csv", "train/record.json", "linear.json"],
            ["report.json", "predictions.csv"],
            {"order": 2, "train_t1": n},
        ),
    ]
    return stages


def run_case_study(workdir, preset="duffing", seed=0):
    """Full pipeline on the oscillator benchmark; returns the report dict.

    Writes train/val records, FRF, linear models, initial and optimized
    models, the validation report, and a manifest that re-creates every
    artifact byte for byte when replayed.
    """
    if preset != "duffing":
        raise ConfigurationError(f"unknown case-study preset {preset!r}")
    os.makedirs(workdir, exist_ok=True)
    steps = []
    for name, argv, impl, kwargs, inputs, outputs, config in _case_study_stages(
        workdir, seed
    ):
        _log.info("case-study stage %s", name)
        try:
            impl(**kwargs)
        except PnlssError as exc:
            exc.args = (f"case-study stage '{name}': {exc}",)
            raise
        steps.append(
            {
                "command": name,
                "argv": argv,
                "inputs": inputs,
                "outputs": outputs,
                "config-hash": config_hash(config),
            }
        )
    save_manifest(os.path.join(workdir, "manifest.json"), steps, __version__)
    return read_json_file(os.path.join(workdir, "report.json"))


def _replay_manifest(manifest_path):
    steps, _tool = load_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path)) or "."
    old = os.getcwd()
    os.chdir(base)
    try:
        for step in steps:
            missing = [f for f in step.get("inputs", []) if not os.path.exists(f)]
            if missing:
                raise DataFormatError(
                    f"replay of '{step['command']}' is missing inputs: "
                    + ", ".join(missing)
                )
            cli.main(args=list(step["argv"]), standalone_mode=False)
            gone = [f for f in step.get("outputs", []) if not os.path.exists(f)]
            if gone:
                raise DataFormatError(
                    f"replay of '{step['command']}' did not produce: "
                    + ", ".join(gone)
                )
    finally:
        os.chdir(old)
    return len(steps)


@cli.command("case-study")
@click.option("--workdir", type=click.Path(), required=True)
@click.option("--preset", type=click.Choice(["duffing"]), default="duffing",
              show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--replay", "replay_path", type=click.Path(), default=None,
              help="Re-run a recorded manifest instead of the preset chain.")
@click.pass_context
@_mapped_errors
def case_study_cmd(ctx, workdir, preset, seed, replay_path):
    """End-to-end benchmark run: data, FRF, linear fit, polynomial fit."""
    if replay_path is not None:
        n_steps = _replay_manifest(replay_path)
        click.echo(f"replayed {n_steps} steps from {replay_path}")
        return
    report = run_case_study(workdir, preset=preset, seed=_resolve_seed(ctx, seed))
    for key in ("pnlss_train_rrmse", "pnlss_val_rrmse",
                "linear_train_rrmse", "linear_val_rrmse"):
        click.echo(f"{key}: {format_float(report[key])}")
    click.echo(f"report -> {os.path.join(workdir, 'report.json')}")


# -------------------------------------------------------------- emit-plot

_TINY = float(np.finfo(float).tiny)


def _amp_db(v):
    return 20.0 * math.log10(max(abs(v), _TINY))


def _pow_db(v):
    return 10.0 * math.log10(max(abs(v), _TINY))


def _passthrough_csv(in_path, out_path, required):
    with open(in_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{in_path}: empty CSV")
        missing = [c for c in required if c not in header]
        if missing:
            raise DataFormatError(
                f"{in_path}: missing columns: " + ", ".join(missing)
            )
        rows = list(reader)
    _ensure_parent(out_path)
    _write_csv(out_path, header, rows)
    return len(rows)


@cli.command("emit-plot")
@click.option("--kind", type=click.Choice(["frf", "distortion",
                                           "validation-errors"]), required=True)
@click.option("--in", "in_path", type=click.Path(), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_mapped_errors
def emit_plot_cmd(kind, in_path, out_path):
    """Reshape pipeline artifacts into plot-ready CSV (no rendering)."""
    if kind == "frf":
        frf = load_frf(in_path)
        if frf.G.shape[1:] != (1, 1):
            raise ConfigurationError(
                "frf plot data is defined for single-input single-output "
                "estimates"
            )
        _ensure_parent(out_path)

        def rows():
            for i, k in enumerate(frf.lines):
                yield [
                    str(int(k)),
                    format_float(int(k) * frf.fs / frf.n_samples),
                    format_float(_amp_db(frf.G[i, 0, 0])),
                    format_float(_pow_db(frf.covGML[i, 0, 0].real)),
                    format_float(_pow_db(frf.covGn[i, 0, 0].real)),
                ]

        _write_csv(
            out_path,
            ["line", "freq_hz", "mag_db_G", "mag_db_covGML_diag",
             "mag_db_covGn_diag"],
            rows(),
        )
        click.echo(f"{frf.lines.size} lines -> {out_path}")
    elif kind == "distortion":
        n = _passthrough_csv(in_path, out_path,
                             ["line", "freq_hz", "class", "level"])
        click.echo(f"{n} rows -> {out_path}")
    else:
        n = _passthrough_csv(in_path, out_path,
                             ["sample", "y_true", "err_linear", "err_pnlss"])
        click.echo(f"{n} rows -> {out_path}")


if __name__ == "__main__":
    main()
