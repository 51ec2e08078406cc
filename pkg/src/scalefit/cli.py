"""``scalefit`` command-line interface.

Subcommands: gen, fit, predict, evaluate, curves, select, converge.

Every subcommand accepts ``--config FILE`` holding flat ``key = value``
lines (``#`` starts a comment); keys are flag names without the leading
dashes, and explicit flags override the file.

Exit codes: 0 success, 2 invalid arguments, 3 I/O or file-format error,
4 solver did not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, persist, synth
from ._parallel import max_workers
from .dataset import Dataset
from .errors import (
    ConvergenceError, CSVParseError, InputError, ModelFormatError, NumericalError, ScalefitError,
)
from .estimators import (
    ASYMMETRY_WEIGHTS, DEFAULT_EPSILON, IQR_WEIGHTS, CombinationModel, MadModel,
    fit_combination, fit_mad, fit_quantile, mad_risk,
)
from .experiments import LambdaSchedule, run_convergence
from .kernels import KernelSpec
from .losses import LossSpec, loss as loss_value
from .solver import FitConfig, QuantileModel, fit

log = logging.getLogger("scalefit")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CONVERGENCE = 0, 2, 3, 4

SCALE_ALIASES = {"linear": "linear_increasing"}
KERNEL_ALIASES = {"rbf": "gaussian_rbf", "gaussian": "gaussian_rbf", "poly": "polynomial"}


class UsageError(InputError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# -- shared option groups ------------------------------------------------------

def _add_data_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data file")
    g.add_argument("--data", required=True, help="CSV dataset")
    g.add_argument("--delimiter", default=",")
    g.add_argument("--no-header", action="store_true", help="first row is data")
    g.add_argument("--x-cols", type=_ints, default=None, help="input column indices (default: all but y)")
    g.add_argument("--y-col", type=int, default=-1, help="output column index (default: last)")


def _add_kernel_opts(p: argparse.ArgumentParser, second: bool = False) -> None:
    g = p.add_argument_group("kernel")
    g.add_argument("--kernel", default="gaussian_rbf", help="gaussian_rbf (rbf), linear or polynomial")
    g.add_argument("--gamma", type=float, default=1.0, help="RBF width parameter")
    g.add_argument("--degree", type=int, default=2)
    g.add_argument("--coef0", type=float, default=0.0)
    if second:
        g.add_argument("--gamma2", type=float, default=None, help="RBF width for the residual stage")


def _add_solver_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--max-iter", type=int, default=None)
    g.add_argument("--jitter", type=float, default=1e-10)
    g.add_argument("--seed", type=int, default=0)


def _add_generator_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("generator")
    g.add_argument("--loc", default="sine", help="constant, sine or lidar_like")
    g.add_argument("--scale", default="linear_increasing", help="constant, linear (linear_increasing) or step")
    g.add_argument("--noise", default="gaussian", help="gaussian, laplace or skewed")
    g.add_argument("--a", type=float, default=0.0, help="domain lower end")
    g.add_argument("--b", type=float, default=1.0, help="domain upper end")
    g.add_argument("--loc-level", type=float, default=0.0)
    g.add_argument("--loc-amplitude", type=float, default=1.0)
    g.add_argument("--scale-level", type=float, default=0.2)
    g.add_argument("--scale-slope", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)


def _kernel(args, gamma: float | None = None) -> KernelSpec:
    family = KERNEL_ALIASES.get(args.kernel, args.kernel)
    return KernelSpec(family, args.gamma if gamma is None else gamma, args.degree, args.coef0)


def _config(args, lam: float) -> FitConfig:
    return FitConfig(lam, args.max_iter, args.tol, args.jitter, args.seed)


def _generator(args) -> synth.GeneratorSpec:
    return synth.GeneratorSpec(
        args.loc, SCALE_ALIASES.get(args.scale, args.scale), args.noise, args.a, args.b, args.seed,
        args.loc_level, args.loc_amplitude, args.scale_level, args.scale_slope)


def _load_data(args) -> Dataset:
    return persist.load_csv(args.data, args.delimiter, not args.no_header, args.x_cols, args.y_col)


def _emit(out: str, header, rows, comments: Sequence[str] = ()) -> None:
    if out == "-":
        persist.write_table(sys.stdout, header, rows, comments=comments)
    else:
        persist.write_table(out, header, rows, comments=comments)
        log.info("wrote %s", out)


def _report_line(model: QuantileModel, label: str) -> str:
    r = model.report
    return (f"{label}: tau={model.loss.tau:g} lambda={model.lam:g} method={r.method} "
            f"iterations={r.iterations} residual={r.residual:.3e} objective={model.objective_value:.10g}")


# -- commands ------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.n < 1:
        raise UsageError(f"--n must be >= 1 (sample size precondition), got {args.n}")
    spec = _generator(args)
    log.info("seed=%d", spec.seed)
    data = synth.sample(spec, args.n)
    if args.out == "-":
        persist.write_table(sys.stdout, ["x", "y"], np.column_stack([data.X, data.y]))
    else:
        persist.write_csv(data, args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    data = _load_data(args)
    kernel = _kernel(args)
    lam = args.lam
    if args.kind == "quantile":
        taus = args.tau or [0.5]
        if len(taus) != 1:
            raise UsageError("fit quantile takes a single --tau")
        model = fit_quantile(data, taus[0], kernel, _config(args, lam))
        lines = [_report_line(model, "quantile")]
    elif args.kind in ("iqr", "asym"):
        default = (0.25, 0.75) if args.kind == "iqr" else (0.05, 0.5, 0.95)
        taus = args.tau or list(default)
        weights = IQR_WEIGHTS if args.kind == "iqr" else ASYMMETRY_WEIGHTS
        if len(taus) != len(weights):
            raise UsageError(f"fit {args.kind} needs {len(weights)} tau values, got {len(taus)}")
        model = fit_combination(data, taus, weights, kernel, _config(args, lam))
        lines = [_report_line(p, f"part{j}") for j, p in enumerate(model.parts)]
    else:
        lam1 = args.lambda1 if args.lambda1 is not None else lam
        lam2 = args.lambda2 if args.lambda2 is not None else lam
        kernel2 = _kernel(args, args.gamma2)
        model = fit_mad(data, kernel, _config(args, lam1), kernel2, _config(args, lam2), args.eps)
        lines = [_report_line(model.median_model, "median"), _report_line(model.residual_model, "residual")]
    for line in lines:
        print(line, file=sys.stderr)
    persist.save_model(model, args.out, {"seed": args.seed, "data": Path(args.data).name})
    log.info("wrote %s", args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = persist.load_model(args.model)
    data = _load_data(args)
    pred = model.predict(data.X)
    names = [f"x{j + 1}" for j in range(data.dim)] if data.dim > 1 else ["x"]
    _emit(args.out, names + ["prediction"], np.column_stack([data.X, pred]))
    return EXIT_OK


def evaluate_model(model, data: Dataset) -> dict[str, float]:
    """Empirical risks of a stored model on a dataset."""
    if isinstance(model, QuantileModel):
        return {"risk": float(np.mean(loss_value(model.loss, data.y, model.predict(data.X))))}
    if isinstance(model, CombinationModel):
        out = {}
        for tau, part in zip(model.taus, model.parts):
            out[f"pinball_risk_tau_{tau:g}"] = float(np.mean(loss_value(part.loss, data.y, part.predict(data.X))))
        return out
    f = model.median_model.predict
    return {
        "median_risk": float(np.mean(loss_value(LossSpec.pinball(0.5), data.y, f(data.X)))),
        "mad_risk_pinball": mad_risk(data.X, data.y, f, model.predict),
        "mad_risk_smoothed": mad_risk(data.X, data.y, f, model.predict, LossSpec.smoothed(model.epsilon)),
    }


def cmd_evaluate(args) -> int:
    model = persist.load_model(args.model)
    for key, value in evaluate_model(model, _load_data(args)).items():
        print(f"{key}={value!r}")
    return EXIT_OK


def _training_hull(model) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(model, QuantileModel):
        X = model.train_inputs
    elif isinstance(model, CombinationModel):
        X = np.vstack([p.train_inputs for p in model.parts])
    else:
        X = model.median_model.train_inputs
    return X.min(axis=0), X.max(axis=0)


def cmd_curves(args) -> int:
    models = [(Path(p).stem, persist.load_model(p)) for p in args.model]
    dim = models[0][1].dim
    if any(m.dim != dim for _, m in models):
        raise UsageError("all models must share one input dimension")
    if args.grid_file:
        grid = _read_grid(args.grid_file, dim)
    else:
        if dim != 1:
            raise UsageError("a regular grid needs one-dimensional models; pass --grid-file instead")
        if args.grid_n < 1:
            raise UsageError(f"--grid-n must be >= 1, got {args.grid_n}")
        lo, hi = _training_hull(models[0][1])
        a = lo[0] if args.grid_min is None else args.grid_min
        b = hi[0] if args.grid_max is None else args.grid_max
        grid = np.linspace(a, b, args.grid_n).reshape(-1, 1)
    if grid.shape[0] == 0:
        raise UsageError("grid is empty")
    for name, m in models:
        lo, hi = _training_hull(m)
        if np.any(grid < lo) or np.any(grid > hi):
            print(f"warning: grid extends outside the training inputs of {name}", file=sys.stderr)
    header = [f"x{j + 1}" for j in range(dim)] if dim > 1 else ["x"]
    cols = [grid]
    for name, m in models:
        values = m.predict(grid)
        if isinstance(m, MadModel) and args.double_mad:
            values, name = 2.0 * values, f"2xMAD_{name}"
        header.append(name)
        cols.append(values.reshape(-1, 1))
    _emit(args.out, header, np.hstack(cols))
    return EXIT_OK


def _read_grid(path, dim: int) -> np.ndarray:
    rows = []
    for no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        fields = [f for f in raw.replace(";", ",").split(",") if f.strip()]
        if not fields:
            continue
        try:
            rows.append([float(v) for v in fields])
        except ValueError:
            if no == 1:
                continue
            raise InputError(f"{path}: line {no}: non-numeric grid value") from None
    return np.asarray(rows, dtype=float).reshape(-1, dim) if rows else np.empty((0, dim))


def cross_validate(data: Dataset, lambdas, gammas, folds: int, loss: LossSpec, args) -> list[dict]:
    """Mean held-out loss per (lambda, gamma) cell; failed cells get ``inf``."""
    if folds < 2:
        raise UsageError(f"--folds must be >= 2, got {folds}")
    if data.n < folds:
        raise UsageError(f"need at least {folds} rows for {folds}-fold cross-validation")
    if not lambdas or not gammas:
        raise UsageError("the (lambda, gamma) grid is empty")
    perm = np.random.Generator(np.random.Philox(args.seed)).permutation(data.n)
    fold_of = np.empty(data.n, dtype=int)
    fold_of[perm] = np.arange(data.n) % folds
    cells = [(lam, gam) for lam in lambdas for gam in gammas]

    def score(cell):
        lam, gam = cell
        risks = []
        try:
            for k in range(folds):
                train, test = data.subset(fold_of != k), data.subset(fold_of == k)
                m = fit(train, _kernel(args, gam), loss, _config(args, lam))
                risks.append(float(np.mean(loss_value(loss, test.y, m.predict(test.X)))))
        except ScalefitError as exc:
            return {"lambda": lam, "gamma": gam, "risk": float("inf"), "status": f"failed: {exc}"}
        return {"lambda": lam, "gamma": gam, "risk": float(np.mean(risks)), "status": "ok"}

    with ThreadPoolExecutor(max_workers=min(len(cells), max_workers())) as pool:
        return list(pool.map(score, cells))


def best_cell(results: list[dict]) -> dict:
    """Lowest risk; ties go to the larger lambda, then the smaller gamma."""
    ok = [r for r in results if np.isfinite(r["risk"])]
    if not ok:
        raise ConvergenceError("every grid cell failed to fit", np.empty(0), float("nan"), 0)
    return min(ok, key=lambda r: (r["risk"], -r["lambda"], r["gamma"]))


def cmd_select(args) -> int:
    data = _load_data(args)
    loss = LossSpec.smoothed(args.eps) if args.eps is not None else LossSpec.pinball(args.tau)
    results = cross_validate(data, args.lambdas, args.gammas, args.folds, loss, args)
    best = best_cell(results)
    rows = [[r["lambda"], r["gamma"], r["risk"], r["status"]] for r in results]
    _emit(args.out, ["lambda", "gamma", "mean_validation_risk", "status"], rows)
    print(f"best lambda={best['lambda']!r} gamma={best['gamma']!r} risk={best['risk']!r}", file=sys.stderr)
    return EXIT_OK


def cmd_converge(args) -> int:
    spec = _generator(args)
    schedule = LambdaSchedule(args.e1, args.e2)
    report = run_convergence(spec, schedule, args.sizes, args.eps, _kernel(args), args.seed, args.eval_size)
    log.info("seed=%d", args.seed)
    _emit(args.out, report.COLUMNS, report.table(), comments=report.notes)
    for row in report.rows:
        if row.error:
            print(f"warning: n={row.n}: {row.error}", file=sys.stderr)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="scalefit", description="Kernel quantile, IQR-type and MAD-type scale estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    def add(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", default=None, help="key = value file; flags override it")
        subs[name] = p
        return p

    p = add("gen", "draw a synthetic dataset")
    _add_generator_opts(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV ('-' for stdout)")
    p.set_defaults(func=cmd_gen)

    p = add("fit", "fit a quantile, IQR, asymmetry or MAD model")
    p.add_argument("kind", choices=["quantile", "iqr", "asym", "mad"])
    _add_data_opts(p)
    _add_kernel_opts(p, second=True)
    _add_solver_opts(p)
    p.add_argument("--tau", type=_floats, default=None, help="quantile level(s), comma-separated")
    p.add_argument("--lambda", dest="lam", type=float, default=0.05)
    p.add_argument("--lambda1", type=float, default=None, help="MAD median-stage lambda")
    p.add_argument("--lambda2", type=float, default=None, help="MAD residual-stage lambda")
    p.add_argument("--eps", type=float, default=DEFAULT_EPSILON, help="smoothing for the MAD residual stage")
    p.add_argument("--out", required=True, help="model file")
    p.set_defaults(func=cmd_fit)

    p = add("predict", "evaluate a model at the inputs of a CSV file")
    p.add_argument("--model", required=True)
    _add_data_opts(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict)

    p = add("evaluate", "empirical risks of a model on a dataset")
    p.add_argument("--model", required=True)
    _add_data_opts(p)
    p.set_defaults(func=cmd_evaluate)

    p = add("curves", "tabulate fitted curves on a grid")
    p.add_argument("--model", required=True, nargs="+")
    p.add_argument("--grid-min", type=float, default=None)
    p.add_argument("--grid-max", type=float, default=None)
    p.add_argument("--grid-n", type=int, default=100)
    p.add_argument("--grid-file", default=None, help="CSV of grid points (one per row)")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--double-mad", action="store_true", help="report 2 x MAD so it is comparable to an IQR")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_curves)

    p = add("select", "k-fold cross-validation over a (lambda, gamma) grid")
    _add_data_opts(p)
    _add_kernel_opts(p)
    _add_solver_opts(p)
    p.add_argument("--lambdas", type=_floats, required=True)
    p.add_argument("--gammas", type=_floats, default=[1.0])
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=None, help="score the smoothed loss instead of the pinball")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_select)

    p = add("converge", "MAD convergence experiment over increasing sample sizes")
    _add_generator_opts(p)
    _add_kernel_opts(p)
    p.add_argument("--e1", type=float, default=0.2)
    p.add_argument("--e2", type=float, default=0.2)
    p.add_argument("--sizes", type=_ints, default=[200, 800, 3200])
    p.add_argument("--eps", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--eval-size", type=int, default=20_000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_converge)
    return parser, subs


def _apply_config(parser, subs, argv) -> argparse.Namespace:
    # the config file may supply required flags, so read it before the full parse
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in subs), None)
    if not known.config or command is None:
        return parser.parse_args(argv)
    sub = subs[command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in read_config(known.config).items():
        action = actions.get({"lambda": "lam"}.get(key, key))
        if action is None or action.dest in ("help", "config"):
            raise UsageError(f"{known.config}: unknown key {key!r} for '{command}'")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                defaults[action.dest] = action.type(raw) if action.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{known.config}: bad value for {key!r}: {exc}") from None
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, subs, argv)
    except UsageError as exc:
        print(f"scalefit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"scalefit: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConvergenceError, NumericalError) as exc:
        print(f"scalefit: solver failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (OSError, ModelFormatError) as exc:
        print(f"scalefit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CSVParseError as exc:
        print(f"scalefit: data error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InputError as exc:
        print(f"scalefit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
