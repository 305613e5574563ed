"""Command-line front end: ``mqrif <command> [options]``.

Settings resolve as command-line flags over ``--config`` (a JSON object with
the same keys as the flag destinations) over built-in defaults. Exit codes:
0 success, 2 data or usage error, 3 non-convergence or a singular system.
"""

from __future__ import annotations

import argparse
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .contours import contour
from .exceptions import (ConvergenceError, DataError, DegenerateDataError, MQRIFError,
                         RankDeficiencyError, SingularMatrixError)
from .huber import MQuantileSpec
from .io import (DatasetSchema, encode_design, load_config, load_csv, resolve_direction,
                 write_manifest, write_matrix, write_table)
from .oracles import DgpConfig, run_coverage, simulate
from .regression import SplineConfig, bootstrap_ci, umqpe_linear, umqpe_splines
from .rif import rif_covariance
from .solver import IrlsOptions, fit_unconditional
from .tuning import cross_validate

log = logging.getLogger("mqrif")

EXIT_OK, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3

DEFAULTS = {
    "out": "mqrif_out",
    "seed": 0,
    "threads": None,
    "data": None,
    "responses": None,
    "covariates": [],
    "categorical": {},
    "log": [],
    "intercept": True,
    "tau": [0.5],
    "direction": "equal-weights",
    "c": "cv",
    "delta": 1.0,
    "max_iter": 200,
    "tol": 1e-8,
    "K": 5,
    "n_grid": 200,
    "cv_per_tau": True,
    "method": "linear",
    "spline_cols": [],
    "degree": 3,
    "knots": 5,
    "m": 360,
    "B": 1000,
    "level": 0.95,
    "kind": "gaussian-linear",
    "n": 2000,
    "coef": None,
    "noise_scale": 1.0,
    "correlation": 0.0,
    "contamination_rate": 0.1,
    "reps": 500,
}

# keys that never reach the manifest: they name locations, not computations
_LOCATION_KEYS = ("out", "config", "command", "verbose")


def _split(text):
    if isinstance(text, str):
        return [t.strip() for t in text.split(",") if t.strip()]
    return list(text)


def _floats(text):
    try:
        return [float(t) for t in _split(text)]
    except ValueError as exc:
        raise DataError(f"expected comma-separated numbers, got {text!r}") from exc


def _categoricals(value):
    if isinstance(value, dict):
        return value
    out = {}
    for item in _split(value):
        name, _, base = item.partition("=")
        out[name] = base or None
    return out


def _common(p):
    p.add_argument("--config", help="JSON file of settings (flags take precedence)")
    p.add_argument("--out", help="output directory (default mqrif_out)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int,
                   help="worker count hint (default $MQRIF_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")


def _data(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="input CSV with a header row")
    g.add_argument("--responses", help="comma-separated response columns")
    g.add_argument("--covariates", help="comma-separated covariate columns")
    g.add_argument("--categorical", help="name=baseline,... (baseline optional)")
    g.add_argument("--log", help="columns to log-transform")
    g.add_argument("--no-intercept", dest="intercept", action="store_const", const=False)


def _model(p, cv=True):
    g = p.add_argument_group("model")
    g.add_argument("--tau", help="comma-separated levels in (0, 1)")
    g.add_argument("--direction", help="'equal-weights' or comma-separated numbers")
    g.add_argument("--c", help="Huber constant, or 'cv' for cross-validation")
    g.add_argument("--delta", type=float)
    g.add_argument("--max-iter", dest="max_iter", type=int, help="IRLS iteration cap")
    g.add_argument("--tol", type=float, help="IRLS tolerance")
    if cv:
        g.add_argument("--K", type=int, help="cross-validation folds")
        g.add_argument("--n-grid", dest="n_grid", type=int, help="number of candidate c values")
        g.add_argument("--cv-per-tau", dest="cv_per_tau", action=argparse.BooleanOptionalAction,
                       default=None, help="select c separately for each tau (default on)")


def _spline(p):
    g = p.add_argument_group("regression")
    g.add_argument("--method", choices=("linear", "spline"))
    g.add_argument("--spline-cols", dest="spline_cols", help="covariates given a B-spline basis")
    g.add_argument("--degree", type=int)
    g.add_argument("--knots", type=int, help="interior knots at covariate quantiles")


def _dgp(p):
    g = p.add_argument_group("data generator")
    g.add_argument("--kind", choices=("gaussian-linear", "contaminated", "correlated-gaussian"))
    g.add_argument("--n", type=int)
    g.add_argument("--noise-scale", dest="noise_scale", type=float)
    g.add_argument("--correlation", type=float)
    g.add_argument("--contamination-rate", dest="contamination_rate", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqrif", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mqrif {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="M-quantile, M/D/Delta matrices and RIF correlation")
    _common(p), _data(p), _model(p)
    p = sub.add_parser("upe", help="unconditional partial effects with standard errors")
    _common(p), _data(p), _model(p), _spline(p)
    p = sub.add_parser("cv", help="cross-validation path for c")
    _common(p), _data(p), _model(p)
    p = sub.add_parser("contour", help="M-quantile contour vertices and SVG plot")
    _common(p), _data(p), _model(p)
    p.add_argument("--m", type=int, help="number of directions")
    p = sub.add_parser("boot", help="pairs-bootstrap percentile intervals")
    _common(p), _data(p), _model(p), _spline(p)
    p.add_argument("--B", type=int, help="bootstrap replicates")
    p.add_argument("--level", type=float)
    p = sub.add_parser("simulate", help="write a synthetic dataset")
    _common(p), _dgp(p)
    p = sub.add_parser("coverage", help="Monte Carlo coverage of asymptotic intervals")
    _common(p), _dgp(p), _model(p, cv=False)
    p.add_argument("--reps", type=int)
    p.add_argument("--level", type=float)
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicitly given flags."""
    settings = dict(DEFAULTS)
    if args.config:
        file_vals = load_config(args.config)
        unknown = sorted(set(file_vals) - set(DEFAULTS))
        if unknown:
            raise DataError(f"unknown config key(s): {', '.join(unknown)}")
        settings.update(file_vals)
    flags = {k: v for k, v in vars(args).items() if v is not None and k in DEFAULTS}
    settings.update(flags)

    c_flag = getattr(args, "c", None)
    if c_flag is not None and c_flag != "cv" and (getattr(args, "K", None) is not None
                                                  or getattr(args, "n_grid", None) is not None):
        raise DataError("conflicting options: a numeric --c with cross-validation settings")
    if args.command == "cv" and c_flag is not None and c_flag != "cv":
        raise DataError("conflicting options: the cv command selects c itself")

    settings["tau"] = _floats(settings["tau"])
    settings["covariates"] = _split(settings["covariates"])
    settings["log"] = _split(settings["log"])
    settings["spline_cols"] = _split(settings["spline_cols"])
    settings["categorical"] = _categoricals(settings["categorical"])
    if settings["responses"] is not None:
        settings["responses"] = _split(settings["responses"])
    if settings["c"] != "cv":
        try:
            settings["c"] = float(settings["c"])
        except (TypeError, ValueError) as exc:
            raise DataError(f"--c must be a number or 'cv', got {settings['c']!r}") from exc
        if settings["c"] < 0:
            raise DataError("--c must be >= 0")
    for t in settings["tau"]:
        if not 0.0 < t < 1.0:
            raise DataError(f"tau must lie in (0, 1), got {t}")
    if settings["threads"] is None:
        settings["threads"] = int(os.environ.get("MQRIF_THREADS", "1"))
    settings["threads"] = max(1, int(settings["threads"]))
    try:
        IrlsOptions(max_iter=int(settings["max_iter"]), tol=float(settings["tol"]))
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return settings


def _versions():
    import scipy

    out = {"mqrif": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
           "python": platform.python_version()}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        pass
    from .kernels import BACKEND
    out["backend"] = BACKEND
    return out


class Run:
    """Shared state of one command invocation."""

    def __init__(self, command: str, settings: dict):
        self.command = command
        self.s = settings
        self.out = Path(settings["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.diagnostics: dict = {}
        self.failed = False
        self._cv: dict = {}
        self.opts = IrlsOptions(max_iter=settings["max_iter"], tol=settings["tol"])

    def table(self, name, header, rows):
        write_table(self.out / name, header, rows)
        self.files.append(name)

    def matrix(self, name, M, columns, row_labels=None, label_header="row"):
        write_matrix(self.out / name, M, columns, row_labels, label_header)
        self.files.append(name)

    def text(self, name, body):
        (self.out / name).write_text(body)
        self.files.append(name)

    def load(self):
        s = self.s
        if not s["data"] or not s["responses"]:
            raise DataError("--data and --responses are required")
        schema = DatasetSchema(response_columns=s["responses"], covariate_columns=s["covariates"],
                               categorical_columns=s["categorical"], log_transform=s["log"],
                               add_intercept=s["intercept"])
        ds = load_csv(s["data"], schema)
        if ds.n_dropped:
            self.diagnostics["rows_dropped"] = ds.n_dropped
        self.diagnostics["n"] = ds.n
        X, names = encode_design(ds, schema)
        return ds, X, names

    def direction(self, p):
        return resolve_direction(self.s["direction"], p)

    def choose_c(self, Y, tau, u):
        """Numeric c, or the cross-validated one (per tau unless disabled)."""
        s = self.s
        if s["c"] != "cv":
            return s["c"]
        key = tau if s["cv_per_tau"] else s["tau"][0]
        if key not in self._cv:
            res = cross_validate(Y, key, u, K=s["K"], seed=s["seed"], delta=s["delta"],
                                 n_grid=s["n_grid"], opts=self.opts, n_jobs=s["threads"])
            self._cv[key] = res
            self.table(f"cv_tau{key:g}.csv", ["c", "cv_score"], zip(res.grid, res.cv_scores))
            self.diagnostics.setdefault("cv", {})[f"{key:g}"] = {
                "c_star": res.c_star, "K": res.K, "failed_grid_values": int(res.failed.sum())}
        return self._cv[key].c_star

    def fit(self, Y, tau, u, c):
        spec = MQuantileSpec.make(tau, u, c, self.s["delta"])
        fit = fit_unconditional(Y, spec, self.opts)
        self.diagnostics.setdefault("fits", {})[f"{tau:g}"] = {
            "c": c, "iterations": fit.iterations, "eq_norm": fit.eq_norm,
            "converged": fit.converged}
        if not fit.converged:
            self.failed = True
            log.warning("tau=%g did not converge (equation norm %.3g)", tau, fit.eq_norm)
        return fit

    def finish(self):
        settings = {k: v for k, v in self.s.items() if k not in _LOCATION_KEYS}
        if settings.get("data"):
            settings["data"] = Path(settings["data"]).name
        write_manifest(self.out / "manifest.json", {
            "command": self.command, "settings": settings, "seed": self.s["seed"],
            "versions": _versions(), "diagnostics": self.diagnostics,
            "outputs": sorted(self.files)})
        return EXIT_CONVERGENCE if self.failed else EXIT_OK


def cmd_fit(run: Run):
    ds, _, _ = run.load()
    Y, names = ds.Y, ds.response_names
    u = run.direction(Y.shape[1])
    for tau in run.s["tau"]:
        c = run.choose_c(Y, tau, u)
        fit = run.fit(Y, tau, u, c)
        tag = f"fit_tau{tau:g}"
        run.matrix(f"{tag}_theta.csv", fit.theta[None, :], names)
        try:
            mats = rif_covariance(Y, fit)
        except SingularMatrixError as exc:
            run.diagnostics["fits"][f"{tau:g}"]["matrices"] = str(exc)
            continue
        for label, M in (("m_hat", mats.m_hat), ("d_hat", mats.d_hat),
                         ("delta_hat", mats.delta_hat), ("r", mats.r)):
            run.matrix(f"{tag}_{label}.csv", M, names, names, "response")
        run.diagnostics["fits"][f"{tau:g}"]["m_condition"] = mats.m_cond


def _spline_cfg(run: Run, names):
    s = run.s
    idx = []
    for col in s["spline_cols"]:
        if col not in names:
            raise DataError(f"spline column {col!r} is not a numeric design column")
        idx.append(names.index(col))
    if s["method"] == "spline" and not idx:
        raise DataError("--method spline needs --spline-cols")
    return SplineConfig(covariate_indices=tuple(idx), degree=s["degree"],
                        interior_knots=s["knots"])


def cmd_upe(run: Run):
    ds, X, xnames = run.load()
    Y, ynames = ds.Y, ds.response_names
    u = run.direction(Y.shape[1])
    cfg = _spline_cfg(run, xnames)
    p = Y.shape[1]
    pairs = [(a, b) for a in range(p) for b in range(a + 1, p)]
    corr_rows = []
    for tau in run.s["tau"]:
        c = run.choose_c(Y, tau, u)
        fit = run.fit(Y, tau, u, c)
        if run.s["method"] == "spline":
            upe = umqpe_splines(Y, X, fit, cfg)
            se = np.full_like(upe.alpha, np.nan)
        else:
            upe = umqpe_linear(Y, X, fit)
            se = upe.se
        rows = [(xn, yn, upe.alpha[i, j], se[i, j])
                for j, yn in enumerate(ynames) for i, xn in enumerate(xnames)]
        run.table(f"upe_tau{tau:g}.csv", ["covariate", "response", "estimate", "se"], rows)
        corr_rows.append([tau, c] + [upe.rif_corr[a, b] for a, b in pairs])
    run.table("rif_corr.csv", ["tau", "c"] + [f"r{a + 1}{b + 1}" for a, b in pairs], corr_rows)


def cmd_cv(run: Run):
    ds, _, _ = run.load()
    u = run.direction(ds.Y.shape[1])
    run.s["c"] = "cv"
    for tau in run.s["tau"]:
        run.choose_c(ds.Y, tau, u)


def _svg(vertices, data_box, tau):
    (x0, y0), (x1, y1) = data_box
    w = h = 480.0
    pad = 20.0
    sx = (w - 2 * pad) / max(x1 - x0, 1e-300)
    sy = (h - 2 * pad) / max(y1 - y0, 1e-300)
    pts = [(pad + (x - x0) * sx, h - pad - (y - y0) * sy) for x, y in vertices]
    if pts:
        pts.append(pts[0])
    poly = " ".join(f"{x:.3f},{y:.3f}" for x, y in pts)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:g}" height="{h:g}" '
            f'viewBox="0 0 {w:g} {h:g}">\n'
            f'  <title>M-quantile contour, tau={tau:g}</title>\n'
            f'  <rect x="0" y="0" width="{w:g}" height="{h:g}" fill="white"/>\n'
            f'  <polyline points="{poly}" fill="none" stroke="black" stroke-width="1.5"/>\n'
            f'</svg>\n')


def cmd_contour(run: Run):
    ds, _, _ = run.load()
    Y, names = ds.Y, ds.response_names
    p = Y.shape[1]
    u0 = run.direction(p)
    box = (Y.min(axis=0)[:2], Y.max(axis=0)[:2])
    for tau in run.s["tau"]:
        c = run.choose_c(Y, tau, u0)
        cs = contour(Y, tau, c, m=run.s["m"], seed=run.s["seed"], delta=run.s["delta"],
                     opts=run.opts)
        ucols = [f"u{j + 1}" for j in range(p)]
        run.matrix(f"contour_tau{tau:g}.csv",
                   np.column_stack([cs.directions, cs.vertices, cs.converged_flags]),
                   ucols + names + ["converged"])
        n_bad = int((~cs.converged_flags).sum())
        run.diagnostics.setdefault("contours", {})[f"{tau:g}"] = {"c": c, "unconverged": n_bad}
        if n_bad:
            run.failed = True
        if p == 2:
            ok = cs.vertices[cs.converged_flags]
            run.text(f"contour_tau{tau:g}.svg", _svg(ok, box, tau))


def cmd_boot(run: Run):
    ds, X, xnames = run.load()
    Y, ynames = ds.Y, ds.response_names
    u = run.direction(Y.shape[1])
    cfg = _spline_cfg(run, xnames)
    s = run.s
    for tau in s["tau"]:
        c = run.choose_c(Y, tau, u)
        fit = run.fit(Y, tau, u, c)
        if s["method"] == "spline":
            est = umqpe_splines(Y, X, fit, cfg).alpha
        else:
            est = umqpe_linear(Y, X, fit, covariance=False).alpha
        spec = MQuantileSpec.make(tau, u, c, s["delta"])
        res = bootstrap_ci(Y, X, spec, method=s["method"], B=s["B"], level=s["level"],
                           seed=s["seed"], cfg=cfg, opts=run.opts, n_jobs=s["threads"])
        rows = [(xn, yn, est[i, j], res.ci_lower[i, j], res.ci_upper[i, j], res.se_boot[i, j])
                for j, yn in enumerate(ynames) for i, xn in enumerate(xnames)]
        run.table(f"boot_tau{tau:g}.csv",
                  ["covariate", "response", "estimate", "lower", "upper", "se_boot"], rows)
        run.diagnostics.setdefault("bootstrap", {})[f"{tau:g}"] = {
            "replicates": res.replicates, "failed": res.n_failed}


def _dgp_config(s) -> DgpConfig:
    kw = dict(kind=s["kind"], n=s["n"], noise_scale=s["noise_scale"],
              correlation=s["correlation"], contamination_rate=s["contamination_rate"],
              seed=s["seed"])
    if s["coef"] is not None:
        kw["B"] = np.asarray(s["coef"], dtype=float)
    try:
        return DgpConfig(**kw)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def cmd_simulate(run: Run):
    dgp = _dgp_config(run.s)
    Y, X = simulate(dgp)
    cols = [f"y{j + 1}" for j in range(dgp.p)] + [f"x{j}" for j in range(1, dgp.k)]
    run.matrix("data.csv", np.column_stack([Y, X[:, 1:]]), cols)
    run.diagnostics["true_coef"] = dgp.B


def cmd_coverage(run: Run):
    s = run.s
    if s["c"] == "cv":
        raise DataError("coverage needs a numeric --c")
    dgp = _dgp_config(s)
    u = resolve_direction(s["direction"], dgp.p)
    rows = []
    for tau in s["tau"]:
        spec = MQuantileSpec.make(tau, u, s["c"], s["delta"])
        cov = run_coverage(dgp, spec, reps=s["reps"], level=s["level"], n_jobs=s["threads"])
        rows.append((tau, s["c"], s["level"], s["reps"], cov))
    run.table("coverage.csv", ["tau", "c", "level", "reps", "coverage"], rows)


COMMANDS = {"fit": cmd_fit, "upe": cmd_upe, "cv": cmd_cv, "contour": cmd_contour,
            "boot": cmd_boot, "simulate": cmd_simulate, "coverage": cmd_coverage}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        settings = resolve_settings(args)
        run = Run(args.command, settings)
        COMMANDS[args.command](run)
        return run.finish()
    except (DataError, DegenerateDataError, RankDeficiencyError) as exc:
        print(f"mqrif: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, SingularMatrixError) as exc:
        print(f"mqrif: numerical failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except MQRIFError as exc:
        print(f"mqrif: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValueError as exc:
        print(f"mqrif: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
