"""Command-line entry point.

Settings come from built-in defaults, then an optional ``key = value`` file
(``--config``), then command-line flags; later sources win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import grid
from .characteristics import compute_phi, evaluate_p
from .errors import AgingFluidError, ConfigurationError
from .experiments import default_config, run_experiment, three_way_comparison, write_csv
from .initial import InitialDensity, StationaryInitial, TruncatedGaussian, UniformInterval
from .kernel import alternate_rate, kernel_k, sharp_rate_b
from .macro import Scheme, integrate_mac1, integrate_mac2
from .model import Constant, LinearRamp, ModelParams, ShearProfile, TimeScaled, steady_observables
from .pdmp import PdmpConfig, estimate

logger = logging.getLogger("agingfluid")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_COMPARE = 4

DEFAULTS: dict[str, Any] = {
    "sigma_c": 2.0,
    "m_sigma": 10.0,
    "n_cells": 4000,
    "dt": 5e-3,
    "t_end": 40.0,
    "profile": "constant:1",
    "epsilon": None,
    "seed": 20240607,
    "out": "results",
    "paper_scale": False,
    "jobs": 1,
    "initial": "gaussian",
    "omega": "1",
    "n_paths": 100_000,
    "n_samples": 40,
    "scheme": "mac2",
    "theta_end": 1.0,
    "dtheta": None,
    "stepping": "aligned",
}

CASTS: dict[str, Callable[[str], Any]] = {
    "sigma_c": float,
    "m_sigma": float,
    "n_cells": int,
    "dt": float,
    "t_end": float,
    "epsilon": float,
    "seed": int,
    "jobs": int,
    "n_paths": int,
    "n_samples": int,
    "theta_end": float,
    "dtheta": float,
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def read_config(path: str | Path) -> dict[str, Any]:
    """Parse a ``key = value`` file; ``#`` starts a comment, dashes in keys become underscores."""
    out: dict[str, Any] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _cast(key, value)
    return out


def _cast(key: str, value: str) -> Any:
    if key == "paper_scale":
        return _parse_bool(value)
    cast = CASTS.get(key)
    if cast is None:
        return value
    try:
        return cast(value)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {value!r}") from exc


def parse_profile(text: str) -> ShearProfile:
    """``constant:<rate>`` or ``ramp:<slope>``."""
    kind, _, arg = text.partition(":")
    try:
        value = float(arg)
    except ValueError as exc:
        raise ConfigurationError(f"bad profile {text!r}; use constant:<v> or ramp:<a>") from exc
    if kind == "constant":
        return Constant(value)
    if kind == "ramp":
        return LinearRamp(value)
    raise ConfigurationError(f"unknown profile kind {kind!r}; use constant or ramp")


def parse_initial(text: str, sigma_c: float, m_sigma: float) -> InitialDensity:
    """``gaussian``, ``uniform:<lo>,<hi>`` or ``stationary:<rate>``."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "gaussian":
            return TruncatedGaussian(m_sigma)
        if kind == "uniform":
            lo, hi = (float(v) for v in arg.split(","))
            return UniformInterval(lo, hi)
        if kind == "stationary":
            return StationaryInitial(float(arg), sigma_c)
    except ValueError as exc:
        raise ConfigurationError(f"bad initial datum {text!r}") from exc
    raise ConfigurationError(f"unknown initial datum {text!r}; use gaussian, uniform:<lo>,<hi> or stationary:<rate>")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad number list {text!r}") from exc


def _fast_profile(opts: dict) -> ShearProfile:
    """The profile in fast time, slowed by ``epsilon`` when given."""
    prof = parse_profile(opts["profile"])
    return prof if opts["epsilon"] is None else TimeScaled(prof, opts["epsilon"])


def _params(opts: dict) -> ModelParams:
    return ModelParams(
        sigma_c=opts["sigma_c"], m_sigma=opts["m_sigma"], n_cells=opts["n_cells"],
        dt=opts["dt"], t_end=opts["t_end"],
    )


def _out(opts: dict) -> Path:
    return Path(opts["out"])


def _report(files) -> None:
    for f in files:
        print(f)


def cmd_steady(opts: dict) -> int:
    prof = parse_profile(opts["profile"])
    if not isinstance(prof, Constant):
        raise ConfigurationError("steady needs a constant profile")
    s = steady_observables(prof.value, opts["sigma_c"])
    row = (prof.value, opts["sigma_c"], s.f_inf, s.tau_inf, s.beta_inf, s.kappa)
    _report([write_csv(_out(opts) / "steady.csv", ("gamma_inf", "sigma_c", "f_inf", "tau_inf", "beta_inf", "kappa"), [row])])
    return EXIT_OK


def cmd_evolve(opts: dict) -> int:
    params = _params(opts)
    p0 = parse_initial(opts["initial"], params.sigma_c, params.m_sigma)
    res = grid.run(params, p0, _fast_profile(opts), stepping=opts["stepping"])
    header = ("t", "f", "tau", "beta", "mass", "min_value")
    rows = [[getattr(o, k) for k in header] for o in res.series.samples]
    files = [
        write_csv(_out(opts) / "timeseries.csv", header, rows),
        write_csv(_out(opts) / "density.csv", ("sigma", "p"), zip(res.field.sigma, res.field.values)),
    ]
    _report(files)
    return EXIT_OK


def cmd_characteristics(opts: dict) -> int:
    params = _params(opts)
    p0 = parse_initial(opts["initial"], params.sigma_c, params.m_sigma)
    table = compute_phi(params.t_end, p0, _fast_profile(opts), params.sigma_c)
    geom = grid.GridGeometry.from_params(params)
    dens = evaluate_p(params.t_end, geom.centers, table)
    files = [
        write_csv(_out(opts) / "phi.csv", ("t", "phi", "direct"), zip(table.t, table.phi, table.direct)),
        write_csv(_out(opts) / "density_characteristics.csv", ("sigma", "p"), zip(geom.centers, dens)),
    ]
    _report(files)
    return EXIT_OK


def cmd_kernel(opts: dict) -> int:
    files = []
    for omega in _float_list(opts["omega"]):
        table = kernel_k(omega, opts["t_end"])
        files.append(
            write_csv(_out(opts) / f"kernel_omega{omega:g}.csv", ("t", "k", "k_minus_limit"),
                      zip(table.t, table.k, table.k - table.limit))
        )
    _report(files)
    return EXIT_OK


def cmd_rate(opts: dict) -> int:
    rows = []
    for omega in _float_list(opts["omega"]):
        r = sharp_rate_b(omega)
        a = alternate_rate(omega)
        rows.append((omega, r.b, a.b_tilde, a.c0, r.residual, r.complex_residual))
    header = ("omega", "sharp_b", "alternate_b", "alternate_c0", "scan_residual", "complex_residual")
    _report([write_csv(_out(opts) / "sharp_rates.csv", header, rows)])
    return EXIT_OK


def cmd_macro(opts: dict) -> int:
    if opts["epsilon"] is None:
        raise ConfigurationError("macro needs --epsilon")
    prof = parse_profile(opts["profile"])
    scheme = Scheme(opts["scheme"])
    common = dict(theta_end=opts["theta_end"], dtheta=opts["dtheta"], sigma_c=opts["sigma_c"])
    if scheme is Scheme.MAC1:
        traj = integrate_mac1(opts["epsilon"], prof, **common)
        rows = zip(traj.theta, traj.tau, np.full(traj.theta.size, np.nan))
    else:
        traj = integrate_mac2(opts["epsilon"], prof, kappa_mode=scheme, **common)
        rows = zip(traj.theta, traj.tau, traj.f)
    _report([write_csv(_out(opts) / f"macro_{scheme.value}.csv", ("theta", "tau", "f"), rows)])
    return EXIT_OK


def cmd_pdmp(opts: dict) -> int:
    params = _params(opts)
    p0 = parse_initial(opts["initial"], params.sigma_c, params.m_sigma)
    cfg = PdmpConfig(opts["n_paths"], opts["seed"], _fast_profile(opts), params.sigma_c, params.t_end, p0)
    times = np.linspace(0.0, params.t_end, opts["n_samples"] + 1)[1:]
    est = estimate(cfg, times, jobs=opts["jobs"])
    header = ("t", "f_hat", "f_se", "tau_hat", "tau_se", "n_paths")
    _report([write_csv(_out(opts) / "pdmp.csv", header, [[getattr(e, k) for k in header] for e in est])])
    return EXIT_OK


def cmd_experiment(opts: dict, tag: str, explicit: set[str]) -> int:
    cfg = default_config(tag, paper_scale=opts["paper_scale"], out_dir=_out(opts))
    overrides = {k: opts[k] for k in ("sigma_c", "m_sigma", "n_cells", "t_end") if k in explicit}
    if overrides:
        cfg = replace(cfg, params=replace(cfg.params, **overrides))
    cfg = replace(cfg, jobs=opts["jobs"])
    if "epsilon" in explicit:
        cfg = replace(cfg, epsilons=(opts["epsilon"],))
    summary = run_experiment(cfg)
    _report(summary.files)
    for member, message in summary.failures:
        print(f"failed member {member:g}: {message}", file=sys.stderr)
    return EXIT_SOLVER if summary.failures else EXIT_OK


def cmd_compare(opts: dict, explicit: set[str]) -> int:
    params = ModelParams(sigma_c=2.0, m_sigma=10.0, n_cells=4000, t_end=5.0)
    overrides = {k: opts[k] for k in ("sigma_c", "m_sigma", "n_cells", "t_end") if k in explicit}
    params = replace(params, **overrides)
    report = three_way_comparison(params, n_paths=opts["n_paths"], seed=opts["seed"], jobs=opts["jobs"])
    rows = [(name, value, tol, "PASS" if ok else "FAIL") for name, value, tol, ok in report.checks]
    _report([write_csv(_out(opts) / "compare.csv", ("check", "value", "tolerance", "status"), rows)])
    for name, value, tol, status in rows:
        print(f"{status} {name} = {value:.6g} ({tol})")
    return EXIT_OK if report.passed else EXIT_COMPARE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    S = argparse.SUPPRESS
    add("--sigma-c", type=float, default=S, help="stress threshold")
    add("--m-sigma", type=float, default=S, help="half-width of the periodic stress domain")
    add("--n-cells", type=int, default=S, help="target number of grid cells")
    add("--dt", type=float, default=S, help="outer time step for fixed stepping")
    add("--t-end", type=float, default=S, help="final time")
    add("--profile", default=S, help="shear rate: constant:<v> or ramp:<a>")
    add("--epsilon", type=float, default=S, help="time-scale separation")
    add("--seed", type=int, default=S, help="master random seed")
    add("--out", default=S, help="output directory")
    add("--config", default=S, help="key = value settings file")
    add("--paper-scale", action="store_true", default=S, help="use the fine grid and full sweeps")
    add("--jobs", type=int, default=S, help="maximum parallel workers")
    add("--initial", default=S, help="initial datum: gaussian, uniform:<lo>,<hi> or stationary:<rate>")
    add("--omega", default=S, help="delay, or comma-separated delays")
    add("--n-paths", type=int, default=S, help="Monte Carlo ensemble size")
    add("--n-samples", type=int, default=S, help="number of Monte Carlo sample times")
    add("--scheme", choices=[s.value for s in Scheme], default=S, help="closure scheme")
    add("--theta-end", type=float, default=S, help="final slow time for closures")
    add("--dtheta", type=float, default=S, help="slow-time step for closures")
    add("--stepping", choices=["aligned", "fixed"], default=S, help="grid time stepping")
    add("-v", "--verbose", action="store_true", default=S, help="log progress")

    parser = argparse.ArgumentParser(prog="agingfluid", description="Kinetic fluidity model solvers and studies.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "steady": "closed-form equilibrium observables",
        "evolve": "finite-volume run of the kinetic equation",
        "characteristics": "renewal solution along characteristics",
        "kernel": "fundamental solution of the delay equation",
        "rate": "sharp and alternate convergence rates",
        "macro": "slow-time closure trajectory",
        "pdmp": "Monte Carlo ensemble of the jump process",
        "compare": "grid vs characteristics vs Monte Carlo check",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    exp = sub.add_parser("experiment", parents=[common], help="run study i, ii or iii")
    exp.add_argument("tag", choices=["i", "ii", "iii"])
    return parser


def resolve_options(ns: argparse.Namespace) -> tuple[dict[str, Any], set[str]]:
    """Merge defaults, config file and flags; also return the keys set explicitly."""
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "tag", "config", "verbose")}
    file_opts = read_config(ns.config) if getattr(ns, "config", None) else {}
    opts = {**DEFAULTS, **file_opts, **given}
    return opts, set(file_opts) | set(given)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        opts, explicit = resolve_options(ns)
        if ns.command == "experiment":
            return cmd_experiment(opts, ns.tag, explicit)
        if ns.command == "compare":
            return cmd_compare(opts, explicit)
        handler = {
            "steady": cmd_steady,
            "evolve": cmd_evolve,
            "characteristics": cmd_characteristics,
            "kernel": cmd_kernel,
            "rate": cmd_rate,
            "macro": cmd_macro,
            "pdmp": cmd_pdmp,
        }[ns.command]
        return handler(opts)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AgingFluidError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
