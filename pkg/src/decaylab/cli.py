"""Command-line front end: ``decaylab <task> --config <file> [--out <dir>]``.

Exit status: 0 on success, 2 for usage or configuration errors, 3 when a
numerical contract fails (quadrature, convolution self-check, probability
bounds, oracle disagreement).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import __version__, kernels
from .config import TASKS, ConfigError, Grid, format_config, parse_config
from .numerics import QuadratureConfig

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

PROFILES = {
    "strict": QuadratureConfig(),
    "fast": QuadratureConfig(abs_tol=1e-7, rel_tol=1e-6),
}


class ContractError(ArithmeticError):
    """A computed quantity broke a hard numerical bound."""


def _fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if x == 0:
        return "0"  # no signed zeros in the data files
    return f"{x:.12g}"


def write_csv(path, header, columns):
    rows = zip(*[np.asarray(c, dtype=float) for c in columns])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_meta(path, cfg, sections):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(format_config(cfg, sections))


# -- tasks ---------------------------------------------------------------------

def _support(model):
    lo = min(ch.energy_support()[0] for ch in model.channels)
    hi = max(ch.energy_support()[1] for ch in model.channels)
    return lo, hi


def _model_width(model):
    if model.__class__.__name__ == "LeeModel":
        from .lee import golden_rule_width
        return float(golden_rule_width(model)[0])
    return model.width()


def _check_probability(p):
    p = np.asarray(p)
    bad = ~((p >= 0) & (p <= 1 + 1e-9))
    if np.any(bad):
        raise ContractError(f"survival probability outside [0, 1 + 1e-9]: {p[bad][0]!r}")


def _spectral_function(cfg, model, qcfg):
    if cfg.model_type == "lee":
        from .lee import lee_spectral_function
        return lee_spectral_function(model, qcfg)
    from .qft import qft_spectral_function
    return qft_spectral_function(model, qcfg)


def task_spectral(cfg, model, qcfg):
    grid = cfg.E_grid
    if cfg.model_type == "lee":
        from .lee import find_poles, spectral_density
        lo, hi = _support(model)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            G = _model_width(model)
            lo, hi = model.M - 20 * G, model.M + 20 * G
        grid = grid or Grid(lo - 1.0, hi + 1.0, 1001)
        E = grid.values()
        d = spectral_density(model, E, qcfg)
        poles = find_poles(model, qcfg) if all(math.isfinite(v) for v in _support(model)) else []
    else:
        from .qft import find_qft_poles, qft_spectral_density
        grid = grid or Grid(0.0, 10.0 * model.M, 1001)
        E = grid.values()
        d = qft_spectral_density(model, E, qcfg)
        poles = find_qft_poles(model, qcfg)
    info = {f"pole_{i + 1}": f"E = {_fmt(p.energy)}, Z = {_fmt(p.weight)}" for i, p in enumerate(poles)}
    info["n_poles"] = str(len(poles))
    return ["E", "d_S"], [E, d], {"result": info}


def task_survive(cfg, model, qcfg):
    from .evolution import bw_decay_density, bw_survival_amplitude, survival_series
    t = (cfg.t_grid or Grid(0.0, 25.0, 501)).values()
    if cfg.model_type == "lee" and all(ch.memoryless for ch in model.channels):
        G = _model_width(model)
        a = bw_survival_amplitude(model.M, G, t)
        p = np.abs(a) ** 2
        h = bw_decay_density(G, t)
        path = "closed form"
    else:
        s = survival_series(_spectral_function(cfg, model, qcfg), t, qcfg)
        a, p, h = s.a, s.p, s.h
        path = "fourier"
    _check_probability(p)
    return ["t", "re_a", "im_a", "p", "h"], [t, a.real, a.imag, p, h], {"result": {"path": path}}


def task_channels(cfg, model, qcfg):
    t = (cfg.t_grid or Grid(0.0, 25.0, 501)).values()
    opts = cfg.task_options
    step = opts.get("step")
    conv_tol = 1e-5 if qcfg == PROFILES["strict"] else 1e-4
    if cfg.model_type == "lee":
        from .evolution import partial_decay_densities
        cd = partial_decay_densities(model, t, qcfg, step=step, conv_tol=conv_tol)
    else:
        from .qft import qft_partial_densities
        cd = qft_partial_densities(model, t, qcfg, step=step, conv_tol=conv_tol)
    _check_probability(cd.p)
    n = cd.h_channels.shape[0]
    header = ["t", "p", "h"] + [f"h{i + 1}" for i in range(n)]
    cols = [t, cd.p, cd.h] + list(cd.h_channels)
    if n >= 2:
        header.append("ratio")
        cols.append(cd.ratio)
    info = {"sum_rule_residual": _fmt(cd.sum_rule_residual()),
            "convolution_correction": _fmt(cd.correction)}
    return header, cols, {"result": info}


def task_emission(cfg, model, qcfg, out_path):
    from .emission import emission_spectrum, linewidth
    G = _model_width(model)
    M = model.M
    if not G > 0:
        raise ContractError("emission needs a positive width")
    t = (cfg.t_grid or Grid(0.1 / G, 10.0 / G, 100)).values()
    if t[0] <= 0:
        raise ConfigError("invariant", "emission times must be > 0")
    dw = np.array([linewidth(M, G, ti) for ti in t])
    t_spec = cfg.task_options.get("t", 1.0 / G)
    spec = emission_spectrum(M, G, t_spec)
    stem, ext = os.path.splitext(out_path)
    spec_path = f"{stem}_spectrum{ext or '.csv'}"
    write_csv(spec_path, ["omega", "eta"], [spec.omega, spec.eta])
    info = {"M": _fmt(M), "width": _fmt(G), "spectrum_t": _fmt(t_spec),
            "spectrum_delta_omega": _fmt(spec.delta_omega),
            "spectrum_file": os.path.basename(spec_path)}
    return ["t", "delta_omega", "delta_omega_t"], [t, dw, dw * t], {"result": info}


def task_oracle_check(cfg, model, qcfg):
    from .evolution import survival_probability
    from .lee import lee_spectral_function
    from .oracle import comparison_window, discretize, evolve_exact

    if cfg.model_type != "lee":
        raise ConfigError("invariant", "oracle-check needs a lee model")
    opts = cfg.task_options
    lo, hi = (min(ch.form_factor.support()[0] for ch in model.channels),
              max(ch.form_factor.support()[1] for ch in model.channels))
    k_lo = opts.get("k_lo", lo - 1.0)
    k_hi = opts.get("k_hi", hi + 1.0)
    dm = discretize(model, opts.get("n_modes", 4000), (k_lo, k_hi))
    grid = cfg.t_grid or Grid(0.0, 10.0, 201)
    t = grid.values()
    t = t[t <= comparison_window(dm, grid.stop) * (1 + 1e-12)]
    p_or = evolve_exact(dm, t).p
    p_co = survival_probability(lee_spectral_function(model, qcfg), t, qcfg)
    _check_probability(p_co)
    diff = np.abs(p_co - p_or)
    tol = opts.get("tolerance", 1e-3)
    info = {"max_abs_dp": _fmt(diff.max()), "t_compared": _fmt(t[-1]), "tolerance": _fmt(tol),
            "n_modes": str(dm.n_modes), "k_range": f"{_fmt(k_lo)}, {_fmt(k_hi)}",
            "passed": "yes" if diff.max() <= tol else "no"}
    return ["t", "p_continuum", "p_oracle", "abs_dp"], [t, p_co, p_or, diff], {"result": info}


# -- driver --------------------------------------------------------------------

def run(cfg, task, out_dir=".", profile="strict"):
    """Execute ``task``; returns ``(exit_status, data_path)``."""
    qcfg = PROFILES[profile]
    try:
        model = cfg.build_model()
    except ValueError as exc:
        raise ConfigError("invariant", str(exc)) from None
    name = cfg.output_path or f"{task}.csv"
    path = os.path.join(out_dir, name)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if task == "spectral":
        header, cols, meta = task_spectral(cfg, model, qcfg)
    elif task == "survive":
        header, cols, meta = task_survive(cfg, model, qcfg)
    elif task == "channels":
        header, cols, meta = task_channels(cfg, model, qcfg)
    elif task == "emission":
        header, cols, meta = task_emission(cfg, model, qcfg, path)
    else:
        header, cols, meta = task_oracle_check(cfg, model, qcfg)
    write_csv(path, header, cols)
    meta["run"] = {"task": task, "tolerance_profile": profile, "abs_tol": _fmt(qcfg.abs_tol),
                   "rel_tol": _fmt(qcfg.rel_tol), "backend": kernels.BACKEND,
                   "version": __version__, "columns": ", ".join(header)}
    write_meta(path + ".meta", cfg, meta)
    status = EXIT_OK
    if meta["result"].get("passed") == "no":
        status = EXIT_NUMERIC
    return status, path


def build_parser():
    p = argparse.ArgumentParser(prog="decaylab", description=__doc__.splitlines()[0])
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", required=True, help="sectioned key = value run file")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--tolerance-profile", choices=sorted(PROFILES), default="strict")
    p.add_argument("--version", action="version", version=f"decaylab {__version__}")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"decaylab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
        if cfg.task is not None and cfg.task != args.task:
            raise ConfigError("invariant", f"config is for task {cfg.task!r}, "
                              f"command line asks for {args.task!r}")
        status, path = run(cfg, args.task, args.out, args.tolerance_profile)
    except ConfigError as exc:
        print(f"decaylab: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        mod = type(exc).__module__.replace("decaylab.", "")
        print(f"decaylab: {args.task} failed in {mod}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if status != EXIT_OK:
        print(f"decaylab: {args.task}: check failed, see {path}.meta", file=sys.stderr)
    else:
        print(path)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
