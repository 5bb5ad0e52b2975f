"""Command-line driver.

Parameters are resolved from built-in defaults, then an optional flat
``key = value`` config file, then command-line flags (flags win). Every run
writes ``trajectory.csv``, ``run_meta`` and ``plot.gp`` into the output
directory. Exit status: 0 success, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import two_level as tl
from .operators import EigensolverFailure, NotADensityMatrix
from .oscillator import OscillatorParams, equilibrium_p2, quench_experiment
from .solvers import DEFAULT_DT, SolverConfig, SolverError

CSV_SCHEMA_VERSION = 1

EXPERIMENTS = ("two_level_relax", "oscillator_quench", "mu_table", "bloch_jacobian")
VALID_EQUATIONS = {
    "two_level_relax": ("thermodynamic", "linearized", "lindblad_bloch"),
    "oscillator_quench": ("thermodynamic", "linearized", "caldeira_leggett"),
    "mu_table": ("thermodynamic",),
    "bloch_jacobian": ("thermodynamic",),
}

DEFAULTS = {
    "experiment": "oscillator_quench",
    "equation": "thermodynamic",
    "kT0": 1.5,
    "kTe": 0.5,
    "zeta_over_m_omega": 0.1,
    "gamma0": 0.1,
    "omega": 1.0,
    "mass": 1.0,
    "n_states": 10,
    "dt": DEFAULT_DT,
    "t_end": None,
    "method": "direct",
    "record_stride": 10,
    "output_dir": "out",
    "seed": 0,
    "m0": "0.8,0.0,-0.3",
    "isotropic": False,
    "q3_weight": 1.0,
    "mu_points": 1000,
}

FLOAT_KEYS = {"kT0", "kTe", "zeta_over_m_omega", "gamma0", "omega", "mass", "dt", "t_end", "q3_weight"}
INT_KEYS = {"n_states", "record_stride", "seed", "mu_points"}
BOOL_KEYS = {"isotropic"}


class ConfigError(ValueError):
    pass


def _normalize_key(key):
    return key.strip().lstrip("-").replace("-", "_")


def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in FLOAT_KEYS:
            return None if str(value).lower() == "none" else float(value)
        if key in INT_KEYS:
            return int(value)
        if key in BOOL_KEYS:
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("1", "true", "yes", "on"):
                return True
            if str(value).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
    except ValueError:
        raise ConfigError(f"invalid value {value!r} for {key}") from None
    return str(value)


def parse_overrides(items, source):
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"{source}: expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = _normalize_key(key)
        if key not in DEFAULTS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip())
    return out


def read_config_file(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    items = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            items.append(line)
    return parse_overrides(items, str(path))


def build_parser():
    ap = argparse.ArgumentParser(prog="tqme", description="Thermodynamic quantum master equation experiments.")
    ap.add_argument("--experiment", choices=EXPERIMENTS)
    ap.add_argument("--equation", choices=("thermodynamic", "linearized", "caldeira_leggett", "lindblad_bloch"))
    ap.add_argument("--kT0", type=float, help="initial temperature kT0 / (hbar omega)")
    ap.add_argument("--kTe", type=float, help="bath temperature kTe / (hbar omega)")
    ap.add_argument("--zeta-over-m-omega", type=float, dest="zeta_over_m_omega")
    ap.add_argument("--gamma0", type=float, help="spontaneous emission rate (units of omega)")
    ap.add_argument("--omega", type=float)
    ap.add_argument("--mass", type=float)
    ap.add_argument("--n-states", type=int, dest="n_states", help="number of oscillator basis states (N + 1)")
    ap.add_argument("--dt", type=float)
    ap.add_argument("--t-end", type=float, dest="t_end")
    ap.add_argument("--method", choices=("direct", "eigensystem"))
    ap.add_argument("--record-stride", type=int, dest="record_stride")
    ap.add_argument("--output-dir", dest="output_dir")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--m0", help="initial Bloch vector, comma separated")
    ap.add_argument("--isotropic", action="store_const", const=True)
    ap.add_argument("--q3-weight", type=float, dest="q3_weight")
    ap.add_argument("--mu-points", type=int, dest="mu_points")
    ap.add_argument("--config", help="flat key=value config file")
    ap.add_argument("--sweep", help="file with one line of key=value overrides per run")
    return ap


def resolve(args):
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def validate(cfg):
    exp = cfg["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}")
    if cfg["equation"] not in VALID_EQUATIONS[exp]:
        raise ConfigError(f"equation {cfg['equation']!r} is not valid for experiment {exp!r}; "
                          f"choose from {VALID_EQUATIONS[exp]}")
    if cfg["method"] not in ("direct", "eigensystem"):
        raise ConfigError(f"unknown method {cfg['method']!r}")
    for key in ("kT0", "kTe", "omega", "mass", "dt"):
        if not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if cfg["t_end"] is not None and cfg["t_end"] < 0:
        raise ConfigError("t_end must be non-negative")
    if cfg["n_states"] < 2:
        raise ConfigError("n_states must be at least 2")
    if cfg["record_stride"] < 1:
        raise ConfigError("record_stride must be positive")
    if cfg["gamma0"] < 0 or cfg["zeta_over_m_omega"] < 0:
        raise ConfigError("couplings must be non-negative")
    try:
        m0 = np.array([float(x) for x in str(cfg["m0"]).split(",")])
    except ValueError:
        raise ConfigError(f"m0 must be three comma-separated numbers, got {cfg['m0']!r}") from None
    if m0.shape != (3,) or np.linalg.norm(m0) > 1.0:
        raise ConfigError("m0 must be a 3-vector inside the Bloch sphere")
    return cfg


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, columns, table):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in table:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_meta(path, meta):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")


def _solver(cfg, t_end_default):
    t_end = cfg["t_end"] if cfg["t_end"] is not None else t_end_default
    return SolverConfig(dt=cfg["dt"], t_end=t_end, method=cfg["method"], record_stride=cfg["record_stride"])


def _trajectory_table(traj):
    names = traj.names
    cols = ["time"] + names
    table = np.column_stack([traj.times] + [traj[n] for n in names])
    return cols, table


def run_oscillator(cfg):
    p = OscillatorParams(N=cfg["n_states"] - 1, mass=cfg["mass"], omega=cfg["omega"],
                         zeta=cfg["zeta_over_m_omega"] * cfg["mass"] * cfg["omega"],
                         kT0=cfg["kT0"] * cfg["omega"], kTe=cfg["kTe"] * cfg["omega"])
    solver = _solver(cfg, 80.0 / cfg["omega"])
    traj = quench_experiment(p, cfg["equation"], solver)
    cols, table = _trajectory_table(traj)
    extra = {
        "p2_exact_equilibrium": _fmt(equilibrium_p2(p)),
        "p2_classical_equilibrium": _fmt(p.mass * p.kTe),
        "N": p.N,
        "zeta": _fmt(p.zeta),
        "t_end": _fmt(solver.t_end),
        "fallback_steps": traj.meta.get("fallback_steps", 0),
    }
    return cols, table, extra, _plot_oscillator(cols, extra)


def run_two_level(cfg):
    p = tl.TwoLevelParams(omega=cfg["omega"], gamma0=cfg["gamma0"] * cfg["omega"], kT=cfg["kTe"] * cfg["omega"],
                          isotropic=cfg["isotropic"], q3_weight=cfg["q3_weight"])
    m0 = [float(x) for x in str(cfg["m0"]).split(",")]
    solver = _solver(cfg, 10.0 / max(p.gamma0, 1e-12))
    traj = tl.relaxation_experiment(p, m0, cfg["equation"], solver)
    cols, table = _trajectory_table(traj)
    extra = {
        "m_eq_3": _fmt(tl.bloch_equilibrium(p)[2]),
        "hbar_omega_over_2kT": _fmt(p.x),
        "t_end": _fmt(solver.t_end),
    }
    return cols, table, extra, _plot_two_level(cols)


def run_mu_table(cfg):
    n = cfg["mu_points"]
    m = np.linspace(0.0, 0.999, n)
    table = np.column_stack([m, tl.mu(m)])
    return ["m", "mu"], table, {"m_max": _fmt(0.999)}, _plot_mu()


def run_bloch_jacobian(cfg):
    xs = np.linspace(0.05, 3.0, 60)
    rows = []
    for x in xs:
        p = tl.TwoLevelParams(omega=cfg["omega"], gamma0=cfg["gamma0"] * cfg["omega"],
                              kT=cfg["omega"] / (2.0 * x), isotropic=cfg["isotropic"], q3_weight=cfg["q3_weight"])
        J = tl.bloch_linearized_matrix(p)
        ev = np.linalg.eigvals(J)
        ev = ev[np.lexsort((ev.imag, ev.real))]
        rows.append([x, *J.ravel(), *ev.real, *ev.imag])
    cols = (["x"] + [f"J{i + 1}{j + 1}" for i in range(3) for j in range(3)]
            + [f"eig_re_{k}" for k in range(3)] + [f"eig_im_{k}" for k in range(3)])
    return cols, np.array(rows), {}, _plot_jacobian()


def _col(cols, name):
    return cols.index(name) + 1


def _plot_oscillator(cols, extra):
    t = _col(cols, "time")
    lines = [
        "set datafile separator ','",
        "set multiplot layout 2,1",
        "set xlabel 'omega t'",
        "set ylabel '<P^2> / (hbar omega m)'",
        f"plot 'trajectory.csv' using {t}:{_col(cols, 'p2')} with lines lw 2 title '<P^2>', \\",
        f"     {extra['p2_exact_equilibrium']} with lines dt 2 lw 2 title 'exact equilibrium', \\",
        f"     {extra['p2_classical_equilibrium']} with lines dt 2 title 'm kT_e'",
        "set ylabel '|<j|pi_j>|'",
        "plot " + ", \\\n     ".join(
            f"'trajectory.csv' using {t}:{_col(cols, name)} with lines title 'j={name[-1]}'"
            for name in cols if name.startswith("overlap_")),
        "unset multiplot",
    ]
    return "\n".join(lines) + "\n"


def _plot_two_level(cols):
    t = _col(cols, "time")
    series = ", \\\n     ".join(f"'trajectory.csv' using {t}:{_col(cols, n)} with lines title '{n}'"
                                for n in ("m1", "m2", "m3", "m_norm"))
    return "\n".join(["set datafile separator ','", "set xlabel 'omega t'", "set ylabel 'Bloch vector'",
                      "plot " + series]) + "\n"


def _plot_mu():
    return "\n".join([
        "set datafile separator ','",
        "set xlabel 'm'",
        "set ylabel 'mu(m)'",
        "set xrange [0:1]",
        "plot 'trajectory.csv' using 1:2 with lines lw 2 notitle",
    ]) + "\n"


def _plot_jacobian():
    return "\n".join([
        "set datafile separator ','",
        "set xlabel 'hbar omega / 2 kT'",
        "set ylabel 'Re eigenvalue / gamma0'",
        "plot for [k=11:13] 'trajectory.csv' using 1:k with lines title columnheader(k)",
    ]) + "\n"


RUNNERS = {
    "oscillator_quench": run_oscillator,
    "two_level_relax": run_two_level,
    "mu_table": run_mu_table,
    "bloch_jacobian": run_bloch_jacobian,
}


def run(cfg):
    """Execute one validated configuration; returns the exit status."""
    out = Path(cfg["output_dir"])
    try:
        np.random.seed(cfg["seed"])
        cols, table, extra, plot = RUNNERS[cfg["experiment"]](cfg)
    except (SolverError, NotADensityMatrix, EigensolverFailure, FloatingPointError) as exc:
        print(f"tqme: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"tqme: configuration error: {exc}", file=sys.stderr)
        return 1
    if not np.all(np.isfinite(table)):
        print("tqme: numerical failure (non-finite values in trajectory)", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "trajectory.csv", cols, table)
    meta = {"code_version": __version__, "csv_schema_version": CSV_SCHEMA_VERSION,
            "columns": ",".join(cols), "kernel_backend": kernels.BACKEND}
    meta.update({k: ("" if v is None else v) for k, v in cfg.items()})
    meta.update(extra)
    write_meta(out / "run_meta", meta)
    (out / "plot.gp").write_text(plot, encoding="utf-8")
    return 0


def _run_sweep_entry(cfg):
    return cfg["output_dir"], run(cfg)


def run_sweep(base, path):
    try:
        lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    except OSError as exc:
        raise ConfigError(f"cannot read sweep file {path}: {exc}") from None
    configs = []
    for i, line in enumerate(ln for ln in lines if ln):
        cfg = dict(base)
        cfg.update(parse_overrides(line.split(), f"{path} run {i}"))
        cfg["output_dir"] = os.path.join(base["output_dir"], f"run_{i:03d}")
        configs.append(validate(cfg))
    if not configs:
        raise ConfigError(f"sweep file {path} defines no runs")
    workers = min(len(configs), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_run_sweep_entry, configs))
    for out, status in results:
        print(f"{out}: exit {status}")
    return max(status for _, status in results)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = validate(resolve(args))
        if args.sweep:
            return run_sweep(cfg, args.sweep)
        return run(cfg)
    except ConfigError as exc:
        print(f"tqme: configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
