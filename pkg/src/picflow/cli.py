"""Command-line experiment runner.

Subcommands: ``check``, ``flow``, ``invariance``, ``tau``, ``models emit``,
``bryant`` and ``compare``.  Reports are JSON (to ``--out`` or stdout); the
experiment commands also write per-sample rows as CSV next to the report.
Exit status is 0 on success with no violations, 1 when an experiment finds
violations or a failed bound, 2 on configuration errors.

The only environment variable read is ``PICFLOW_THREADS`` (worker count for
sample loops).
"""

import argparse
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import cones, fourd, io, models
from .errors import ConfigError, PicflowError
from .isotropic import MODES, min_isotropic, uniform_pic_theta
from .tensor import MAX_DIM, MIN_DIM, frobenius_norm, scalar

SEED_MAX = 2 ** 64
MODEL_NAMES = ("sphere", "cylinder", "shrinking-cylinder", "C2", "CxCP1", "CP1xCP1", "CP2", "bryant")

INVARIANCE_COLUMNS = ("index", "scalar0", "t_end", "reason", "steps", "min_margin",
                      "scalar_monotone", "violation")
TAU_COLUMNS = ("index", "tau")
FLOW_COLUMNS = ("t", "scalar", "norm", "psd_min_eigenvalue")
SWEEP_COLUMNS = ("index", "u0", "C", "Ar", "delta", "min_gap", "bound_ok")


@dataclass
class ExperimentConfig:
    """Validated settings of one CLI invocation."""

    command: str
    dim: int = None
    cone: str = None
    samples: int = None
    seed: int = 0
    horizon_scale: float = 10.0
    tolerance: float = 1e-10
    out: str = None
    extra: dict = field(default_factory=dict)


# --- validation -------------------------------------------------------------

def _check_dim(value, flag="--dim", lo=MIN_DIM):
    if value is None or not (lo <= value <= MAX_DIM):
        raise ConfigError(flag, f"must be an integer in [{lo}, {MAX_DIM}], got {value!r}")
    return value


def _check_positive(value, flag):
    if value is None or not (value > 0) or not np.isfinite(value):
        raise ConfigError(flag, f"must be a positive number, got {value!r}")
    return value


def _check_seed(value):
    if not (0 <= value < SEED_MAX):
        raise ConfigError("--seed", f"must be an unsigned 64-bit integer, got {value!r}")
    return value


def _check_samples(value):
    if value is None or value < 1:
        raise ConfigError("--samples", f"must be >= 1, got {value!r}")
    return value


def _check_cone(name):
    if name not in cones.CONE_NAMES:
        raise ConfigError("--cone", f"unknown cone {name!r}; choose from {', '.join(cones.CONE_NAMES)}")
    return name


def _check_tolerance(value):
    if value is None or not (0 < value <= 1e-2):
        raise ConfigError("--tolerance", f"must lie in (0, 1e-2], got {value!r}")
    return value


def _check_out_dir(path, flag="--out"):
    if path is None:
        return None
    d = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(d):
        raise ConfigError(flag, f"directory {d!r} does not exist")
    return path


def _load(loader, path, flag):
    try:
        return loader(path)
    except FileNotFoundError:
        raise ConfigError(flag, f"file {path!r} not found") from None
    except (ValueError, PicflowError, KeyError, TypeError) as exc:
        raise ConfigError(flag, f"cannot read {path!r}: {exc}") from None


def csv_path(out):
    root, ext = os.path.splitext(out)
    return (root if ext == ".json" else out) + ".csv"


# --- report builders --------------------------------------------------------

def check_report(Rm, budget=8, seed=0):
    """Condition memberships and invariants of one tensor."""
    rep = {"n": Rm.n, "scalar": scalar(Rm), "norm": frobenius_norm(Rm), "isotropic": {}}
    for mode in MODES:
        rep["isotropic"][mode] = min_isotropic(Rm, mode, budget=budget, seed=seed).to_dict()
    rep["psd"] = fourd.psd_curvature_operator(Rm)
    if Rm.n == 4:
        rep["blocks"] = fourd.block_decomp(Rm).to_dict()
        rep["pinching"] = fourd.pinching_report(Rm)
    elif rep["scalar"] > 0:
        rep["uniform_pic_theta"] = uniform_pic_theta(Rm, budget=budget, seed=seed)
    return rep


def flow_report(Rm, horizon, tolerance, samples):
    traj = cones.integrate_hamilton_ode(Rm, horizon, rel_tol=tolerance, abs_tol=tolerance * 1e-2)
    ts = np.linspace(0.0, traj.end_time, samples + 1)
    rows = []
    for t in ts:
        T = traj.at(t)
        rows.append({"t": float(t), "scalar": scalar(T), "norm": frobenius_norm(T),
                     "psd_min_eigenvalue": fourd.psd_curvature_operator(T)["min_eigenvalue"]})
    rep = {"n": Rm.n, "horizon": horizon, "tolerance": tolerance, "reason": traj.reason,
           "end_time": traj.end_time, "accepted": traj.accepted, "rejected": traj.rejected,
           "final": io.tensor_to_dict(traj.tensors[-1])}
    return rep, rows


def comparison_sweep(cases, seed, horizon=10.0):
    """Sweep of (C, Ar, u0) with u0 in [-1000, 0]; the first case has u0 = 0."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(cases):
        C = float(rng.uniform(0.1, 10.0))
        Ar = float(rng.uniform(0.1, 5.0))
        u0 = 0.0 if i == 0 else -float(10 ** rng.uniform(-3, 3))
        r = cones.comparison_ode(u0, C, Ar, 1.0, horizon)
        rows.append({"index": i, "u0": u0, "C": C, "Ar": Ar, "delta": 1.0,
                     "min_gap": r["min_gap"], "bound_ok": r["bound_ok"]})
    rep = {"cases": cases, "seed": seed, "horizon": horizon,
           "all_ok": all(r["bound_ok"] for r in rows),
           "min_gap": min(r["min_gap"] for r in rows)}
    return rep, rows


# --- argument parsing -------------------------------------------------------

def _uint(text):
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="picflow", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help="report path (JSON); CSV rows go next to it")
        sp.add_argument("--timing", action="store_true",
                        help="also write runtimes to <out>.timing.json")
        if seed:
            sp.add_argument("--seed", type=_uint, default=0)

    sp = sub.add_parser("check", help="condition memberships of one tensor")
    sp.add_argument("--in", dest="input", help="tensor JSON")
    sp.add_argument("--warped", help="warped metric JSON")
    sp.add_argument("--node", type=int, help="grid node of --warped")
    sp.add_argument("--budget", type=int, default=8)
    common(sp)

    sp = sub.add_parser("flow", help="integrate dRm/dt = Q(Rm)")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--horizon-scale", type=float, default=10.0)
    sp.add_argument("--tolerance", type=float, default=1e-10)
    sp.add_argument("--samples", type=int, default=20)
    common(sp, seed=False)

    sp = sub.add_parser("invariance", help="cone invariance experiment")
    sp.add_argument("--cone", required=True)
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--horizon-scale", type=float, default=10.0)
    sp.add_argument("--tolerance", type=float, default=1e-10)
    common(sp)

    sp = sub.add_parser("tau", help="transversality constant estimate")
    sp.add_argument("--cone", required=True)
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--samples", type=int, default=50)
    common(sp)

    sp = sub.add_parser("models", help="model geometries")
    msub = sp.add_subparsers(dest="action", required=True)
    em = msub.add_parser("emit", help="write a model tensor or warped metric")
    em.add_argument("--name", required=True)
    em.add_argument("--dim", type=int, default=4)
    em.add_argument("--tau", type=float, default=1.0)
    em.add_argument("--smax", type=float, default=50.0)
    em.add_argument("--nodes", type=int, default=2000)
    em.add_argument("--out", required=True)

    sp = sub.add_parser("bryant", help="solve for the Bryant soliton")
    sp.add_argument("--dim", type=int, default=4)
    sp.add_argument("--smax", type=float, default=50.0)
    sp.add_argument("--nodes", type=int, default=2000)
    sp.add_argument("--out", default="out.json", help="warped metric output (default out.json)")
    sp.add_argument("--report", help="optional summary report path")

    sp = sub.add_parser("compare", help="scalar comparison ODEs")
    sp.add_argument("--u0", type=float, default=0.0)
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--Ar", type=float, default=1.0)
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--horizon", type=float, default=10.0)
    sp.add_argument("--sweep", type=int, help="run a seeded sweep of this many cases")
    sp.add_argument("--ancient", action="store_true", help="backward blowup check of f' = delta f^2")
    sp.add_argument("--f0", type=float, default=-1.0)
    common(sp)
    return p


# --- commands ---------------------------------------------------------------

def _emit(report, rows, columns, out, timing, runtimes):
    """Write everything at the end so errors never leave partial files."""
    if out is None:
        sys.stdout.write(io.dumps(report))
        return
    texts = [(out, io.dumps(report))]
    if rows is not None:
        texts.append((csv_path(out), io.csv_text(rows, columns)))
    if timing:
        texts.append((out + ".timing.json", io.dumps(runtimes)))
    for path, text in texts:
        io.atomic_write(path, text)


def _cmd_check(a):
    _check_seed(a.seed)
    if (a.input is None) == (a.warped is None):
        raise ConfigError("--in", "give exactly one of --in or --warped")
    if a.budget < 1:
        raise ConfigError("--budget", "must be >= 1")
    if a.input is not None:
        Rm = _load(io.load_tensor, a.input, "--in")
        source = {"tensor": a.input}
    else:
        W = _load(io.load_warped, a.warped, "--warped")
        if a.node is None or not (0 < a.node < W.nodes - 1):
            raise ConfigError("--node", f"must be an interior node in [1, {W.nodes - 2}]")
        curv = models.warped_curvature(W, a.node)
        Rm = curv["tensor"]
        source = {"warped": a.warped, "node": a.node, "s": float(W.s[a.node]),
                  "K_rad": curv["K_rad"], "K_sph": curv["K_sph"]}
    rep = check_report(Rm, a.budget, a.seed)
    rep["source"] = source
    return rep, None, None, 0


def _cmd_flow(a):
    _check_tolerance(a.tolerance)
    _check_samples(a.samples)
    Rm = _load(io.load_tensor, a.input, "--in")
    if a.horizon is not None:
        horizon = _check_positive(a.horizon, "--horizon")
    else:
        _check_positive(a.horizon_scale, "--horizon-scale")
        R0 = scalar(Rm)
        horizon = a.horizon_scale / R0 if R0 > 0 else a.horizon_scale
    rep, rows = flow_report(Rm, horizon, a.tolerance, a.samples)
    return rep, rows, FLOW_COLUMNS, 0


def _cmd_invariance(a):
    cfg = ExperimentConfig("invariance", _check_dim(a.dim), _check_cone(a.cone),
                           _check_samples(a.samples), _check_seed(a.seed),
                           _check_positive(a.horizon_scale, "--horizon-scale"),
                           _check_tolerance(a.tolerance), a.out)
    rep = cones.invariance_experiment(cfg.cone, cfg.dim, cfg.samples, cfg.horizon_scale,
                                      cfg.seed, rel_tol=cfg.tolerance,
                                      abs_tol=cfg.tolerance * 1e-2)
    rows = rep.pop("rows")
    rep["tolerance"] = cfg.tolerance
    return rep, rows, INVARIANCE_COLUMNS, int(rep["violations"] > 0)


def _cmd_tau(a):
    _check_dim(a.dim)
    _check_cone(a.cone)
    _check_samples(a.samples)
    _check_seed(a.seed)
    rep = cones.transversality_tau(a.cone, a.dim, a.samples, a.seed)
    rows = rep.pop("rows")
    return rep, rows, TAU_COLUMNS, 0


def _cmd_models(a):
    if a.name not in MODEL_NAMES:
        raise ConfigError("--name", f"unknown model {a.name!r}; choose from {', '.join(MODEL_NAMES)}")
    _check_out_dir(a.out)
    if a.name == "bryant":
        _check_positive(a.smax, "--smax")
        if a.nodes < 3:
            raise ConfigError("--nodes", "must be >= 3")
        W = models.bryant_soliton(_check_dim(a.dim), a.smax, a.nodes)
        io.save_warped(a.out, W)
        return None
    if a.name in ("C2", "CxCP1", "CP1xCP1", "CP2"):
        if a.dim != 4:
            raise ConfigError("--dim", f"model {a.name} is four-dimensional")
        T, J = models.kahler_models()[a.name]
        io.save_tensor(a.out, T, {"model": a.name, "J": J.tolist()})
        return None
    n = _check_dim(a.dim)
    if a.name == "sphere":
        T = models.space_form(n)
    elif a.name == "cylinder":
        T = models.cylinder(n)
    else:
        _check_positive(a.tau, "--tau")
        T = models.shrinking_cylinder(n, a.tau)
    io.save_tensor(a.out, T, {"model": a.name})
    return None


def _cmd_bryant(a):
    _check_dim(a.dim)
    _check_positive(a.smax, "--smax")
    if a.nodes < 3:
        raise ConfigError("--nodes", "must be >= 3")
    _check_out_dir(a.out)
    _check_out_dir(a.report, "--report")
    W = models.bryant_soliton(a.dim, a.smax, a.nodes)
    res = models.soliton_residual(W)
    kr, ks, R = models.profile_curvatures(W)
    rep = {"n": a.dim, "s_max": a.smax, "nodes": a.nodes, "max_residual": float(res.max()),
           "min_K_rad": float(kr.min()), "min_K_sph": float(ks.min()),
           "tip_scalar": float(R[0]), "out": a.out}
    io.save_warped(a.out, W)
    if a.report:
        io.write_json(a.report, rep)
    else:
        sys.stdout.write(io.dumps(rep))
    return rep


def _cmd_compare(a):
    _check_seed(a.seed)
    if a.ancient:
        if not a.f0 < 0:
            raise ConfigError("--f0", "must be negative")
        _check_positive(a.delta, "--delta")
        rep = cones.ancient_blowup_check(a.f0, a.delta)
        return rep, None, None, int(not rep["within_1pct"])
    if a.sweep is not None:
        if a.sweep < 1:
            raise ConfigError("--sweep", "must be >= 1")
        _check_positive(a.horizon, "--horizon")
        rep, rows = comparison_sweep(a.sweep, a.seed, a.horizon)
        return rep, rows, SWEEP_COLUMNS, int(not rep["all_ok"])
    _check_positive(a.Ar, "--Ar")
    _check_positive(a.delta, "--delta")
    _check_positive(a.horizon, "--horizon")
    r = cones.comparison_ode(a.u0, a.C, a.Ar, a.delta, a.horizon)
    rep = {"u0": a.u0, "C": a.C, "Ar": a.Ar, "delta": a.delta, "horizon": a.horizon,
           "bound_ok": r["bound_ok"], "min_gap": r["min_gap"], "reason": r["reason"]}
    rows = [{"t": t, "u": u, "bound": b} for t, u, b in zip(r["t"], r["u"], r["bound"])]
    return rep, rows, ("t", "u", "bound"), int(not r["bound_ok"])


_COMMANDS = {"check": _cmd_check, "flow": _cmd_flow, "invariance": _cmd_invariance,
             "tau": _cmd_tau, "compare": _cmd_compare}


def run(argv=None):
    """Parse, run and write outputs; returns the exit status."""
    args = build_parser().parse_args(argv)
    try:
        if args.command == "models":
            _cmd_models(args)
            return 0
        if args.command == "bryant":
            _cmd_bryant(args)
            return 0
        _check_out_dir(args.out)
        start = time.perf_counter()
        report, rows, columns, status = _COMMANDS[args.command](args)
        runtimes = {"total_seconds": time.perf_counter() - start}
        _emit(report, rows, columns, args.out, args.timing, runtimes)
        return status
    except ConfigError as exc:
        print(f"picflow: error: {exc}", file=sys.stderr)
        return 2


def main(argv=None):
    sys.exit(run(argv))
