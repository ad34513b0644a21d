"""Command-line entry point: ``wcnet <command> [options]``.

Every command accepts ``--config run.json``; explicit flags override fields
of that document.  Exit codes: 0 ok, 2 bad configuration, 3 numerical
failure, 4 sweep with failed points.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .connectivity import ConnectivityError, connectivity_from_spec, dominant_nontrivial
from .hopf import (DEFAULT_W_IE_GRID, analyze_network, double_hopf_json, hopf_curve_grid,
                   write_curves_csv)
from .kernels import kernel_from_spec
from .model import ModelParams, preset_params
from .simulate import (SimConfig, SimulationError, SweepConfig, classify_sync, default_workers,
                       equilibrium_history, integrate, perturbed_equilibrium_history, sweep,
                       write_sweep_csv)
from .spectral import RootFindingError, stability_grid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _num(cfg: dict, key: str, path: str, default=None, positive=False, integer=False):
    val = cfg.get(key, default)
    if val is None:
        raise ConfigError(f"{path}.{key}: required")
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"{path}.{key}: expected a finite number, got {val!r}")
    if integer and int(val) != val:
        raise ConfigError(f"{path}.{key}: expected an integer, got {val!r}")
    if positive and not val > 0:
        raise ConfigError(f"{path}.{key}: must be positive, got {val!r}")
    return int(val) if integer else float(val)


def _range(cfg: dict, key: str, path: str, default, with_count=False):
    val = cfg.get(key, default)
    n = 3 if with_count else 2
    if not isinstance(val, (list, tuple)) or len(val) != n:
        raise ConfigError(f"{path}.{key}: expected [lo, hi{', n' if with_count else ''}], got {val!r}")
    lo, hi = float(val[0]), float(val[1])
    if not hi > lo or lo < 0:
        raise ConfigError(f"{path}.{key}: need 0 <= lo < hi, got {val!r}")
    if with_count:
        cnt = val[2]
        if isinstance(cnt, bool) or not isinstance(cnt, int) or cnt < 2:
            raise ConfigError(f"{path}.{key}: sample count must be an integer >= 2, got {cnt!r}")
        return lo, hi, cnt
    return lo, hi


def build_params(cfg) -> ModelParams:
    spec = cfg.get("params", "default")
    if spec == "default":
        return preset_params()
    if not isinstance(spec, dict):
        raise ConfigError(f"params: expected \"default\" or a mapping, got {spec!r}")
    unknown = set(spec) - {"p", "a", "tau1", "tau2"}
    if unknown:
        raise ConfigError(f"params.{sorted(unknown)[0]}: unknown field")
    base = preset_params()
    vals = {k: _num(spec, k, "params", getattr(base, k)) for k in ("p", "a", "tau1", "tau2")}
    try:
        return ModelParams(**vals)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None


def build_kernel(cfg):
    try:
        return kernel_from_spec(cfg.get("kernel", {"kind": "none"}))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_connectivity(cfg):
    spec = cfg.get("connectivity")
    if spec is None:
        raise ConfigError("connectivity: required (e.g. \"uni:10\", \"bi:8\" or a CSV path)")
    try:
        return connectivity_from_spec(spec)
    except (ConnectivityError, OSError) as exc:
        raise ConfigError(f"connectivity: {exc}") from None


def parse_kernel_flag(text: str) -> dict:
    """``none``, ``dirac:TAU``, ``uniform:TAU[:SIGMA]``, ``gamma:M:GAMMA`` or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"kernel: invalid JSON ({exc})") from None
    parts = text.split(":")
    kind = parts[0]
    try:
        nums = [float(x) for x in parts[1:]]
    except ValueError:
        raise ConfigError(f"kernel: cannot parse {text!r}") from None
    if kind == "none" and not nums:
        return {"kind": "none"}
    if kind == "dirac" and len(nums) == 1:
        return {"kind": "dirac", "tau_m": nums[0]}
    if kind == "uniform" and len(nums) in (1, 2):
        return {"kind": "uniform", "tau_m": nums[0], "sigma": nums[-1]}
    if kind == "gamma" and len(nums) == 2:
        return {"kind": "gamma", "m": nums[0], "gamma": nums[1]}
    raise ConfigError(f"kernel: cannot parse {text!r}")


def load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config: top level must be a JSON object")
    cfg = copy.deepcopy(cfg)
    if getattr(args, "params", None):
        cfg["params"] = args.params if args.params == "default" else json.loads(args.params)
    if getattr(args, "kernel", None):
        cfg["kernel"] = parse_kernel_flag(args.kernel)
    if getattr(args, "connectivity", None):
        cfg["connectivity"] = args.connectivity
    if args.command in ("kernels", "connectivity"):
        return cfg
    section = cfg.setdefault(args.command, {})
    if not isinstance(section, dict):
        raise ConfigError(f"{args.command}: expected a mapping")
    for key, val in vars(args).items():
        if key in ("config", "params", "kernel", "connectivity", "command", "func", "what") or val is None:
            continue
        section[key] = list(val) if isinstance(val, tuple) else val
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def header_line(cfg: dict) -> str:
    return f"# wcnet {__version__} config={config_hash(cfg)}"


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# ---------------------------------------------------------------------------
# commands


def cmd_stability(cfg: dict) -> int:
    params, kernel, conn = build_params(cfg), build_kernel(cfg), build_connectivity(cfg)
    sec = cfg["stability"]
    wie = np.linspace(*_range(sec, "w_ie", "stability", [0.0, 6.0, 64], with_count=True))
    we = np.linspace(*_range(sec, "w_e", "stability", [0.0, 4.0, 64], with_count=True))
    radius = _num(sec, "radius", "stability", 8.0, positive=True)
    out = sec.get("out", "stability.csv")
    best, best_rk = stability_grid(params, kernel, conn, wie, we, radius)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        fh.write(header_line(cfg) + "\n")
        fh.write("w_ie,w_e,max_re,worst_rk_re,worst_rk_im\n")
        for i, x in enumerate(wie):
            for j, y in enumerate(we):
                rk = best_rk[i, j]
                fh.write(",".join(_fmt(v) for v in (x, y, best[i, j], rk.real, rk.imag)) + "\n")
    n_unstable = int(np.sum(best >= 0))
    print(json.dumps({"rows": int(best.size), "unstable": n_unstable, "out": str(out)}))
    return EXIT_OK


def cmd_hopf(cfg: dict) -> int:
    params, kernel, conn = build_params(cfg), build_kernel(cfg), build_connectivity(cfg)
    sec = cfg["hopf"]
    lo, hi, n = _range(sec, "w_ie", "hopf", [0.0, 6.0, DEFAULT_W_IE_GRID.size], with_count=True)
    grid = np.linspace(lo, hi, n)
    eig = sec.get("eigenvalues", "dominant")
    if eig == "dominant":
        values = [d.value for d in dominant_nontrivial(conn)]
    elif eig == "all":
        values = conn.distinct_eigenvalues()
    elif isinstance(eig, list):
        try:
            values = [complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in eig]
        except (TypeError, ValueError, IndexError):
            raise ConfigError("hopf.eigenvalues: expected numbers or [re, im] pairs") from None
    else:
        raise ConfigError(f"hopf.eigenvalues: expected \"dominant\", \"all\" or a list, got {eig!r}")
    out_dir = Path(sec.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    result = analyze_network(params, kernel, values, grid)
    curves = result.sync + result.async_curves
    method = sec.get("method", "closed")
    if method == "grid":
        res = _num(sec, "resolution", "hopf", 128, integer=True)
        if res < 32:
            raise ConfigError("hopf.resolution: must be at least 32")
        we_range = _range(sec, "w_e", "hopf", [0.0, 4.0])
        curves = [hopf_curve_grid(params, c.rk, kernel, (lo, hi), we_range, res)
                  for c in ([result.sync_lowest] if result.sync_lowest else [])
                  + ([result.async_lowest] if result.async_lowest else [])]
    elif method != "closed":
        raise ConfigError(f"hopf.method: expected \"closed\" or \"grid\", got {method!r}")
    header = header_line(cfg)
    write_curves_csv(curves, out_dir / "hopf_curves.csv", header)
    (out_dir / "intersections.json").write_text(double_hopf_json(result.intersections) + "\n",
                                                encoding="utf-8")
    order = result.order
    summary = {
        "curves": len(curves),
        "intersections": [[p.w_ie, p.w_e] for p in result.intersections],
        "order": None if order is None else (
            "async above sync" if order.async_above_everywhere else
            {"async_below_sync": order.async_below}),
    }
    print(json.dumps(summary))
    return EXIT_OK


def _sim_config(sec: dict, path: str) -> SimConfig:
    base = SimConfig()
    return SimConfig(
        dt=_num(sec, "dt", path, base.dt, positive=True),
        settle_time=_num(sec, "settle_time", path, base.settle_time),
        window=_num(sec, "window", path, base.window, positive=True),
        perturbation=_num(sec, "perturbation", path, base.perturbation),
        threshold=_num(sec, "threshold", path, base.threshold, positive=True),
        quad_nodes=_num(sec, "quad_nodes", path, base.quad_nodes, integer=True),
    )


def cmd_simulate(cfg: dict) -> int:
    params, kernel, conn = build_params(cfg), build_kernel(cfg), build_connectivity(cfg)
    sec = cfg["simulate"]
    point = params.with_weights(w_ie=_num(sec, "w_ie", "simulate"), w_e=_num(sec, "w_e", "simulate"))
    sim = _sim_config(sec, "simulate")
    seed = _num(sec, "seed", "simulate", 0, integer=True)
    history = sec.get("history", "perturbed")
    if history == "perturbed":
        hist = perturbed_equilibrium_history(point, conn.n, sim.perturbation, seed)
    elif history == "equilibrium":
        hist = equilibrium_history(point, conn.n)
    else:
        raise ConfigError(f"simulate.history: expected \"perturbed\" or \"equilibrium\", got {history!r}")
    record_every = _num(sec, "record_every", "simulate", 1, integer=True)
    traj = integrate(point, kernel, conn, hist, sim.settle_time + sim.window, sim.dt,
                     1, sim.quad_nodes)
    verdict = classify_sync(traj, sim.settle_time, sim.threshold)
    out = sec.get("out")
    if out:
        if record_every > 1:
            keep = slice(None, None, record_every)
            traj = type(traj)(traj.times[keep], traj.e[keep], traj.i[keep], traj.w_ei[keep],
                              traj.dt * record_every, traj.history_span,
                              None if traj.chain is None else traj.chain[keep])
        traj.to_csv(out, header_line(cfg))
    print(json.dumps({"a": verdict.a, "synchronized": verdict.synchronized, "t_hat": verdict.t_hat,
                      "pattern": verdict.pattern, "period": None if math.isnan(verdict.period) else verdict.period}))
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    params, kernel, conn = build_params(cfg), build_kernel(cfg), build_connectivity(cfg)
    sec = cfg["sweep"]
    config = SweepConfig(
        n_points=_num(sec, "n_points", "sweep", 100, integer=True, positive=True),
        w_ie_range=_range(sec, "w_ie_range", "sweep", [0.0, 6.0]),
        w_e_range=_range(sec, "w_e_range", "sweep", [1.25, 2.5]),
        seed=_num(sec, "seed", "sweep", 0, integer=True),
        unstable_only=bool(sec.get("unstable_only", True)),
        workers=_num(sec, "workers", "sweep", default_workers(), integer=True, positive=True),
        sim=_sim_config(sec, "sweep"),
    )
    rows = sweep(params, kernel, conn, config)
    write_sweep_csv(rows, sec.get("out", "sweep.csv"), header_line(cfg))
    counts: dict[str, int] = {}
    failed = 0
    for r in rows:
        if r.error:
            failed += 1
            key = "failed"
        elif r.verdict is None:
            key = "stable"
        else:
            key = "synchronized" if r.verdict.synchronized else "desynchronized"
        counts[key] = counts.get(key, 0) + 1
    print(json.dumps({"points": len(rows), **counts}))
    if failed and failed == len(rows):
        return EXIT_NUMERIC
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_kernels(cfg: dict) -> int:
    kernel = build_kernel(cfg)
    lo, hi = kernel.support()
    info = {**kernel.to_spec(), "mean_delay": kernel.mean_delay(), "variance": kernel.variance(),
            "support": [lo, hi if math.isfinite(hi) else "inf"]}
    print(json.dumps(info))
    return EXIT_OK


def cmd_connectivity(cfg: dict) -> int:
    conn = build_connectivity(cfg)
    info = {
        "label": conn.label, "n": conn.n, "circulant": conn.is_circulant,
        "eigenvalues": [[float(v.real), float(v.imag)] for v in conn.eigenvalues],
        "dominant_nontrivial": [{"value": [d.value.real, d.value.imag], "multiplicity": d.multiplicity}
                                for d in dominant_nontrivial(conn)],
    }
    print(json.dumps(info))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, model=True, kernel=True, conn=True):
    p.add_argument("--config", help="JSON run configuration")
    if model:
        p.add_argument("--params", help='"default" or a JSON object with p, a, tau1, tau2')
    if kernel:
        p.add_argument("--kernel", help="none | dirac:TAU | uniform:TAU[:SIGMA] | gamma:M:GAMMA | JSON")
    if conn:
        p.add_argument("--connectivity", help="uni:N | bi:N | all:N | path to CSV matrix")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wcnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wcnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stability", help="grid scan of the leading eigenvalue real part")
    _common(p)
    p.add_argument("--w-ie", dest="w_ie", nargs=3, type=float, metavar=("LO", "HI", "N"))
    p.add_argument("--w-e", dest="w_e", nargs=3, type=float, metavar=("LO", "HI", "N"))
    p.add_argument("--radius", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("hopf", help="Hopf curves and their intersections")
    _common(p)
    p.add_argument("--w-ie", dest="w_ie", nargs=3, type=float, metavar=("LO", "HI", "N"))
    p.add_argument("--method", choices=["closed", "grid"])
    p.add_argument("--resolution", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_hopf)

    p = sub.add_parser("simulate", help="integrate one parameter point and classify it")
    _common(p)
    p.add_argument("--w-ie", dest="w_ie", type=float)
    p.add_argument("--w-e", dest="w_e", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--settle-time", dest="settle_time", type=float)
    p.add_argument("--window", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--history", choices=["perturbed", "equilibrium"])
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="random unstable points, simulated and classified")
    _common(p)
    p.add_argument("--n-points", dest="n_points", type=int)
    p.add_argument("--w-ie-range", dest="w_ie_range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--w-e-range", dest="w_e_range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--settle-time", dest="settle_time", type=float)
    p.add_argument("--window", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("kernels", help="inspect a delay kernel")
    p.add_argument("what", choices=["show"])
    _common(p, model=False, conn=False)
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("connectivity", help="inspect a connectivity matrix")
    p.add_argument("what", choices=["show"])
    _common(p, model=False, kernel=False)
    p.set_defaults(func=cmd_connectivity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key in ("w_ie", "w_e"):
        val = getattr(args, key, None)
        if isinstance(val, list) and len(val) == 3:
            val[2] = int(val[2])
    try:
        if getattr(args, "params", None) and args.params != "default":
            try:
                json.loads(args.params)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"params: invalid JSON ({exc})") from None
        cfg = load_config(args)
        return args.func(cfg)
    except ConfigError as exc:
        print(f"wcnet: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RootFindingError, SimulationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"wcnet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining validation errors raised by the library (dt guards, ranges)
        print(f"wcnet: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
