"""Command-line front end: ``wpcn params|rho|optimize|figure|simulate``.

Results go to stdout as JSON; ``figure`` also writes a CSV into ``--out``.
Every output carries the digest of the resolved configuration, and reruns
with the same configuration and seed produce identical bytes.

Exit codes: 0 success, 2 configuration error, 3 infeasible problem,
4 resource or time budget exceeded, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .battery import (
    BatteryMode,
    closed_bound_terms,
    markov_lower_bound,
    rho_infinite,
    rho_one_threshold,
)
from .config import RunConfig, density, length, load_config, power
from .energy import EnergyDistribution, ccdf_zf, rho_free
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InfeasibleParamsError,
    ResourceError,
    WpcnError,
)
from .numerics import ErfClipConfig
from .optimize import (
    MEDIUM,
    classify_regime,
    feasible_region_finite_rho1,
    feasible_region_infinite,
    finite_grid_cells,
    n0_index,
    optimize_finite,
    optimize_free,
    regime_bounds,
)
from .simcore import (
    empirical_psuc,
    harvest_samples,
    independence_estimate,
    run_battery_frames,
    void_probability,
)
from .uplink import kappa, outage_equivalence, psuc_closed4

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_RESOURCE, EXIT_NUMERIC = 0, 2, 3, 4, 5
FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig7")
EXPERIMENTS = ("harvest", "gap", "void", "psuc", "battery")


def _manifest(cfg: RunConfig, outputs: list, *extra: str) -> dict:
    return {"config_digest": cfg.digest(*extra), "seed": cfg.seed,
            "versions": __version__, "outputs": outputs}


def _clean(obj):
    # numpy scalars and non-finite floats are not valid JSON
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _emit(obj, out: Optional[Path], name: str) -> str:
    text = _dump_json(obj)
    sys.stdout.write(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8")
    return text


def _write_csv(path: Path, digest: str, header: list, rows: list):
    buf = io.StringIO()
    buf.write(f"# manifest_digest={digest}\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(buf.getvalue().encode("utf-8"))


# ---------------------------------------------------------------- params

def cmd_params(cfg: RunConfig, args) -> dict:
    p = cfg.params
    eq = outage_equivalence(p)
    clip = ErfClipConfig(cfg.battery["erf_digits"])
    lo, hi = regime_bounds(p, eq)
    regime = classify_regime(p, eq)
    report = {
        "k_epsilon": eq.k_epsilon,
        "g0": eq.g0,
        "v_e": clip.v_e,
        "p_min_w": eq.p_min,
        "p_max_w": p.p_max,
        "kappa": kappa(p.beta, p.alpha),
        "regime_medium_lower_per_m2": lo,
        "regime_high_lower_per_m2": hi,
        "lambda_ap_per_m2": p.lambda_ap,
        "regime": regime,
    }
    if regime == MEDIUM:
        report["n0"] = n0_index(p, eq)
    report["manifest"] = _manifest(cfg, [], "params")
    return report


# ---------------------------------------------------------------- rho

def cmd_rho(cfg: RunConfig, args) -> dict:
    p = cfg.params
    proto = cfg.protocol()
    n, p_u = proto["n_dl"], proto["p_u"]
    p.check_n_dl(n)
    bat = cfg.battery
    clip = ErfClipConfig(bat["erf_digits"])
    mode = args.mode
    res = {"mode": mode, "n_dl": n, "p_u_w": p_u}
    if mode == "free":
        res["rho"] = float(rho_free(EnergyDistribution(p, n), p_u, clip))
    elif mode == "infinite":
        res["rho"] = rho_infinite()
    else:
        c = bat["capacity"]
        mb = markov_lower_bound(p, n, p_u, c, bat["delta0"], bat["theta"], bat["state_cap"])
        erf_t, ch_t = closed_bound_terms(p, n, p_u, c, clip)
        res.update({
            "capacity_w": c,
            "rho_lb": mb.rho_lb,
            "final_delta_w": mb.delta,
            "n_states": mb.n_states,
            "refinements": [{"delta_w": d, "rho_lb": r} for d, r in mb.history],
            "closed_lower": max(erf_t, ch_t),
            "erf_term": erf_t,
            "chernoff_term": ch_t,
            "upper": 1.0,
            "rho_one_threshold_met": rho_one_threshold(p, n, p_u, clip),
        })
    res["manifest"] = _manifest(cfg, [], "rho", mode)
    return res


# ---------------------------------------------------------------- optimize

def cmd_optimize(cfg: RunConfig, args) -> dict:
    p = cfg.params
    bat = cfg.battery
    clip = ErfClipConfig(bat["erf_digits"])
    mode = args.mode
    if mode == "free":
        out = optimize_free(p, clip)
        method = "regime rule"
    elif mode == "infinite":
        out = feasible_region_infinite(p)
        method = "feasibility region"
    else:
        out = feasible_region_finite_rho1(p, clip)
        method = "saturated region"
        if not out.feasible:
            outage_equivalence(p)  # P_min must not exceed P_max for the grid
            out = optimize_finite(p, bat["capacity"], bat["power_grid"], bat["delta0"],
                                  bat["theta"], state_cap=bat["state_cap"])
            method = "markov grid"
    res = out.to_dict()
    res["method"] = method
    res["mode"] = mode
    res["manifest"] = _manifest(cfg, [], "optimize", mode)
    return res


# ---------------------------------------------------------------- figures

def _fig3(cfg: RunConfig):
    sw = cfg.sweep("fig3")
    p = cfg.figure_params("fig3")
    n = cfg.protocol("fig3")["n_dl"]
    lams = density(sw["lambda_ap"], "sweeps.fig3.lambda_ap")
    header = ["scenario", "interim_side_m", "p_u_w", "lambda_ap_per_m2", "p_node1",
              "p_node2", "marginal_product", "joint", "gap"]
    rows = []
    for k, sc in enumerate(sw["scenarios"]):
        side = length(sc["interim_side"], "sweeps.fig3.scenarios.interim_side")
        p_u = power(sc["p_u"], "sweeps.fig3.scenarios.p_u")
        sim = cfg.sim(interim_side=side, frames=int(sw.get("frames", 4000)))
        for lam in lams:
            est = independence_estimate(sim, p.with_(lambda_ap=lam), n, p_u)
            rows.append([k + 1, side, p_u, lam, est.p1, est.p2, est.product, est.joint,
                         est.gap])
    return header, rows, {}


def _fig4(cfg: RunConfig):
    sw = cfg.sweep("fig4")
    p = cfg.figure_params("fig4")
    proto = cfg.protocol("fig4")
    ls = length(sw["l"], "sweeps.fig4.l")
    sim = cfg.sim(frames=int(sw.get("frames", 4000)))
    res = void_probability(sim, p, proto["n_dl"], proto["p_u"], ls)
    rows = [[l, e, a, abs(e - a)] for l, e, a in res]
    return ["l_m", "void_empirical", "void_analytic", "abs_diff"], rows, {
        "max_abs_diff": max(r[3] for r in rows)}


def _fig5(cfg: RunConfig):
    sw = cfg.sweep("fig5")
    p = cfg.figure_params("fig5")
    proto = cfg.protocol("fig5")
    bat = cfg.battery
    clip = ErfClipConfig(bat["erf_digits"])
    n, p_u = proto["n_dl"], proto["p_u"]
    rows = []
    for c in power(sw["capacity"], "sweeps.fig5.capacity"):
        mb = markov_lower_bound(p, n, p_u, c, bat["delta0"], bat["theta"], bat["state_cap"])
        erf_t, ch_t = closed_bound_terms(p, n, p_u, c, clip)
        rows.append([c, mb.rho_lb, max(erf_t, ch_t), erf_t, ch_t, 1.0, mb.delta])
    header = ["capacity_w", "rho_lb_markov", "closed_lower", "erf_term", "chernoff_term",
              "upper", "final_delta_w"]
    return header, rows, {}


def _fig6(cfg: RunConfig):
    sw = cfg.sweep("fig6")
    base = cfg.figure_params("fig6")
    clip = ErfClipConfig(cfg.battery["erf_digits"])
    rows = []
    for lw in density(sw["lambda_w"], "sweeps.fig6.lambda_w"):
        for lam in density(sw["lambda_ap"], "sweeps.fig6.lambda_ap"):
            p = base.with_(lambda_w=lw, lambda_ap=lam)
            try:
                o = optimize_free(p, clip)
            except InfeasibleParamsError:
                rows.append([lw, lam, "PminAbovePmax", False, "", "", 0.0, 0.0])
                continue
            b = o.best
            rows.append([lw, lam, o.regime, o.feasible, b.n_dl if b else "",
                         b.p_u if b else "", o.rho_at_best, o.throughput])
    header = ["lambda_w_per_m2", "lambda_ap_per_m2", "regime", "feasible", "n_opt",
              "p_u_opt_w", "rho", "throughput_bps_hz_m2"]
    return header, rows, {}


def _fig7(cfg: RunConfig):
    sw = cfg.sweep("fig7")
    p = cfg.figure_params("fig7")
    bat = cfg.battery
    c = power(sw.get("capacity", {"watt": bat["capacity"]}), "sweeps.fig7.capacity")
    grid_n = int(sw.get("power_grid", bat["power_grid"]))
    outage_equivalence(p)
    cells = finite_grid_cells(p, c, grid_n, bat["delta0"], bat["theta"],
                              state_cap=bat["state_cap"])
    out = optimize_finite(p, c, cells=cells)
    best = out.best
    rows = []
    for cell in cells:
        is_opt = bool(best and cell.n_dl == best.n_dl and cell.p_u == best.p_u)
        rows.append([cell.n_dl, cell.p_u, cell.rho, cell.feasible, cell.throughput, is_opt])
    header = ["n_dl", "p_u_w", "rho_lb", "feasible", "throughput_lb_bps_hz_m2", "is_optimum"]
    return header, rows, {"optimum": out.to_dict()}


_FIG_BUILDERS = {"fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6, "fig7": _fig7}


def cmd_figure(cfg: RunConfig, args) -> dict:
    fig = args.figure
    out = Path(args.out)
    header, rows, extra = _FIG_BUILDERS[fig](cfg)
    name = f"{fig}.csv"
    digest = cfg.digest("figure", fig)
    _write_csv(out / name, digest, header, rows)
    res = {"figure": fig, "rows": len(rows), "csv": name}
    res.update(extra)
    res["manifest"] = _manifest(cfg, [name], "figure", fig)
    return res


# ---------------------------------------------------------------- simulate

def cmd_simulate(cfg: RunConfig, args) -> dict:
    exp = args.experiment or cfg.raw["simulation"].get("experiment", "psuc")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}")
    p = cfg.params
    proto = cfg.protocol()
    n, p_u = proto["n_dl"], proto["p_u"]
    p.check_n_dl(n)
    res = {"experiment": exp, "n_dl": n, "p_u_w": p_u}
    if exp == "harvest":
        sim = cfg.sim()
        z = harvest_samples(p, n, sim.frames, sim.seed, sim.window_side, sim.interim_side)
        zs = np.sort(z)
        dist = EnergyDistribution(p, n)
        emp = 1.0 - np.arange(zs.size) / zs.size
        res.update({"frames": sim.frames,
                    "sup_gap": float(np.max(np.abs(emp - ccdf_zf(dist, zs)))),
                    "empirical_rho": float(np.mean(z >= p_u)),
                    "analytic_rho": float(ccdf_zf(dist, p_u))})
    elif exp == "gap":
        est = independence_estimate(cfg.sim(), p, n, p_u)
        res.update({"p_node1": est.p1, "p_node2": est.p2, "marginal_product": est.product,
                    "joint": est.joint, "gap": est.gap})
    elif exp == "void":
        sim = cfg.sim()
        ls = [float(x) for x in range(1, int(min(20, sim.interim_side)) + 1)]
        res["void"] = [{"l_m": l, "empirical": e, "analytic": a}
                       for l, e, a in void_probability(sim, p, n, p_u, ls)]
    elif exp == "psuc":
        rho = float(rho_free(EnergyDistribution(p, n), p_u))
        res.update({"rho": rho, "empirical": empirical_psuc(cfg.sim(), p, rho, n, p_u),
                    "analytic": psuc_closed4(p, rho, n, p_u)})
    else:
        mode = args.mode
        bm = (BatteryMode.finite(cfg.battery["capacity"]) if mode == "finite"
              else BatteryMode(mode))
        res.update({"mode": mode, "empirical_rho": run_battery_frames(cfg.sim(bm), p, n, p_u)})
    res["manifest"] = _manifest(cfg, [], "simulate", exp, args.mode)
    return res


_COMMANDS = {"params": cmd_params, "rho": cmd_rho, "optimize": cmd_optimize,
             "figure": cmd_figure, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wpcn", description="Wireless powered network analysis and simulation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("params", "derived constants and AP-density regime"),
                      ("rho", "transmission probability"),
                      ("optimize", "throughput-optimal (N, P_U)"),
                      ("figure", "write one figure's data series as CSV"),
                      ("simulate", "run a Monte Carlo experiment")):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--mode", choices=("free", "finite", "infinite"), default="free")
        if name == "figure":
            sp.add_argument("--figure", choices=FIGURES, required=True)
        if name == "simulate":
            sp.add_argument("--experiment", choices=EXPERIMENTS)
    return ap


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        if args.command == "figure" and args.out is None:
            args.out = "."
        res = _COMMANDS[args.command](cfg, args)
        out = Path(args.out) if args.out is not None else None
        suffix = {"figure": f"_{getattr(args, 'figure', '')}",
                  "simulate": f"_{getattr(args, 'experiment', None) or 'run'}"}.get(
                      args.command, f"_{args.mode}" if args.command in ("rho", "optimize") else "")
        _emit(res, out, f"{args.command}{suffix}.json")
        if args.command == "optimize" and not res.get("feasible", True):
            return EXIT_INFEASIBLE
        return EXIT_OK
    except (ConfigError, DomainError) as exc:
        print(f"wpcn: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleParamsError as exc:
        print(f"wpcn: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ResourceError as exc:
        print(f"wpcn: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConvergenceError, WpcnError, ArithmeticError) as exc:
        print(f"wpcn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
