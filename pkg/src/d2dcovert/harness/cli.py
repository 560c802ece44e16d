"""Command-line entry point: ``d2dcovert <subcommand> [options]``.

Exit codes: 0 success, 1 agreement/divergence failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import replace

import numpy as np

from ..game import NoFeasiblePoint
from ..model import watt_to_dbm
from . import experiments as ex
from .config import ConfigError, load_config, parse_grid
from .output import heatmap, line_chart, write_rows

log = logging.getLogger("d2dcovert")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
HIGH_PRECISION_TRIALS = 1_000_000


@contextmanager
def _mapper(threads):
    if threads <= 1:
        yield map
        return
    with ThreadPoolExecutor(threads) as pool:
        yield pool.map


def _grid(cfg, key, default):
    text = cfg.sweep.get(key)
    return parse_grid(text) if text is not None else list(default)


def _int(cfg, key, default):
    text = cfg.sweep.get(key)
    if text is None:
        return default
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"sweep.{key} must be an integer") from None


def cmd_validate(cfg, args, out):
    quantities = tuple(q.strip() for q in cfg.sweep.get("quantities", "success,fa,md,secrecy_outage").split(","))
    unknown = set(quantities) - {"success", "fa", "md", "secrecy_outage"}
    if unknown:
        raise ConfigError(f"unknown quantities {sorted(unknown)}")
    summary = ex.run_validation(
        cfg.params, cfg.mc,
        _grid(cfg, "p_d_dbm", range(0, 31, 5)),
        _grid(cfg, "p_j_dbm", (0, 15, 30)),
        _grid(cfg, "tau_dbm", ex.default_tau_dbm()),
        quantities,
    )
    write_rows(os.path.join(out, "validate.csv"), summary.rows)
    for q in quantities:
        rows = [r for r in summary.rows if r["quantity"] == q]
        worst = max(abs(r["analytic"] - r["mc_mean"]) for r in rows)
        bad = sum(r["verdict"] == "fail" for r in rows)
        print(f"{q:15s} points={len(rows):4d} max|analytic-mc|={worst:.4f} failures={bad}")
    print(f"validate: {summary.checked - summary.failed}/{summary.checked} within max(3 SE, 0.01)")
    return EXIT_OK if summary.passed else EXIT_FAIL


def cmd_surface(cfg, args, out, mapper):
    n = _int(cfg, "grid", 33)
    if n < 1:
        raise ConfigError("sweep.grid must be >= 1")
    s = ex.run_surface(cfg.params, n, mapper)
    write_rows(os.path.join(out, "surface.csv"), s.rows)
    pd_dbm, pj_dbm = watt_to_dbm(s.surface.p_d), watt_to_dbm(s.surface.p_j)
    ok = s.surface.feasible(cfg.params.covertness_eps)
    marker = None
    if s.best.feasible:
        marker = s.best.strategy_star.dbm
        print(f"best covert point: p_d={marker[0]:.2f} dBm p_j={marker[1]:.2f} dBm utility={s.best.utility:.4f}")
    else:
        print("no covert grid point")
    if ok.any():
        print(f"minimal covert p_j on grid: {pj_dbm[np.argmax(ok.any(axis=0))]:.2f} dBm")
    if len(pd_dbm) > 1 and len(pj_dbm) > 1:
        heatmap(os.path.join(out, "surface_utility.svg"), pd_dbm, pj_dbm, s.surface.utility,
                "p_d (dBm)", "p_j (dBm)", "utility (grey: not covert)", mask=ok, marker=marker)
        heatmap(os.path.join(out, "surface_detection_error.svg"), pd_dbm, pj_dbm, s.surface.detection_error,
                "p_d (dBm)", "p_j (dBm)", "warden's minimal detection error")
    return EXIT_OK


def cmd_equilibrium(cfg, args, out, mapper):
    s = ex.run_equilibrium(cfg.params, cfg.sca, _int(cfg, "grid", 33), mapper)
    write_rows(os.path.join(out, "equilibrium.csv"), s.rows)
    if s.sca is None:
        print("SCA: no covert point reachable")
    else:
        d, j = s.sca.strategy_star.dbm
        print(f"SCA [{s.sca.status}, {s.sca.iterations} it]: p_d={d:.3f} dBm p_j={j:.3f} dBm "
              f"utility={s.sca.utility:.5f} detection_error={s.sca.bundle.detection_error:.5f}")
    if s.grid.feasible:
        d, j = s.grid.strategy_star.dbm
        print(f"grid: p_d={d:.3f} dBm p_j={j:.3f} dBm utility={s.grid.utility:.5f}")
    else:
        print("grid: no covert point")
    if s.diverged:
        print("SCA and grid search disagree by more than 1% in utility")
        return EXIT_FAIL
    return EXIT_OK


def cmd_compare_secrecy(cfg, args, out, mapper):
    ratios = _grid(cfg, "ratio_db", np.linspace(-30.0, 0.0, 17))
    rows, points = ex.run_compare_secrecy(cfg.params, ratios, _int(cfg, "pd_points", 61), mapper)
    write_rows(os.path.join(out, "compare_secrecy.csv"), rows)
    r = np.array([p.ratio_db for p in points])
    cov_u = np.array([p.covert.bundle.utility if p.covert else 0.0 for p in points])
    cov_s = np.array([p.covert.bundle.p_secure if p.covert else np.nan for p in points])
    sec_u = np.array([p.secrecy.bundle.utility for p in points])
    sec_s = np.array([p.secrecy.bundle.p_secure for p in points])
    line_chart(os.path.join(out, "compare_utility.svg"), {"covert": (r, cov_u), "secrecy only": (r, sec_u)},
               "p_j / p_j_max (dB)", "utility")
    line_chart(os.path.join(out, "compare_secure.svg"), {"covert": (r, cov_s), "secrecy only": (r, sec_s)},
               "p_j / p_j_max (dB)", "secure communication probability")
    on = np.flatnonzero([p.covert is not None for p in points])
    if on.size:
        k = int(np.argmax(cov_u))
        print(f"covert approach active from {r[on[0]]:.2f} dB; best utility {cov_u[k]:.4f} "
              f"(secure prob {cov_s[k]:.4f}) at {r[k]:.2f} dB")
    print(f"secrecy baseline at {r[-1]:.2f} dB: utility {sec_u[-1]:.4f}, secure prob {sec_s[-1]:.4f}")
    return EXIT_OK


def _sweep_spec(cfg, args):
    name = getattr(args, "preset", None)
    preset = dict(ex.PRESETS[name]) if name else {}
    for key in ("name", "values", "level_name", "levels", "mode", "method", "grid"):
        if key in cfg.sweep:
            preset[key] = cfg.sweep[key]
    if "name" not in preset or "values" not in preset:
        raise ConfigError("sweep needs --preset or sweep.name and sweep.values")
    levels = tuple(parse_grid(preset["levels"])) if preset.get("level_name") else (None,)
    try:
        return ex.SweepSpec(
            name=preset["name"], values=tuple(parse_grid(preset["values"])),
            level_name=preset.get("level_name"), levels=levels,
            mode=preset.get("mode", "analytic"), method=preset.get("method", "hybrid"),
            grid=int(preset.get("grid", 9)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_sweep(cfg, args, out, mapper):
    spec = _sweep_spec(cfg, args)
    rows, curves = ex.run_sweep(cfg.params, spec, cfg.sca, cfg.mc, mapper)
    stem = getattr(args, "preset", None) or spec.name
    write_rows(os.path.join(out, f"sweep_{stem}.csv"), rows)
    series = {}
    for lv, pts in curves.items():
        x, y = zip(*pts)
        label = "utility" if lv is None else f"{spec.level_name}={lv:g}"
        series[label] = (np.array(x), np.array(y))
        print(f"{label}: " + " ".join(f"{u:.4f}" for u in y))
    line_chart(os.path.join(out, f"sweep_{stem}.svg"), series, spec.name, "equilibrium utility")
    failed = sum(r["verdict"] == "fail" for r in rows)
    if failed:
        print(f"{failed} Monte Carlo checks disagree with the analytic values")
        return EXIT_FAIL
    return EXIT_OK


def _global_options(parser, suppress):
    # the same options are accepted before and after the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="INI file with [model] [mc] [sca] [sweep] sections")
    parser.add_argument("--set", action="append", default=d([]), metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    parser.add_argument("--seed", type=int, default=d(None), help="Monte Carlo base seed")
    parser.add_argument("--threads", type=int, default=d(1), help="worker threads")
    parser.add_argument("--out", default=d("results"), help="output directory")
    parser.add_argument("--high-precision", action="store_true", default=d(False),
                        help=f"{HIGH_PRECISION_TRIALS} Monte Carlo trials")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser():
    ap = argparse.ArgumentParser(prog="d2dcovert", description=__doc__.splitlines()[0])
    _global_options(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "analytic probabilities against Monte Carlo",
        "surface": "utility and detection error over the power box",
        "equilibrium": "SCA equilibrium cross-checked by grid search",
        "compare-secrecy": "covert approach against the secrecy-only baseline",
        "sweep": "equilibrium utility along a parameter sweep",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        _global_options(sp, suppress=True)
        if name == "sweep":
            sp.add_argument("--preset", choices=sorted(ex.PRESETS))
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        ap.error("--threads must be >= 1")
    try:
        cfg = load_config(args.config, args.set)
        mc = cfg.mc
        if args.seed is not None:
            mc = replace(mc, base_seed=args.seed)
        if args.high_precision:
            mc = replace(mc, trials=HIGH_PRECISION_TRIALS)
        cfg.mc = replace(mc, workers=args.threads)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "validate":
            return cmd_validate(cfg, args, args.out)
        handlers = {"surface": cmd_surface, "equilibrium": cmd_equilibrium,
                    "compare-secrecy": cmd_compare_secrecy, "sweep": cmd_sweep}
        with _mapper(args.threads) as mapper:
            return handlers[args.command](cfg, args, args.out, mapper)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoFeasiblePoint as exc:
        print(f"no covert operating point: {exc}")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
