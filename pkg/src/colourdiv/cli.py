"""``colourdiv`` command-line driver.

Every output file starts with ``#`` header lines carrying the artifact
version, seed, config hash and the full config, followed by a CSV body.
No timestamps are written, so a rerun of a header's config reproduces the
file byte for byte.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import SCALARS, branch_merge, controlled_temperature, discontinuity, \
    first_crossing, paramagnetic_free_energy, steady_state
from .config import DEFAULTS, ConfigError, OUT_ENV, coerce, config_hash, config_text, \
    default_config, output_dir, parse_grid, read_config, validate
from .model import ModelParams, ensemble_from_mean
from .observables import HIST_BINS
from .oracle import anneal_instance, brute_force_ground_state, complete_graph, \
    generate_instance, geometric_schedule, write_instance
from .paramagnet import find_zero_entropy_connectivity, find_zero_entropy_temperature, \
    paramagnetic_entropy, paramagnetic_reduction_generic, paramagnetic_thermodynamics, \
    ParamagneticState, fixed_point_z, z_population
from .population import init_population
from .protocols import ControlError, ControlTarget, evolve_damage_pair, run_annealed, \
    run_controlled, run_plain

log = logging.getLogger("colourdiv")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4

RECORD_COLUMNS = ["epoch", "mean_c", "T", "f_av", "e_local", "e_global", "s_av", "q_ea",
                  "f_incom", "f_incom_lo", "f_incom_hi", "f_unsat", "d"]


class BudgetExceeded(RuntimeError):
    pass


class Budget:
    def __init__(self, seconds: float):
        self.seconds = seconds
        self.start = time.monotonic()

    def check(self, what: str) -> None:
        if self.seconds and time.monotonic() - self.start > self.seconds:
            raise BudgetExceeded(f"wall-clock budget of {self.seconds}s exceeded during {what}")


# --- output ------------------------------------------------------------------------

def header(cfg: dict, command: str) -> str:
    lines = [f"colourdiv {__version__} command={command} seed={cfg['seed']} "
             f"config_hash={config_hash(cfg)}"]
    lines += config_text(cfg).splitlines()
    return "".join(f"# {ln}\n" for ln in lines)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "nan" if math.isnan(x) else repr(round(float(x), 12))
    return str(x)


def write_csv(path: Path, cfg: dict, command: str, columns, rows) -> Path:
    buf = io.StringIO()
    buf.write(header(cfg, command))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, float("nan"))) for c in columns])
    path.write_text(buf.getvalue())
    return path


def write_json(path: Path, cfg: dict, command: str, payload: dict) -> Path:
    payload = {"version": __version__, "command": command, "seed": cfg["seed"],
               "config_hash": config_hash(cfg), **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")
    return path


def record_row(rec, sample: int | None = None) -> dict:
    row = rec.row()
    out = {"epoch": rec.epoch, "mean_c": rec.mean_c, "T": rec.temperature,
           "f_av": rec.f_av, "e_local": rec.e_av_local, "e_global": rec.e_av_global,
           "s_av": rec.s_av, "q_ea": rec.q_ea, "f_incom": rec.f_incom,
           "f_incom_lo": row["f_incom_lo"], "f_incom_hi": row["f_incom_hi"],
           "f_unsat": rec.f_unsat, "d": rec.d}
    if sample is not None:
        out["sample"] = sample
    return out


# --- helpers -------------------------------------------------------------------------

def _pop_kw(cfg):
    return dict(colour_bias=cfg["colour_bias"], entropy_mode=cfg["entropy_mode"],
                symmetrise=cfg["symmetrise"])


def _one_sample(args):
    cfg, mean_c, T, seed_seq = args
    ens = ensemble_from_mean(mean_c, cfg["Q"])
    pop = init_population(cfg["N"], ens, ModelParams(cfg["Q"], T, cfg["lam"]),
                          mode=cfg["init"], epsilon=cfg["epsilon"], seed=seed_seq,
                          **_pop_kw(cfg))
    return run_plain(pop, cfg["equilibration"], cfg["measurement"], cfg["measure_every"],
                     cfg["test_nodes"])


def _map(cfg, fn, items):
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(cfg["workers"]) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _summary(per_sample: list[list]) -> dict:
    out = {}
    for key in SCALARS:
        v = np.array([np.mean([getattr(r, key) for r in rs]) for rs in per_sample])
        out[key] = float(v.mean())
        out[key + "_err"] = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return out


# --- commands --------------------------------------------------------------------------

def cmd_popdyn(cfg, budget):
    seeds = np.random.SeedSequence(cfg["seed"]).spawn(cfg["samples"])
    runs = _map(cfg, _one_sample, [(cfg, cfg["mean_c"], cfg["T"], s) for s in seeds])
    budget.check("popdyn")
    out = output_dir(cfg)
    rows = [record_row(r, k) for k, rs in enumerate(runs) for r in rs]
    write_csv(out / f"{cfg['tag']}_popdyn.csv", cfg, "popdyn", ["sample"] + RECORD_COLUMNS, rows)
    hist = np.mean([[r.moment_histogram for r in rs] for rs in runs], axis=(0, 1))
    centres = (np.arange(HIST_BINS) + 0.5) / HIST_BINS
    write_csv(out / f"{cfg['tag']}_histogram.csv", cfg, "popdyn", ["bin_center", "density"],
              [{"bin_center": c, "density": d} for c, d in zip(centres, hist)])
    summary = _summary(runs)
    write_json(out / f"{cfg['tag']}_summary.json", cfg, "popdyn",
               {"mean_c": cfg["mean_c"], "T": cfg["T"], "samples": cfg["samples"], **summary})
    print(json.dumps(summary, sort_keys=True))


def cmd_scan(cfg, budget):
    grid = parse_grid(cfg["grid"])
    axis, branch = cfg["axis"], cfg["branch"]
    rows = []
    if branch == "controlled":
        kind = cfg["control"]
        for k, target in enumerate(grid):
            ens = ensemble_from_mean(cfg["mean_c"], cfg["Q"])
            init = "random" if kind == "fixed_qea" else cfg["init"]
            pop = init_population(cfg["N"], ens, ModelParams(cfg["Q"], cfg["T"], cfg["lam"]),
                                  mode=init, epsilon=cfg["epsilon"], seed=cfg["seed"] + k,
                                  **_pop_kw(cfg))
            try:
                x, traj = run_controlled(pop, ControlTarget(kind, target, cfg["gain"],
                                                            cfg["window"], cfg["proportional"]),
                                         cfg["control_sweeps"], cfg["test_nodes"])
                flag = ""
            except ControlError as exc:
                x, flag = float("nan"), str(exc)
            rows.append({"target": target, "control": x, "flag": flag})
            budget.check("scan")
        cols = ["target", "control", "flag"]
    elif branch == "annealed":
        ens = ensemble_from_mean(grid[0] if axis == "mean_c" else cfg["mean_c"], cfg["Q"])
        T0 = grid[0] if axis == "T" else cfg["T"]
        pop = init_population(cfg["N"], ens, ModelParams(cfg["Q"], T0, cfg["lam"]),
                              mode=cfg["init"], epsilon=cfg["epsilon"], seed=cfg["seed"],
                              **_pop_kw(cfg))
        variable = "mean_connectivity" if axis == "mean_c" else "temperature"
        for x, recs in run_annealed(pop, grid, variable, cfg["equilibration"],
                                    cfg["measurement"], cfg["measure_every"],
                                    cfg["test_nodes"]):
            s = _summary([recs])
            rows.append({"x": x, **s})
            budget.check("scan")
        cols = ["x"] + [k for k in rows[0] if k != "x"]
    else:
        local = dict(cfg, init="random" if branch == "random" else "zero")
        for x in grid:
            mc, T = (x, cfg["T"]) if axis == "mean_c" else (cfg["mean_c"], x)
            seeds = np.random.SeedSequence(cfg["seed"]).spawn(cfg["samples"])
            runs = _map(cfg, _one_sample, [(local, mc, T, s) for s in seeds])
            rows.append({"x": x, **_summary(runs)})
            budget.check("scan")
        cols = ["x"] + [k for k in rows[0] if k != "x"]
    write_csv(output_dir(cfg) / f"{cfg['tag']}_scan_{branch}.csv", cfg, "scan", cols, rows)
    for r in rows:
        print(",".join(_fmt(r[c]) for c in cols))


def cmd_paramagnet(cfg, budget):
    rows = []
    for mc in parse_grid(cfg["grid"]):
        for T in parse_grid(cfg["T_grid"]):
            params = ModelParams(cfg["Q"], T, cfg["lam"])
            ens = ensemble_from_mean(mc, cfg["Q"])
            if cfg["lam"] == 1.0 and ens.max_connectivity <= 4 and ens.floor_c >= 3 \
                    and not params.zero_temperature:
                if ens.node_probs[1] == 0.0:
                    st = ParamagneticState(np.array([fixed_point_z(ens.floor_c, params)]),
                                           np.array([ens.floor_c]), params, ens)
                else:
                    st = z_population(ens, params, cfg["M"], cfg["seed"])
                th = paramagnetic_thermodynamics(st, seed=cfg["seed"])
            else:
                st, th = paramagnetic_reduction_generic(params, ens, seed=cfg["seed"])
            rows.append({"mean_c": mc, "T": T, "lambda": cfg["lam"],
                         "z_mean": float(np.mean(st.z)), "f_av": th.f_av, "e_av": th.e_av,
                         "s_av": th.s_av})
            budget.check("paramagnet")
    cols = ["mean_c", "T", "lambda", "z_mean", "f_av", "e_av", "s_av"]
    write_csv(output_dir(cfg) / f"{cfg['tag']}_paramagnet.csv", cfg, "paramagnet", cols, rows)
    for r in rows:
        print(",".join(_fmt(r[c]) for c in cols))


def cmd_lines(cfg, budget):
    """Zero-entropy, spinodal and transition temperatures per ``<c>``."""
    rows = []
    T_grid = parse_grid(cfg["T_grid"])
    for mc in parse_grid(cfg["grid"]):
        row = {"mean_c": mc, "T_s": float("nan"), "T_sp": float("nan"),
               "T_c": float("nan"), "flag": ""}
        try:
            row["T_s"] = find_zero_entropy_temperature(mc, (T_grid[0], T_grid[-1]), cfg["Q"],
                                                       cfg["lam"])
        except ValueError as exc:
            row["flag"] += f"T_s: {exc}; "
        try:
            qs = parse_grid(cfg["q_targets"])
            Ts = [controlled_temperature(q, mc, T0=T_grid[len(T_grid) // 2], N=cfg["N"],
                                         seed=cfg["seed"], sweeps=cfg["control_sweeps"],
                                         gain=cfg["gain"], proportional=cfg["proportional"],
                                         window=cfg["window"], samples=cfg["test_nodes"])
                  for q in qs]
            row["T_sp"] = branch_merge(qs, Ts)[1]
        except (ValueError, ControlError) as exc:
            row["flag"] += f"T_sp: {exc}; "
        try:
            dF = [steady_state(mc, T, "random", samples=1, N=cfg["N"], seed=cfg["seed"],
                               equilibration=cfg["equilibration"],
                               measurement=cfg["measurement"],
                               measure_every=cfg["measure_every"],
                               test_nodes=cfg["test_nodes"], **_pop_kw(cfg)).mean("f_av")
                  - paramagnetic_free_energy(mc, T, cfg["Q"], cfg["M"], cfg["seed"])
                  for T in T_grid]
            row["T_c"] = first_crossing(T_grid, dF)
        except ValueError as exc:
            row["flag"] += f"T_c: {exc}; "
        vals = [row["T_c"], row["T_sp"], row["T_s"]]
        if all(np.isfinite(vals)) and not vals[0] <= vals[1] <= vals[2]:
            row["flag"] += "ordering T_c <= T_sp <= T_s violated; "
        rows.append(row)
        budget.check("lines")
    try:
        c_s = find_zero_entropy_connectivity(Q=cfg["Q"])
    except ValueError:
        c_s = float("nan")
    rows.append({"mean_c": c_s, "T_s": 0.0, "T_sp": float("nan"), "T_c": float("nan"),
                 "flag": "T->0 endpoint of the zero-entropy line"})
    cols = ["mean_c", "T_s", "T_sp", "T_c", "flag"]
    write_csv(output_dir(cfg) / f"{cfg['tag']}_lines.csv", cfg, "lines", cols, rows)
    for r in rows:
        print(",".join(_fmt(r[c]) for c in cols))


def cmd_damage(cfg, budget):
    rows = []
    finals = []
    for k, ss in enumerate(np.random.SeedSequence(cfg["seed"]).spawn(cfg["samples"])):
        ens = ensemble_from_mean(cfg["mean_c"], cfg["Q"])
        pop = init_population(cfg["N"], ens, ModelParams(cfg["Q"], cfg["T"], cfg["lam"]),
                              mode=cfg["init"], epsilon=cfg["epsilon"], seed=ss,
                              **_pop_kw(cfg))
        d = evolve_damage_pair(pop, ss.spawn(1)[0], cfg["damage_sweeps"], cfg["test_nodes"])
        rows += [{"sample": k, "epoch": t, "d": x} for t, x in enumerate(d)]
        finals.append(float(d[-1]))
        budget.check("damage")
    out = output_dir(cfg)
    write_csv(out / f"{cfg['tag']}_damage.csv", cfg, "damage", ["sample", "epoch", "d"], rows)
    f = np.asarray(finals)
    summary = {"mean_c": cfg["mean_c"], "d": float(f.mean()),
               "d_err": float(f.std(ddof=1) / math.sqrt(len(f))) if len(f) > 1 else 0.0}
    write_json(out / f"{cfg['tag']}_damage.json", cfg, "damage", summary)
    print(json.dumps(summary, sort_keys=True))


def cmd_oracle(cfg, budget):
    out = output_dir(cfg)
    rows = []
    Q = cfg["Q"]
    temps = geometric_schedule(cfg["anneal_t0"], cfg["anneal_t1"], cfg["anneal_factor"])
    if cfg["graph"].startswith("complete:"):
        graphs = [complete_graph(int(cfg["graph"][9:]))]
    else:
        ens = ensemble_from_mean(cfg["mean_c"], Q)
        graphs = [generate_instance(cfg["instance_N"], ens, seed=cfg["seed"] + k)
                  for k in range(cfg["instances"])]
    over_budget = False
    for k, g in enumerate(graphs):
        gs = brute_force_ground_state(g, Q, budget=cfg["budget"])
        an = anneal_instance(g, Q, temps, seed=cfg["seed"] + k,
                             moves_per_node=cfg["moves_per_node"])
        write_instance(out / f"{cfg['tag']}_instance_{k:03d}.txt", g, Q, gs.witness.colours)
        over_budget |= not gs.exact
        rows.append({"instance": k, "N": g.N, "E": len(g.edges), "mean_c": g.mean_connectivity,
                     "lower_bound": g.lower_bound(Q), "min_energy": gs.min_energy,
                     "exact": int(gs.exact), "count": gs.count if gs.count is not None else -1,
                     "f_incom": gs.f_incom, "anneal_energy": an.energy})
        budget.check("oracle")
    cols = ["instance", "N", "E", "mean_c", "lower_bound", "min_energy", "exact", "count",
            "f_incom", "anneal_energy"]
    write_csv(out / f"{cfg['tag']}_oracle.csv", cfg, "oracle", cols, rows)
    for r in rows:
        print(" ".join(f"{c}={_fmt(r[c])}" for c in cols))
    if over_budget:
        raise BudgetExceeded("branch-and-bound budget exhausted; results flagged non-exact")


def cmd_defaults(cfg, budget):
    for k, (typ, val, hlp) in DEFAULTS.items():
        print(f"{k} = {val}    # {hlp}")


COMMANDS = {"popdyn": cmd_popdyn, "scan": cmd_scan, "lines": cmd_lines,
            "paramagnet": cmd_paramagnet, "damage": cmd_damage, "oracle": cmd_oracle,
            "defaults": cmd_defaults}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="colourdiv", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("-c", "--config", help="key = value config file")
        sp.add_argument("-v", "--verbose", action="store_true")
        for key, (_, val, hlp) in DEFAULTS.items():
            sp.add_argument(f"--{key}", dest=f"opt_{key}", metavar="V",
                            help=f"{hlp} [{val}]")
    return p


def resolve_config(ns) -> dict:
    cfg = default_config()
    if ns.config:
        cfg.update(read_config(ns.config))
    for key in DEFAULTS:
        v = getattr(ns, f"opt_{key}")
        if v is not None:
            cfg[key] = coerce(key, v)
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[ns.command](cfg, Budget(cfg["max_seconds"]))
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (FloatingPointError, ControlError, ValueError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
