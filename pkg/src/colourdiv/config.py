"""Flat ``key = value`` run configuration with includes.

Lines are ``key = value``; ``#`` starts a comment; ``include = other.cfg``
pulls in another file (relative to the including file) at that position, so
later keys override earlier ones.
"""
from __future__ import annotations

import hashlib
import os
from pathlib import Path

OUT_ENV = "COLOURDIV_OUT"


class ConfigError(ValueError):
    """Bad key, bad value, or a value outside a module's preconditions."""


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key: (type, default, help)
DEFAULTS: dict[str, tuple[type, object, str]] = {
    "N": (int, 10_000, "population size"),
    "Q": (int, 4, "number of colours"),
    "mean_c": (float, 3.0, "mean connectivity"),
    "T": (float, 0.0, "temperature (0 = exact T=0 kernels)"),
    "lam": (float, 1.0, "second-neighbour mixing of the interpolated cost"),
    "init": (str, "zero", "initial condition: zero | random"),
    "epsilon": (float, 1e-6, "noise amplitude of the random initial condition"),
    "colour_bias": (float, 100.0, "integer weight of a member's nominal colour at init"),
    "entropy_mode": (str, "counting", "T=0 weighting of minimisers: counting | propagated"),
    "symmetrise": (_bool, True, "write each update under a random colour relabelling"),
    "equilibration": (int, 200, "sweeps before measuring"),
    "measurement": (int, 100, "sweeps in the measurement phase"),
    "measure_every": (int, 10, "sweeps between measurements"),
    "samples": (int, 30, "independent populations"),
    "test_nodes": (int, 10_000, "test nodes per measurement"),
    "seed": (int, 1, "master seed"),
    "workers": (int, 1, "parallel worker processes"),
    "out": (str, "", f"output directory (default ${OUT_ENV} or .)"),
    "tag": (str, "run", "file name stem"),
    "max_seconds": (float, 0.0, "wall-clock budget, 0 = unlimited"),
    "axis": (str, "mean_c", "scan axis: mean_c | T"),
    "grid": (str, "3.3:3.8:0.05", "scan grid: start:stop:step or comma list"),
    "branch": (str, "zero", "scan branch: zero | random | annealed | controlled"),
    "control": (str, "fixed_qea", "controlled branch: fixed_qea | fixed_fincom"),
    "gain": (float, 0.1, "integral gain of the control loop"),
    "proportional": (float, 0.0, "proportional gain of the control loop"),
    "window": (int, 50, "control averaging window"),
    "control_sweeps": (int, 300, "sweeps per controlled run"),
    "T_grid": (str, "0.3:1.0:0.05", "temperature grid of paramagnet and lines"),
    "q_targets": (str, "0.15,0.2,0.25,0.3,0.35,0.4", "q_EA targets for branch merging"),
    "M": (int, 10_000, "size of the scalar z population"),
    "damage_sweeps": (int, 100, "sweeps of a damage pair"),
    "graph": (str, "random", "oracle graph: random | complete:<n>"),
    "instances": (int, 10, "oracle instances"),
    "instance_N": (int, 10, "oracle instance size"),
    "anneal_t0": (float, 2.0, "annealing start temperature"),
    "anneal_t1": (float, 0.01, "annealing end temperature"),
    "anneal_factor": (float, 0.98, "geometric cooling factor"),
    "moves_per_node": (int, 10, "annealing moves per node and level"),
    "budget": (int, 10**8, "branch-and-bound node visits"),
}


def default_config() -> dict:
    return {k: v[1] for k, v in DEFAULTS.items()}


def coerce(key: str, text) -> object:
    if key not in DEFAULTS:
        raise ConfigError(f"unknown config key {key!r}")
    typ = DEFAULTS[key][0]
    if not isinstance(text, str):
        text = str(text)
    try:
        return typ(text.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


def read_config(path, _seen=None) -> dict:
    path = Path(path)
    seen = set() if _seen is None else _seen
    if path.resolve() in seen:
        raise ConfigError(f"include cycle at {path}")
    seen.add(path.resolve())
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    out: dict = {}
    for n, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, val = (x.strip() for x in line.split("=", 1))
        if key == "include":
            out.update(read_config(path.parent / val, seen))
        else:
            out[key] = coerce(key, val)
    return out


def parse_grid(text: str) -> list[float]:
    text = text.strip()
    try:
        if ":" in text:
            a, b, s = (float(x) for x in text.split(":"))
            if s <= 0 or b < a:
                raise ValueError("need start <= stop and step > 0")
            n = int(round((b - a) / s))
            return [round(a + k * s, 10) for k in range(n + 1)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None


def validate(cfg: dict) -> None:
    def need(cond, key, msg):
        if not cond:
            raise ConfigError(f"{key}: {msg} (got {cfg[key]!r})")

    need(cfg["N"] >= 1, "N", "must be >= 1")
    need(cfg["Q"] >= 2, "Q", "must be >= 2")
    need(2.0 <= cfg["mean_c"] <= max(cfg["Q"], 2), "mean_c", "must lie in [2, Q]")
    need(cfg["T"] >= 0, "T", "must be >= 0")
    need(0.0 <= cfg["lam"] <= 1.0, "lam", "must lie in [0, 1]")
    need(cfg["init"] in ("zero", "random"), "init", "must be zero or random")
    need(cfg["init"] != "random" or cfg["epsilon"] > 0, "epsilon", "must be > 0")
    need(cfg["entropy_mode"] in ("counting", "propagated"), "entropy_mode",
         "must be counting or propagated")
    for k in ("equilibration", "measurement", "samples", "test_nodes", "measure_every",
              "workers", "window", "control_sweeps", "M", "damage_sweeps", "instances",
              "moves_per_node", "budget"):
        need(cfg[k] >= (0 if k in ("equilibration",) else 1), k, "out of range")
    need(cfg["axis"] in ("mean_c", "T"), "axis", "must be mean_c or T")
    need(cfg["branch"] in ("zero", "random", "annealed", "controlled"), "branch",
         "unknown branch")
    need(cfg["control"] in ("fixed_qea", "fixed_fincom"), "control", "unknown control")
    need(0 < cfg["anneal_factor"] < 1, "anneal_factor", "must lie in (0, 1)")
    need(cfg["anneal_t0"] > cfg["anneal_t1"] > 0, "anneal_t0", "need t0 > t1 > 0")
    need(cfg["instance_N"] >= 2, "instance_N", "must be >= 2")
    g = cfg["graph"]
    need(g == "random" or (g.startswith("complete:") and g[9:].isdigit()), "graph",
         "must be random or complete:<n>")
    for k in ("grid", "T_grid", "q_targets"):
        vals = parse_grid(cfg[k])
        need(len(vals) > 0, k, "empty grid")
        if k != "q_targets":
            d = [b - a for a, b in zip(vals, vals[1:])]
            need(all(x > 0 for x in d) or all(x < 0 for x in d), k, "grid must be monotone")


def config_text(cfg: dict) -> str:
    return "\n".join(f"{k} = {cfg[k]}" for k in sorted(cfg))


def config_hash(cfg: dict) -> str:
    """Hash of everything except the output location."""
    body = {k: v for k, v in cfg.items() if k not in ("out", "tag", "workers")}
    return hashlib.sha256(config_text(body).encode()).hexdigest()[:16]


def output_dir(cfg: dict) -> Path:
    d = Path(cfg["out"] or os.environ.get(OUT_ENV, "."))
    d.mkdir(parents=True, exist_ok=True)
    return d
