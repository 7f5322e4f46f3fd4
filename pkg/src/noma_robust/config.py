"""Plain-text experiment configuration (``key = value`` per line)."""

from pathlib import Path

import numpy as np

from .channel import Scenario

KEYS = ("M", "K", "epsilon", "gamma_min_db", "noise_var", "cell_radius_m", "min_dist_m",
        "shadow_std_db", "pathloss_exp", "seed", "trials", "schemes", "gamma_sweep_db",
        "epsilon_list")
SCHEMES = ("robust", "nonrobust", "oma")

DEFAULTS = {
    "M": 8, "K": 3, "epsilon": 0.06, "gamma_min_db": 10.0, "noise_var": 0.01,
    "cell_radius_m": 1000.0, "min_dist_m": 100.0, "shadow_std_db": 8.0,
    "pathloss_exp": 3.8, "seed": 0, "trials": 200,
    "schemes": ("robust", "nonrobust", "oma"),
}

_INT_KEYS = {"M", "K", "seed", "trials"}
_LIST_KEYS = {"gamma_sweep_db", "epsilon_list"}


class ConfigError(ValueError):
    pass


def _parse_value(key, raw, where):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key == "schemes":
            names = tuple(x.strip() for x in raw.split(",") if x.strip())
            bad = [n for n in names if n not in SCHEMES]
            if bad or not names:
                raise ValueError(f"unknown scheme(s) {bad}")
            return names
        if key in _LIST_KEYS:
            vals = tuple(float(x) for x in raw.split(",") if x.strip())
            if not vals:
                raise ValueError("empty list")
            return vals
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from None


def parse_config(text, source="<config>"):
    """Parse config text into a dict with every key filled in.

    Blank lines and ``#`` comments are ignored.  Missing sweep lists default
    to the single scenario value (``gamma_min_db`` / ``epsilon``).
    """
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{n}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        out[key] = _parse_value(key, raw, where)
    cfg = {**DEFAULTS, **out}
    cfg.setdefault("gamma_sweep_db", (cfg["gamma_min_db"],))
    cfg.setdefault("epsilon_list", (cfg["epsilon"],))
    if cfg["trials"] < 1:
        raise ConfigError(f"{source}: trials must be >= 1")
    return cfg


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def scenario_from(cfg):
    return Scenario(M=cfg["M"], K=cfg["K"], epsilon=cfg["epsilon"],
                    gamma_min=float(10.0 ** (cfg["gamma_min_db"] / 10.0)),
                    noise_var=cfg["noise_var"], cell_radius_m=cfg["cell_radius_m"],
                    min_dist_m=cfg["min_dist_m"], shadow_std_db=cfg["shadow_std_db"],
                    pathloss_exp=cfg["pathloss_exp"], seed=cfg["seed"])


def format_config(cfg):
    """Inverse of :func:`parse_config` (lists comma-joined)."""
    lines = []
    for key in KEYS:
        v = cfg[key]
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        elif isinstance(v, float):
            v = repr(float(np.float64(v)))
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"
