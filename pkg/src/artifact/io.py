"""Config loading and deterministic output files."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .errors import ConfigError


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def split_config(cfg: dict, system: str, allowed_sections: dict) -> tuple[dict, dict]:
    """Return the system section and the merged experiment sections, rejecting unknown keys."""
    extra = set(cfg) - {system} - set(allowed_sections)
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    if system not in cfg:
        raise ConfigError(f"config has no [{system}] section")
    params = {}
    for sec, keys in allowed_sections.items():
        body = cfg.get(sec, {})
        bad = set(body) - set(keys)
        if bad:
            raise ConfigError(f"unknown keys in [{sec}]: {sorted(bad)}")
        params.update(body)
    return cfg[system], params


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def fmt(x) -> str:
    """Shortest round-trip text for numbers; CSV cells are byte-stable across runs."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x) + 0.0)  # no negative zero
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def write_report(path, subcommand: str, config: dict, seed: int, result: dict, warnings=()):
    """JSON run report. Wall time goes to a separate ``timing.json`` so this file is reproducible."""
    body = {
        "artifact_version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "config": _plain(config),
        "result": _plain(result),
        "warnings": list(warnings),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path


def emit_plot_data(path, header, rows):
    """Two-column whitespace-separated text file; a header line only when ``rows`` is empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# " + " ".join(header)] + [" ".join(fmt(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path
