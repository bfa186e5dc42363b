"""Deterministic result bundles.

A bundle is a directory with populations.csv, observables.csv, report.json,
metadata.json, and checksums.json, plus rendered figures under figs/.
Writes are atomic (temp file + rename) and the bundle hash covers the data
files only, in a fixed order, so reruns of the same configuration are
hash-identical.  Metadata deliberately carries no timestamps.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ._version import __version__
from .errors import ConfigError

DATA_FILES = ("populations.csv", "observables.csv", "report.json", "metadata.json")
FLOAT_FMT = "%.17g"


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def populations_csv(times: np.ndarray, populations: np.ndarray) -> str:
    """Long-format table: one row per (time, index) pair."""
    lines = ["t,n,P"]
    for t, row in zip(times, populations):
        ts = _fmt(t)
        lines.extend(f"{ts},{n},{_fmt(p)}" for n, p in enumerate(row))
    return "\n".join(lines) + "\n"


def observables_csv(times: np.ndarray, observables: dict) -> str:
    cols = ("fidelity", "sigma_idx", "deltaE", "participation")
    lines = ["t," + ",".join(cols)]
    for j, t in enumerate(times):
        vals = ",".join(_fmt(float(observables[c][j])) for c in cols)
        lines.append(f"{_fmt(t)},{vals}")
    return "\n".join(lines) + "\n"


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _sanitize(obj):
    """Round-trippable JSON: inf -> string markers, numpy scalars -> python."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    return obj


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_bundle(out_dir, result, probe_idx=None) -> Path:
    """Write a ScenarioResult to ``out_dir`` and return the bundle path.

    ``probe_idx`` optionally thins the population table to a coarser probe
    grid; observables always cover the full analysis grid.
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and not out_dir.is_dir():
        raise ConfigError(f"output path {out_dir} exists and is not a directory")
    times = result.times
    pops = result.populations
    if probe_idx is not None:
        p_times, p_pops = times[probe_idx], pops[probe_idx]
    else:
        p_times, p_pops = times, pops

    texts = {
        "populations.csv": populations_csv(p_times, p_pops),
        "observables.csv": observables_csv(times, result.observables),
        "report.json": json_text(_sanitize(result.report)),
        "metadata.json": json_text(_sanitize({
            "format_version": 1,
            "package_version": __version__,
            "dt": result.config["time"]["dt"],
            "config": result.config,
            "scenario_hash": result.report["scenario_hash"],
            "seeds": list(result.seeds),
        })),
    }
    digests = {name: sha256_text(text) for name, text in texts.items()}
    bundle = hashlib.sha256()
    for name in DATA_FILES:  # fixed order
        bundle.update(name.encode())
        bundle.update(digests[name].encode())
    checks = {"files": digests, "bundle_sha256": bundle.hexdigest()}

    for name, text in texts.items():
        atomic_write_text(out_dir / name, text)
    atomic_write_text(out_dir / "checksums.json", json_text(checks))
    return out_dir


def bundle_hash(out_dir) -> str:
    """Recompute the bundle hash from the data files on disk."""
    out_dir = Path(out_dir)
    bundle = hashlib.sha256()
    for name in DATA_FILES:
        path = out_dir / name
        if not path.is_file():
            raise ConfigError(f"bundle incomplete: missing {name}")
        bundle.update(name.encode())
        bundle.update(sha256_text(path.read_text()).encode())
    return bundle.hexdigest()


def read_populations_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`populations_csv`: returns (times, pops matrix)."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    times = np.unique(raw[:, 0])
    n_idx = int(raw[:, 1].max()) + 1
    pops = raw[:, 2].reshape(times.size, n_idx)
    return times, pops
