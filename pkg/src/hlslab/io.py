"""Profile CSV, report JSON, atomic writes and run manifests."""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .integrator import RadialProfile


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps(obj))


def profile_to_csv(profile: RadialProfile) -> str:
    L = profile.L
    header = ["r"] + [c for i in range(1, L + 1) for c in (f"u{i}", f"du{i}")]
    cols = [profile.r]
    for i in range(L):
        cols += [profile.u[i], profile.du[i]]
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*cols):
        buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
    return buf.getvalue()


def write_profile_csv(path, profile: RadialProfile) -> Path:
    return atomic_write_text(path, profile_to_csv(profile))


def read_profile_csv(path) -> RadialProfile:
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if not header or header[0] != "r" or (len(header) - 1) % 2:
        raise ValueError(f"{path}: expected header r,u1,du1,...,uL,duL, got {','.join(header)}")
    L = (len(header) - 1) // 2
    expected = ["r"] + [c for i in range(1, L + 1) for c in (f"u{i}", f"du{i}")]
    if header != expected:
        raise ValueError(f"{path}: expected header {','.join(expected)}")
    return RadialProfile(data[:, 0].copy(), data[:, 1::2].T.copy(), data[:, 2::2].T.copy())


def config_digest(config: dict) -> str:
    """SHA-256 of the canonical JSON form; insensitive to key order."""
    canon = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class RunManifest:
    command: list[str]
    config: dict
    tool_version: str
    seed: int | None
    wall_time: float = 0.0
    outputs: list[str] = field(default_factory=list)

    @property
    def digest(self) -> str:
        return config_digest(self.config)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "config_digest": self.digest,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "wall_time": self.wall_time,
            "outputs": sorted(self.outputs),
        }


def write_rows_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    def fmt(x):
        if x is None:
            return ""
        if isinstance(x, (float, np.floating)):
            return f"{float(x):.17g}"
        return str(x)

    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(x) for x in row) + "\n")
    return atomic_write_text(path, buf.getvalue())
