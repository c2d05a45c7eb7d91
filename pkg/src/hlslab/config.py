"""TOML run configuration.

Minimal example::

    kind = "lane-emden"
    n = 3
    p = 2.0
    q = 2.0

Optional tables ``[shot]`` (integrator options) and ``[search]`` (simplex
search).  ``kind = "custom"`` takes an explicit monomial table::

    rhs = [[{coeff = 1.0, exponents = [0, 2]}], [{coeff = 1.0, exponents = [2, 0]}]]
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .integrator import ShotOptions
from .regimes import (
    Monomial,
    PowerPair,
    SystemSpec,
    decoupled,
    lane_emden,
    polyharmonic_cascade,
    scalar_power,
)
from .shooting import SearchOptions

KINDS = ("lane-emden", "scalar", "cascade", "decoupled", "custom")
TOP_KEYS = {"kind", "n", "k", "L", "p", "q", "rhs", "label", "out", "seed", "a", "shot", "search"}
SHOT_KEYS = {"rtol", "atol", "h0", "r_max", "eps_decay", "blowup_bound", "store_stride", "max_steps"}
SEARCH_KEYS = {"tol", "label_rmax", "max_levels", "probes", "max_bisections", "jobs"}


class ConfigError(ValueError):
    """Bad configuration; ``key`` names the offending entry, ``line`` the TOML line."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class SystemConfig:
    kind: str
    n: int
    k: int = 1
    p: float | None = None
    q: float | None = None
    rhs: tuple | None = None
    label: str = ""
    a: float = 2.0
    out: str | None = None
    seed: int = 0
    shot: ShotOptions = field(default_factory=ShotOptions)
    search: SearchOptions = field(default_factory=SearchOptions)

    @property
    def powers(self) -> PowerPair | None:
        if self.p is None:
            return None
        return PowerPair(self.p, self.q if self.q is not None else self.p)

    def system(self) -> SystemSpec:
        if self.kind == "lane-emden":
            return lane_emden(self.n, self.powers)
        if self.kind == "scalar":
            return scalar_power(self.n, self.p)
        if self.kind == "cascade":
            return polyharmonic_cascade(self.n, self.k, self.powers)
        if self.kind == "decoupled":
            return decoupled(self.n, self.powers)
        rhs = tuple(tuple(Monomial(float(m["coeff"]), tuple(m["exponents"])) for m in comp) for comp in self.rhs)
        return SystemSpec(self.n, rhs, label=self.label or "custom")

    def to_dict(self) -> dict:
        """Effective configuration with defaults filled in (the manifest digest input).

        ``search.jobs`` is left out: worker count never changes results.
        """
        search = asdict(self.search)
        search.pop("jobs")
        d = {
            "kind": self.kind, "n": self.n, "k": self.k, "p": self.p, "q": self.q,
            "label": self.label, "a": self.a, "seed": self.seed,
            "shot": asdict(self.shot), "search": search,
        }
        if self.rhs is not None:
            d["rhs"] = [[dict(m) for m in comp] for comp in self.rhs]
        return d


def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if line.split("=", 1)[0].strip() == key:
            return i
    return None


def _number(raw: dict, key: str, text: str, kind=float, positive=True):
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{key!r} must be a number, got {val!r}", key, _line_of(text, key))
    if kind is int and int(val) != val:
        raise ConfigError(f"{key!r} must be an integer, got {val!r}", key, _line_of(text, key))
    val = kind(val)
    if positive and not (val > 0 and math.isfinite(val)):
        raise ConfigError(f"{key!r} must be positive and finite, got {val!r}", key, _line_of(text, key))
    return val


def _options(cls, table: dict, allowed: set, section: str, text: str):
    unknown = set(table) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {section}.{key}", f"{section}.{key}", _line_of(text, key))
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}", section) from exc


def load_raw(text: str) -> dict:
    """Parse TOML text; syntax errors become ``ConfigError`` with a line number."""
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise ConfigError(f"TOML syntax error: {exc}", None, line) from exc


def parse_config_text(text: str, require_pq: bool = False) -> SystemConfig:
    return build_config(load_raw(text), text, require_pq)


def parse_config(path: str | Path, require_pq: bool = False) -> SystemConfig:
    """Read and validate a TOML config; ``require_pq`` enforces ``pq > 1``."""
    text = Path(path).read_text()
    return parse_config_text(text, require_pq)


def build_config(raw: dict, text: str = "", require_pq: bool = False) -> SystemConfig:
    unknown = set(raw) - TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {key!r}", key, _line_of(text, key))
    kind = raw.get("kind", "lane-emden")
    if kind not in KINDS:
        raise ConfigError(f"'kind' must be one of {', '.join(KINDS)}, got {kind!r}", "kind", _line_of(text, "kind"))
    if "n" not in raw:
        raise ConfigError("missing required key 'n'", "n")
    n = _number(raw, "n", text, int)
    if n < 3:
        raise ConfigError(f"'n' must be >= 3, got {n}", "n", _line_of(text, "n"))
    k = _number(raw, "k", text, int) if "k" in raw else 1
    if n <= 2 * k:
        raise ConfigError(f"'k': need n > 2k, got n={n}, k={k}", "k", _line_of(text, "k"))
    if k != 1 and kind not in ("cascade",):
        raise ConfigError(f"'k' = {k} only applies to kind = \"cascade\"", "k", _line_of(text, "k"))

    p = q = None
    rhs = None
    if kind == "custom":
        if "rhs" not in raw:
            raise ConfigError("kind = \"custom\" needs an 'rhs' table", "rhs")
        rhs = raw["rhs"]
        try:
            rhs = tuple(tuple({"coeff": float(m["coeff"]), "exponents": [float(e) for e in m["exponents"]]}
                              for m in comp) for comp in rhs)
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"'rhs' must be a list of monomial lists with coeff/exponents: {exc}", "rhs",
                              _line_of(text, "rhs")) from exc
    else:
        if "p" not in raw:
            raise ConfigError(f"kind = {kind!r} needs 'p'", "p")
        p = _number(raw, "p", text)
        if kind == "scalar":
            if "q" in raw and raw["q"] != raw["p"]:
                raise ConfigError("'q' must equal 'p' (or be omitted) for kind = \"scalar\"", "q", _line_of(text, "q"))
            q = p
        else:
            if "q" not in raw:
                raise ConfigError(f"kind = {kind!r} needs 'q'", "q")
            q = _number(raw, "q", text)
        if require_pq and p * q <= 1:
            raise ConfigError(f"this command needs pq>1, got p={p:g}, q={q:g} (pq={p * q:g})", "p",
                              _line_of(text, "p"))

    if "L" in raw:
        L = _number(raw, "L", text, int)
        expected = {"lane-emden": 2, "scalar": 1, "cascade": 2 * k, "decoupled": 2}.get(kind, len(rhs or ()))
        if L != expected:
            raise ConfigError(f"'L' = {L} does not match kind {kind!r} (expects {expected})", "L", _line_of(text, "L"))

    shot = _options(ShotOptions, raw.get("shot", {}), SHOT_KEYS, "shot", text)
    search = _options(SearchOptions, raw.get("search", {}), SEARCH_KEYS, "search", text)
    a = _number(raw, "a", text) if "a" in raw else 2.0
    seed = _number(raw, "seed", text, int, positive=False) if "seed" in raw else 0
    label = str(raw.get("label", ""))
    out = raw.get("out")
    cfg = SystemConfig(kind, n, k, p, q, rhs, label, a, out, seed, shot, search)
    try:
        cfg.system()
    except ValueError as exc:
        raise ConfigError(str(exc), "rhs" if kind == "custom" else "kind") from exc
    return cfg
