"""
Target map, separating-initial-value search on the simplex
``A_a = {alpha >= 0, sum alpha = a}`` and first-zero scans.

Cells are labelled by the component that crosses zero first.  A shot that
is still positive at ``r_max`` is followed further out (to
``SearchOptions.label_rmax``, pure relative error control, no decay stop)
to learn which component eventually crosses; only shots positive all the
way to that horizon count as separating cells.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .integrator import (
    OutcomeTag,
    Shot,
    ShotOptions,
    ShotOutcome,
    integrate_shot,
)
from .regimes import SystemSpec, scaling_exponents


class TargetMapError(RuntimeError):
    """The radial flow blew up, which conforming systems exclude."""


class NoSeparation(RuntimeError):
    """Every probed initial value carries the same crossing label."""

    def __init__(self, label, history=()):
        super().__init__(f"no label change on the simplex: every probe is labelled {label!r}")
        self.label = label
        self.history = list(history)


class IndeterminateBracket(RuntimeError):
    """Labels are separated only by cells that stay positive to the label horizon."""

    def __init__(self, lo, hi, history=()):
        super().__init__(f"labels separated only by unresolved cells on [{lo!r}, {hi!r}]")
        self.lo = lo
        self.hi = hi
        self.history = list(history)


@dataclass(frozen=True)
class TargetPoint:
    point: np.ndarray
    source_outcome: ShotOutcome | None  # None for boundary alpha
    indeterminate: bool = False


def target_map(spec: SystemSpec, alpha: Sequence[float], opts: ShotOptions = ShotOptions()) -> TargetPoint:
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0):
        raise ValueError("alpha must lie in the closed positive cone")
    if np.any(a == 0):
        return TargetPoint(a.copy(), None)
    shot = integrate_shot(spec, a, opts)
    out = shot.outcome
    if out.tag is OutcomeTag.BLOWUP:
        raise TargetMapError(f"blow-up at r={out.r:g} from alpha={a.tolist()}")
    if out.tag is OutcomeTag.CROSSED:
        point = np.maximum(out.values, 0.0)
        point[out.component] = 0.0
        return TargetPoint(point, out)
    if out.tag is OutcomeTag.DECAYED:
        return TargetPoint(np.zeros_like(a), out)
    return TargetPoint(np.maximum(out.values, 0.0), out, indeterminate=True)


# ---------------------------------------------------------------------------
# labels


@dataclass(frozen=True)
class SearchOptions:
    tol: float = 1e-12  # bracket width in t (L = 2) or cell diameter (L > 2)
    label_rmax: float = 1e40
    max_levels: int = 60  # subdivision depth for L > 2
    probes: int = 5  # interior probe points before bisection (L = 2)
    max_bisections: int = 200
    jobs: int = 1


@dataclass(frozen=True)
class Probe:
    alpha: tuple[float, ...]
    label: int | None
    r0: float  # crossing radius of the label shot, inf if none
    extended: bool  # label came from the far-field continuation
    t: float | None = None

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "alpha": list(self.alpha),
            "label": self.label,
            "r0": self.r0 if math.isfinite(self.r0) else None,
            "extended": self.extended,
        }


def _label_options(opts: ShotOptions, search: SearchOptions) -> ShotOptions:
    return replace(opts, r_max=search.label_rmax, atol=1e-300, eps_decay=1e-300, blowup_bound=1e301)


def crossing_label(spec: SystemSpec, alpha, opts: ShotOptions = ShotOptions(),
                   search: SearchOptions = SearchOptions()) -> Probe:
    """Which component crosses zero first; None if the shot stays positive to the label horizon."""
    a = np.asarray(alpha, dtype=float)
    shot = integrate_shot(spec, a, opts)
    extended = False
    if shot.outcome.tag in (OutcomeTag.DECAYED, OutcomeTag.REACHED_RMAX):
        shot = integrate_shot(spec, a, _label_options(opts, search), detect_decay=False)
        extended = True
    out = shot.outcome
    if out.tag is OutcomeTag.BLOWUP:
        raise TargetMapError(f"blow-up at r={out.r:g} from alpha={a.tolist()}")
    if out.tag is OutcomeTag.CROSSED:
        return Probe(tuple(a.tolist()), int(out.component), float(out.r), extended)
    return Probe(tuple(a.tolist()), None, math.inf, extended)


def _label_many(spec, alphas, opts, search) -> list[Probe]:
    if search.jobs > 1 and len(alphas) > 1:
        with ProcessPoolExecutor(max_workers=search.jobs) as pool:
            return list(pool.map(crossing_label, itertools.repeat(spec), alphas,
                                 itertools.repeat(opts), itertools.repeat(search)))
    return [crossing_label(spec, a, opts, search) for a in alphas]


# ---------------------------------------------------------------------------
# simplex search


@dataclass(frozen=True)
class GroundStateResult:
    alpha_star: np.ndarray
    t_star: float | None  # simplex parameter for L = 2, None otherwise
    bracket_width: float
    shot: Shot
    status: str  # "ground_state": midpoint shot positive; "indeterminate": it still crosses
    lo: Probe | None = None
    hi: Probe | None = None
    history: tuple[Probe, ...] = field(default=(), repr=False)
    vertices: np.ndarray | None = None  # final cell for L > 2

    def to_dict(self) -> dict:
        return {
            "alpha_star": [float(v) for v in self.alpha_star],
            "t_star": self.t_star,
            "bracket_width": self.bracket_width,
            "status": self.status,
            "outcome": self.shot.outcome.to_dict(),
            "bracket": [p.to_dict() for p in (self.lo, self.hi) if p is not None],
            "history": [p.to_dict() for p in self.history],
        }


def simplex_point(a: float, t: float) -> np.ndarray:
    return np.array([t * a, (1.0 - t) * a])


def simplex_search(spec: SystemSpec, a: float = 2.0, opts: ShotOptions = ShotOptions(),
                   search: SearchOptions = SearchOptions()) -> GroundStateResult:
    """Locate an initial value on ``A_a`` where the first-crossing label changes.

    For two components ``A_a`` is parametrised by ``alpha(t) = (t a, (1-t) a)``
    and the label change is bisected to ``search.tol`` in ``t``.  The returned
    shot is integrated from the bracket midpoint with ``opts``; its status is
    ``"ground_state"`` when it stays positive (decays or reaches ``r_max``)
    and ``"indeterminate"`` when it still crosses, which is what the
    subcritical regime produces.

    Raises
    ------
    NoSeparation
        All probes carry the same label.
    IndeterminateBracket
        The labels are separated only by cells positive to the label horizon.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if spec.L == 1:
        shot = integrate_shot(spec, [a], opts)
        status = "ground_state" if shot.outcome.positive else "indeterminate"
        return GroundStateResult(np.array([a]), None, 0.0, shot, status)
    if spec.L > 2:
        return _subdivision_search(spec, a, opts, search)

    history: list[Probe] = []

    def probe(t):
        pr = crossing_label(spec, simplex_point(a, t), opts, search)
        pr = replace(pr, t=float(t))
        history.append(pr)
        return pr

    ts = [0.0] + [(j + 1) / (search.probes + 1) for j in range(search.probes)] + [1.0]
    pts = [probe(t) for t in ts]
    known = [p for p in pts if p.label is not None]
    if len({p.label for p in known}) < 2:
        sep = [p for p in pts if p.label is None]
        if known and not sep:
            raise NoSeparation(known[0].label, history)
        if not known:
            raise IndeterminateBracket(0.0, 1.0, history)

    # first adjacent labelled pair with different labels; unresolved probes in between are kept
    lo = hi = None
    for left, right in zip(known, known[1:]):
        if left.label != right.label:
            lo, hi = left, right
            break
    if lo is None:
        raise NoSeparation(known[0].label, history)
    seps = [p for p in pts if p.label is None and lo.t < p.t < hi.t]
    sep_lo = min((p.t for p in seps), default=None)
    sep_hi = max((p.t for p in seps), default=None)

    for _ in range(search.max_bisections):
        if hi.t - lo.t <= search.tol:
            break
        if sep_lo is None:
            mid = 0.5 * (lo.t + hi.t)
        else:
            left_gap, right_gap = sep_lo - lo.t, hi.t - sep_hi
            if max(left_gap, right_gap) <= search.tol:
                if sep_hi - sep_lo > search.tol:
                    raise IndeterminateBracket(lo.t, hi.t, history)
                break
            mid = 0.5 * (lo.t + sep_lo) if left_gap >= right_gap else 0.5 * (sep_hi + hi.t)
        if mid <= lo.t or mid >= hi.t:
            break  # floating-point resolution of t exhausted
        pm = probe(mid)
        if pm.label is None:
            sep_lo = mid if sep_lo is None else min(sep_lo, mid)
            sep_hi = mid if sep_hi is None else max(sep_hi, mid)
        elif pm.label == lo.label:
            lo = pm
        elif pm.label == hi.label:
            hi = pm
        else:  # cannot happen for two components
            hi = pm
        if sep_lo is not None and not (lo.t < sep_lo and sep_hi < hi.t):
            inside = [p.t for p in history if p.label is None and lo.t < p.t < hi.t]
            sep_lo = min(inside, default=None)
            sep_hi = max(inside, default=None)

    t_star = 0.5 * (lo.t + hi.t)
    if sep_lo is not None:
        t_star = 0.5 * (sep_lo + sep_hi)
    alpha_star = simplex_point(a, t_star)
    shot = integrate_shot(spec, alpha_star, opts)
    status = "ground_state" if shot.outcome.positive else "indeterminate"
    return GroundStateResult(alpha_star, float(t_star), float(hi.t - lo.t), shot, status, lo, hi, tuple(history))


def _barycentric_children(vertices: np.ndarray):
    """Barycentric subdivision of a simplex: one child per vertex ordering."""
    L = vertices.shape[0]
    bary = {}
    for size in range(1, L + 1):
        for face in itertools.combinations(range(L), size):
            bary[face] = vertices[list(face)].mean(axis=0)
    children = []
    for perm in itertools.permutations(range(L)):
        chain = [tuple(sorted(perm[: j + 1])) for j in range(L)]
        children.append(chain)
    return bary, children


def _diameter(vertices: np.ndarray) -> float:
    return max(float(np.linalg.norm(x - y)) for x, y in itertools.combinations(vertices, 2))


def _subdivision_search(spec, a, opts, search) -> GroundStateResult:
    """Sperner-style refinement: keep a fully labelled cell under repeated
    barycentric subdivision until its diameter drops below ``search.tol``.

    Best effort: stops at ``search.max_levels`` or when no child cell is
    fully labelled.
    """
    L = spec.L
    cache: dict[tuple, Probe] = {}
    history: list[Probe] = []

    def labels(points):
        keys = [tuple(np.round(p, 15).tolist()) for p in points]
        todo = [k for k in dict.fromkeys(keys) if k not in cache]
        for k, pr in zip(todo, _label_many(spec, [np.array(k) for k in todo], opts, search)):
            cache[k] = pr
            history.append(pr)
        return [cache[k] for k in keys]

    def full(cell_labels):
        return None not in cell_labels and len(set(cell_labels)) == L

    cell = a * np.eye(L)
    # the corner cell is rarely fully labelled; look two subdivision levels down first
    frontier = [cell]
    found = None
    for _ in range(3):
        nxt = []
        for v in frontier:
            lab = [p.label for p in labels(list(v))]
            if full(lab):
                found = v
                break
            bary, children = _barycentric_children(v)
            nxt.extend(np.array([bary[f] for f in chain]) for chain in children)
        if found is not None:
            break
        frontier = nxt
    if found is None:
        seen = {p.label for p in history}
        raise NoSeparation(seen.pop() if len(seen) == 1 else sorted(seen, key=str), history)

    cell = found
    for _ in range(search.max_levels):
        if _diameter(cell) <= search.tol:
            break
        bary, children = _barycentric_children(cell)
        pts = list(bary.values())
        labels(pts)
        nxt = None
        for chain in children:
            verts = np.array([bary[f] for f in chain])
            if full([p.label for p in labels(list(verts))]):
                nxt = verts
                break
        if nxt is None:
            break
        cell = nxt

    alpha_star = cell.mean(axis=0)
    shot = integrate_shot(spec, alpha_star, opts)
    status = "ground_state" if shot.outcome.positive else "indeterminate"
    return GroundStateResult(alpha_star, None, _diameter(cell), shot, status, history=tuple(history), vertices=cell)


# ---------------------------------------------------------------------------
# first-zero scans


@dataclass(frozen=True)
class ScanRow:
    alpha: tuple[float, ...]
    outcome: str
    r0: float  # inf unless crossed
    component: int | None
    collapse_residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "outcome": self.outcome,
            "r0": self.r0 if math.isfinite(self.r0) else "inf",
            "component": self.component,
            "collapse_residual": self.collapse_residual,
        }


@dataclass(frozen=True)
class ScanTable:
    rows: tuple[ScanRow, ...]
    scale_lambda: float | None = None

    @property
    def max_collapse_residual(self) -> float | None:
        vals = [r.collapse_residual for r in self.rows if r.collapse_residual is not None]
        return max(vals) if vals else None

    def to_dict(self) -> dict:
        return {
            "r0_table": [r.to_dict() for r in self.rows],
            "scale_lambda": self.scale_lambda,
            "max_collapse_residual": self.max_collapse_residual,
        }


def simplex_grid(a: float, count: int) -> list[np.ndarray]:
    """``count`` evenly spaced interior points of the two-component simplex ``A_a``."""
    return [simplex_point(a, (j + 0.5) / count) for j in range(count)]


def simplex_samples(a: float, count: int, L: int, seed: int = 0) -> list[np.ndarray]:
    """Uniform random interior points of ``A_a``."""
    rng = np.random.default_rng(seed)
    return [a * x for x in rng.dirichlet(np.ones(L), size=count)]


def _scan_row(spec, alpha, opts, lam, d):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError(f"scan points must be interior, got {alpha.tolist()}")
    out = integrate_shot(spec, alpha, opts).outcome
    r0 = out.r if out.tag is OutcomeTag.CROSSED else math.inf
    resid = None
    if lam is not None and d is not None and out.tag is OutcomeTag.CROSSED:
        scaled = integrate_shot(spec, lam ** d * alpha, opts).outcome
        if scaled.tag is OutcomeTag.CROSSED:
            resid = abs(lam * scaled.r - r0) / r0
        else:
            resid = math.inf
    return ScanRow(tuple(alpha.tolist()), out.tag.value, float(r0), out.component, resid)


def dirichlet_scan(spec: SystemSpec, alphas: Iterable[Sequence[float]], opts: ShotOptions = ShotOptions(),
                   scale_lambda: float | None = 2.0, jobs: int = 1) -> ScanTable:
    """First-zero radius and crossing component for each interior ``alpha``.

    When the system has power-law scaling, each crossing row also gets the
    collapse residual ``|lam r0(lam^d alpha) - r0(alpha)| / r0(alpha)``.
    """
    d = scaling_exponents(spec) if scale_lambda is not None else None
    lam = scale_lambda if d is not None else None
    alphas = [np.asarray(x, dtype=float) for x in alphas]
    if jobs > 1 and len(alphas) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_row, itertools.repeat(spec), alphas, itertools.repeat(opts),
                                 itertools.repeat(lam), itertools.repeat(d)))
    else:
        rows = [_scan_row(spec, x, opts, lam, d) for x in alphas]
    return ScanTable(tuple(rows), lam)
