"""
Radial shooting integrator for ``u_i'' + (n-1)/r u_i' = -f_i(u)``,
``u_i'(0) = 0``, ``u_i(0) = alpha_i``.

The origin is a removable singularity; integration starts at a small radius
``h0`` from the Taylor expansion forced by the equation.  The main route is
a Dormand-Prince 5(4) pair with FSAL, standard step-size control, cubic
Hermite dense output for bracketing zero crossings and Newton refinement of
the crossing radius.  ``oracle_shot`` is an independent fixed-step RK4
reference used only for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .regimes import SystemSpec


class IntegrationError(RuntimeError):
    """Step-size underflow or step budget exhausted."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class ShotOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    h0: float | None = None  # None: 1e-6 times min(1, intrinsic length of alpha)
    r_max: float = 1e4
    eps_decay: float = 1e-8
    blowup_bound: float = 1e12
    store_stride: int = 1
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        if self.h0 is not None and not (0 < self.h0 < self.r_max):
            raise ValueError("need 0 < h0 < r_max")
        if not self.eps_decay > 0:
            raise ValueError("eps_decay must be positive")
        if not self.blowup_bound > 1.0 / self.eps_decay:
            raise ValueError("blowup_bound must exceed 1/eps_decay")
        if self.store_stride < 1:
            raise ValueError("store_stride must be >= 1")


class OutcomeTag(str, Enum):
    CROSSED = "crossed"
    DECAYED = "decayed"
    BLOWUP = "blowup"
    REACHED_RMAX = "reached_rmax"


@dataclass(frozen=True)
class ShotOutcome:
    tag: OutcomeTag
    r: float  # r0 for crossed, r_end for decayed/reached, blow-up radius
    values: np.ndarray
    derivatives: np.ndarray
    component: int | None = None  # crossed component
    tie: bool = False

    @property
    def positive(self) -> bool:
        return self.tag in (OutcomeTag.DECAYED, OutcomeTag.REACHED_RMAX)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "r": self.r,
            "component": self.component,
            "tie": self.tie,
            "values": [float(v) for v in self.values],
            "derivatives": [float(v) for v in self.derivatives],
        }


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    u: np.ndarray  # (L, N)
    du: np.ndarray  # (L, N)

    def __post_init__(self):
        if self.u.shape != self.du.shape or self.u.shape[1] != self.r.shape[0]:
            raise ValueError("profile arrays have inconsistent shapes")

    @property
    def L(self) -> int:
        return self.u.shape[0]

    def restrict(self, r_hi: float) -> "RadialProfile":
        """Nodes with ``r <= r_hi``."""
        m = self.r <= r_hi
        return RadialProfile(self.r[m], self.u[:, m], self.du[:, m])

    def swapped(self, i: int = 0, j: int = 1) -> "RadialProfile":
        order = list(range(self.L))
        order[i], order[j] = order[j], order[i]
        return RadialProfile(self.r, self.u[order], self.du[order])


@dataclass
class ShotStats:
    steps: int = 0
    rejected: int = 0
    rhs_evals: int = 0
    tie: bool = False


@dataclass(frozen=True)
class Shot:
    alpha: np.ndarray
    profile: RadialProfile
    outcome: ShotOutcome
    stats: ShotStats = field(default_factory=ShotStats)


# ---------------------------------------------------------------------------
# right-hand side


def eval_rhs(spec: SystemSpec, u: Sequence[float]) -> np.ndarray:
    """``(f_1(u), ..., f_L(u))``; raises ValueError outside the closed cone."""
    return spec.evaluate(u)


def _make_source(spec: SystemSpec):
    """Fast ``f`` for the integrator, evaluated on ``max(u, 0)``.

    Trial stages of the step that crosses zero may leave the cone; the clipped
    extension is continuous and agrees with ``f`` up to the crossing.
    """
    E = spec.exponent_matrix()
    c = spec.coefficients()
    owner = spec.owners()
    L = spec.L
    if owner.shape[0] == L and np.array_equal(owner, np.arange(L)):
        def f(u):
            return c * np.prod(np.maximum(u, 0.0) ** E, axis=1)
    else:
        def f(u):
            return np.bincount(owner, weights=c * np.prod(np.maximum(u, 0.0) ** E, axis=1), minlength=L)
    return f


def series_start(spec: SystemSpec, alpha: Sequence[float], h0: float) -> tuple[np.ndarray, np.ndarray]:
    """``(u(h0), u'(h0))`` from ``u = alpha - f(alpha) r^2/(2n)``, ``u' = -f(alpha) r/n``."""
    a = np.asarray(alpha, dtype=float)
    f0 = spec.evaluate(a)
    return a - f0 * h0 * h0 / (2.0 * spec.n), -f0 * h0 / spec.n


def default_h0(spec: SystemSpec, alpha: np.ndarray) -> float:
    f0 = spec.evaluate(alpha)
    fmax = float(np.max(f0))
    amax = float(np.max(alpha))
    length = math.sqrt(amax / fmax) if fmax > 0 and amax > 0 else 1.0
    return 1e-6 * min(1.0, length)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = _A[6]
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


class _System:
    def __init__(self, spec: SystemSpec):
        self.L = spec.L
        self.nm1 = spec.n - 1.0
        self.f = _make_source(spec)
        self.evals = 0

    def __call__(self, r: float, y: np.ndarray) -> np.ndarray:
        self.evals += 1
        L = self.L
        u, w = y[:L], y[L:]
        out = np.empty_like(y)
        out[:L] = w
        out[L:] = -self.nm1 / r * w - self.f(u)
        return out


def _dp_step(sys: _System, r: float, y: np.ndarray, k0: np.ndarray, h: float):
    """One DP5 step; returns (y_new, k_last, error_vector)."""
    K = np.empty((7, y.shape[0]))
    K[0] = k0
    for s in range(1, 7):
        K[s] = sys(r + _C[s] * h, y + h * (_A[s] @ K[:s]))
    y_new = y + h * (_B @ K[:6])
    # K[6] was evaluated at y_new (FSAL)
    err = h * (_E @ K)
    return y_new, K[6], err


def _hermite(x0, x1, y0, y1, d0, d1, x):
    h = x1 - x0
    t = (x - x0) / h
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def _check_alpha(spec: SystemSpec, alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=float).reshape(-1)
    if a.shape != (spec.L,):
        raise ValueError(f"alpha needs {spec.L} entries, got {a.shape[0]}")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError(f"alpha must lie in the closed positive cone, got {a.tolist()}")
    return a


def _boundary_crossing(spec: SystemSpec, a: np.ndarray) -> int | None:
    """Lowest vanishing coordinate pushed negative at once by a positive source, if any."""
    f0 = spec.evaluate(a)
    for i in range(spec.L):
        if a[i] == 0.0 and f0[i] > 0.0:
            return i
    return None


def _single_node_shot(a: np.ndarray, tag: OutcomeTag, component: int | None) -> Shot:
    L = a.shape[0]
    prof = RadialProfile(np.zeros(1), a.reshape(L, 1).copy(), np.zeros((L, 1)))
    out = ShotOutcome(tag, 0.0, a.copy(), np.zeros(L), component)
    return Shot(a, prof, out, ShotStats())


def integrate_shot(spec: SystemSpec, alpha: Sequence[float], opts: ShotOptions = ShotOptions(), *,
                   detect_decay: bool = True) -> Shot:
    """Shoot from ``alpha`` until a component crosses zero, the profile decays
    below ``opts.eps_decay``, it blows up, or ``r_max`` is reached.

    Vanishing initial components whose source is positive at ``alpha`` cross at
    ``r0 = 0`` immediately; vanishing components with zero source stay
    identically zero and are never reported as crossing.

    ``detect_decay=False`` keeps integrating small positive profiles until
    ``r_max`` (used to resolve which component crosses first far out).
    """
    a = _check_alpha(spec, alpha)
    L = spec.L
    hit = _boundary_crossing(spec, a)
    if hit is not None:
        return _single_node_shot(a, OutcomeTag.CROSSED, hit)

    sys = _System(spec)
    stats = ShotStats()
    rtol, atol = opts.rtol, opts.atol
    h0 = opts.h0 if opts.h0 is not None else default_h0(spec, a)
    u1, w1 = series_start(spec, a, h0)
    live = a > 0  # identically-zero components never cross

    rs = [0.0, h0]
    us = [a.copy(), u1]
    ws = [np.zeros(L), w1]

    r = h0
    y = np.concatenate([u1, w1])
    k = sys(r, y)
    h = h0
    r_max = opts.r_max
    since_store = 0

    def finish(tag, r_end, y_end, component=None, tie=False):
        if rs[-1] != r_end:
            rs.append(r_end)
            us.append(y_end[:L].copy())
            ws.append(y_end[L:].copy())
        prof = RadialProfile(np.array(rs), np.array(us).T.copy(), np.array(ws).T.copy())
        stats.rhs_evals = sys.evals
        stats.tie = tie
        out = ShotOutcome(tag, float(r_end), y_end[:L].copy(), y_end[L:].copy(), component, tie)
        return Shot(a, prof, out, stats)

    while True:
        if stats.steps + stats.rejected >= opts.max_steps:
            raise IntegrationError("step budget exhausted", r=r, steps=stats.steps, rejected=stats.rejected)
        last = False
        if r + h >= r_max:
            h = r_max - r
            last = True
        if h <= 16 * np.finfo(float).eps * max(r, 1.0):
            raise IntegrationError("step size underflow", r=r, h=h, steps=stats.steps,
                                   rejected=stats.rejected, state=y.tolist())
        y_new, k_new, err = _dp_step(sys, r, y, k, h)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = math.sqrt(float(np.mean((err / sc) ** 2)))
        if not math.isfinite(en):
            en = math.inf
        if en > 1.0:
            stats.rejected += 1
            h *= max(0.2, 0.9 * en ** -0.2) if math.isfinite(en) else 0.2
            continue

        stats.steps += 1
        r_new = r_max if last else r + h
        u_old, u_new = y[:L], y_new[:L]

        crossing = live & (u_new <= 0.0)
        if crossing.any():
            return finish(*_locate_crossing(sys, spec, r, y, k, h, y_new, k_new, crossing, live, atol))

        if not np.all(np.isfinite(y_new)) or np.any(np.abs(u_new) > opts.blowup_bound):
            return finish(OutcomeTag.BLOWUP, r_new, y_new)

        since_store += 1
        if since_store >= opts.store_stride:
            rs.append(r_new)
            us.append(u_new.copy())
            ws.append(y_new[L:].copy())
            since_store = 0

        if detect_decay and np.all(u_new < opts.eps_decay) and np.all(y_new[L:] <= 0.0):
            return finish(OutcomeTag.DECAYED, r_new, y_new)
        if last:
            return finish(OutcomeTag.REACHED_RMAX, r_new, y_new)

        r, y, k = r_new, y_new, k_new
        fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        h *= fac


def _locate_crossing(sys, spec, r, y, k, h, y_new, k_new, crossing, live, atol):
    L = spec.L
    r1 = r + h
    roots = {}
    for i in np.flatnonzero(crossing):
        g = lambda x, i=i: _hermite(r, r1, y[i], y_new[i], k[i], k_new[i], x)
        if g(r) <= 0:
            roots[i] = r
        else:
            roots[i] = brentq(g, r, r1, xtol=1e-15 * max(1.0, r1), rtol=4 * np.finfo(float).eps)
    i = min(roots, key=lambda j: (roots[j], j))
    rho = roots[i]

    # Newton on the exact DP5 sub-step from (r, y)
    best = None
    for _ in range(30):
        if rho <= r:
            ys = y.copy()
        else:
            ys, _, _ = _dp_step(sys, r, y, k, rho - r)
        val, slope = ys[i], ys[L + i]
        if best is None or abs(val) < abs(best[1][i]):
            best = (rho, ys)
        if abs(val) <= atol or slope == 0.0:
            break
        step = val / slope
        new = min(max(rho - step, r), r1)
        if new == rho:
            break
        rho = new
    rho, ys = best

    # lowest-index component within root tolerance wins a tie
    tied = [j for j in range(L) if live[j] and ys[j] <= atol and j != i]
    tie = bool(tied)
    comp = min([i] + tied)
    return OutcomeTag.CROSSED, rho, ys, int(comp), tie


# ---------------------------------------------------------------------------
# fixed-step RK4 reference


def oracle_shot(spec: SystemSpec, alpha: Sequence[float], h: float, r_max: float) -> Shot:
    """Classical RK4 with constant step ``h`` from the series start at ``r = h``.

    A zero crossing is first placed by linear interpolation between the
    bracketing nodes, then polished by secant iteration on partial RK4 steps
    from the last positive node so the crossing radius keeps the method's
    fourth-order accuracy.  No decay detection: ends at the crossing or at
    ``r_max``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    a = _check_alpha(spec, alpha)
    L = spec.L
    hit = _boundary_crossing(spec, a)
    if hit is not None:
        return _single_node_shot(a, OutcomeTag.CROSSED, hit)

    f = _make_source(spec)
    nm1 = spec.n - 1.0
    evals = 0

    def F(r, u, w):
        nonlocal evals
        evals += 1
        return w, -nm1 / r * w - f(u)

    def rk4(r, u, w, dt):
        k1u, k1w = F(r, u, w)
        k2u, k2w = F(r + dt / 2, u + dt / 2 * k1u, w + dt / 2 * k1w)
        k3u, k3w = F(r + dt / 2, u + dt / 2 * k2u, w + dt / 2 * k2w)
        k4u, k4w = F(r + dt, u + dt * k3u, w + dt * k3w)
        return (u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u),
                w + dt / 6 * (k1w + 2 * k2w + 2 * k3w + k4w))

    live = a > 0
    u, w = series_start(spec, a, h)
    rs, us, ws = [0.0, h], [a.copy(), u.copy()], [np.zeros(L), w.copy()]
    r = h
    steps = 0
    nsteps = int(math.floor(r_max / h + 1e-9))
    outcome = None
    for j in range(2, nsteps + 1):
        r_new = j * h
        u_new, w_new = rk4(r, u, w, h)
        steps += 1
        crossing = live & (u_new <= 0.0)
        if crossing.any():
            cands = []
            for i in np.flatnonzero(crossing):
                x = r + h * u[i] / (u[i] - u_new[i])
                cands.append((x, i))
            x, i = min(cands)
            # secant polish on the partial-step map dt -> u_i(r + dt)
            g = lambda dt: rk4(r, u, w, dt)[0][i] if dt > 0 else u[i]
            d0, d1 = x - r, r_new - r
            g0, g1 = g(d0), g(d1)
            for _ in range(50):
                if g1 == g0:
                    break
                d2 = d1 - g1 * (d1 - d0) / (g1 - g0)
                d0, g0 = d1, g1
                d1, g1 = d2, g(d2)
                if abs(d1 - d0) <= 1e-15 * max(1.0, r):
                    break
            uc, wc = rk4(r, u, w, d1)
            rs.append(r + d1)
            us.append(uc)
            ws.append(wc)
            outcome = ShotOutcome(OutcomeTag.CROSSED, r + d1, uc.copy(), wc.copy(), int(i))
            break
        r, u, w = r_new, u_new, w_new
        rs.append(r)
        us.append(u.copy())
        ws.append(w.copy())
    if outcome is None:
        outcome = ShotOutcome(OutcomeTag.REACHED_RMAX, r, u.copy(), w.copy())
    prof = RadialProfile(np.array(rs), np.array(us).T.copy(), np.array(ws).T.copy())
    return Shot(a, prof, outcome, ShotStats(steps=steps, rhs_evals=evals))


# ---------------------------------------------------------------------------
# integrated flux identity r^{n-1} u_i'(r) = -int_0^r s^{n-1} f_i(u(s)) ds


def source_gradient(spec: SystemSpec, u: np.ndarray) -> np.ndarray:
    """Jacobian ``df_i/du_j`` at positive ``u`` (``L x L``)."""
    L = spec.L
    J = np.zeros((L, L))
    for i, terms in enumerate(spec.rhs):
        for m in terms:
            for j in range(L):
                e = m.exponents[j]
                if e == 0:
                    continue
                val = m.coeff * e
                for l in range(L):
                    el = m.exponents[l] - (1.0 if l == j else 0.0)
                    if el != 0:
                        val *= u[l] ** el
                J[i, j] += val
    return J


def cumulative_hermite(x: np.ndarray, g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Cumulative integral of ``g`` from ``x[0]``: trapezoid rule with the
    Hermite end correction ``h^2/12 (g'_k - g'_{k+1})`` per interval."""
    h = np.diff(x)
    pieces = 0.5 * h * (g[..., :-1] + g[..., 1:]) + h * h / 12.0 * (dg[..., :-1] - dg[..., 1:])
    out = np.zeros_like(g, dtype=float)
    out[..., 1:] = np.cumsum(pieces, axis=-1)
    return out


def source_integrand(spec: SystemSpec, profile: RadialProfile) -> tuple[np.ndarray, np.ndarray]:
    """``s^{n-1} f_i(u(s))`` and its ``s``-derivative on the profile nodes."""
    n = spec.n
    r = profile.r
    u = np.maximum(profile.u, 0.0)
    f = np.array([spec.evaluate(u[:, j]) for j in range(r.shape[0])]).T
    dfdr = np.empty_like(f)
    for j in range(r.shape[0]):
        uj = u[:, j]
        if np.all(uj > 0):
            dfdr[:, j] = source_gradient(spec, uj) @ profile.du[:, j]
        else:
            dfdr[:, j] = 0.0
    g = r ** (n - 1) * f
    dg = (n - 1) * r ** max(n - 2, 0) * f + r ** (n - 1) * dfdr
    return g, dg


def flux_residual(spec: SystemSpec, shot: Shot | RadialProfile) -> np.ndarray:
    """Max over nodes of ``|r^{n-1}u_i' + int_0^r s^{n-1} f_i|``, per component,
    relative to the largest flux magnitude of that component."""
    prof = shot.profile if isinstance(shot, Shot) else shot
    g, dg = source_integrand(spec, prof)
    integral = cumulative_hermite(prof.r, g, dg)
    flux = prof.r ** (spec.n - 1) * prof.du
    diff = np.abs(flux + integral).max(axis=1)
    scale = np.maximum(np.abs(flux).max(axis=1), np.abs(integral).max(axis=1))
    return np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)


def with_options(opts: ShotOptions, **changes) -> ShotOptions:
    return replace(opts, **changes)
