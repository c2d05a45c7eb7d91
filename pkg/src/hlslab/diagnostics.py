"""
Checks of the structural estimates on computed radial profiles.

All Lane-Emden checks assume the encoding ``-Δu_1 = u_2^q``,
``-Δu_2 = u_1^p``.  In the "``-ΔU = V^p``, ``-ΔV = U^q``" form in which the
estimates are usually written this means ``U = u_2`` and ``V = u_1``: the
comparison inequality for ``p >= q`` reads
``u_1^{p+1}/(p+1) <= u_2^{q+1}/(q+1)``, and ``u_2`` decays like
``r^-alpha``, ``u_1`` like ``r^-beta``.  A scalar profile (one component)
is treated as the pair ``u = v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gamma

from .integrator import RadialProfile, cumulative_hermite, source_integrand
from .regimes import PowerPair, RegimeTag, SystemSpec, classify, scaling_exponents

MIN_FIT_NODES = 20
COMPARISON_RTOL = 1e-8
ENERGY_SLACK = 0.1
POHOZAEV_RTOL = 1e-5


class WindowError(ValueError):
    """Fit window holds too few nodes or leaves the positive part of the profile."""


def sphere_area(n: int) -> float:
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


def _loglog_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    return float(coef[0]), float(coef[1]), resid


# ---------------------------------------------------------------------------
# decay slopes


@dataclass(frozen=True)
class SlopeReport:
    slopes: tuple[float, ...]
    window: tuple[float, float]
    residuals: tuple[float, ...]
    nodes: int
    predicted: tuple[float, ...] | None = None
    limits: tuple[float, ...] | None = None  # u_i r^{d_i} at the window's outer end, no verdict

    def relative_errors(self) -> tuple[float, ...] | None:
        if self.predicted is None:
            return None
        return tuple(abs(s - p) / abs(p) for s, p in zip(self.slopes, self.predicted))

    def within(self, rtol: float) -> bool:
        errs = self.relative_errors()
        return errs is not None and all(e <= rtol for e in errs)

    def to_dict(self) -> dict:
        return {
            "slopes": list(self.slopes),
            "predicted": None if self.predicted is None else list(self.predicted),
            "window": list(self.window),
            "residuals": list(self.residuals),
            "nodes": self.nodes,
            "limits": None if self.limits is None else list(self.limits),
        }


def predicted_decay(spec: SystemSpec) -> np.ndarray | None:
    """Decay exponents ``d_i`` (``u_i ~ r^-d_i``) where the two-sided bound is
    known: supercritical Lane-Emden pairs and supercritical scalar powers."""
    if spec.powers is None or spec.L > 2:
        return None
    if classify(spec.n, spec.powers).tag is not RegimeTag.SUPERCRITICAL:
        return None
    return scaling_exponents(spec)


def fit_decay_slopes(profile: RadialProfile, window: tuple[float, float] | None = None,
                     spec: SystemSpec | None = None) -> SlopeReport:
    """Least-squares slope of ``log u_i`` against ``log r`` on ``window``
    (default ``[r_end/10, r_end/2]``).  For supercritical systems the slopes
    are compared against ``-d_i``; other regimes get no prediction."""
    r = profile.r
    lo, hi = window if window is not None else (r[-1] / 10.0, r[-1] / 2.0)
    m = (r >= lo) & (r <= hi)
    if m.sum() < MIN_FIT_NODES:
        raise WindowError(f"window [{lo:g}, {hi:g}] holds {int(m.sum())} nodes, need {MIN_FIT_NODES}")
    u = profile.u[:, m]
    if np.any(u <= 0):
        raise WindowError(f"profile is not positive on [{lo:g}, {hi:g}]")
    fits = [_loglog_fit(r[m], ui) for ui in u]
    predicted = limits = None
    d = predicted_decay(spec) if spec is not None else None
    if d is not None:
        predicted = tuple(float(-x) for x in d)
        rr = r[m][-1]
        limits = tuple(float(ui[-1] * rr ** di) for ui, di in zip(u, d))
    return SlopeReport(
        tuple(f[0] for f in fits), (float(lo), float(hi)), tuple(f[2] for f in fits),
        int(m.sum()), predicted, limits,
    )


# ---------------------------------------------------------------------------
# comparison principle


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float  # signed: <= 0 means the inequality holds everywhere
    scale: float
    r_at_max: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= COMPARISON_RTOL * self.scale


def check_comparison(profile: RadialProfile, pq: PowerPair) -> ComparisonReport:
    """Max over nodes of ``u_1^{p+1}/(p+1) - u_2^{q+1}/(q+1)`` for ``p >= q``.

    Raises ValueError for ``p < q``; relabel the system (swap ``p``/``q``
    and the components) instead.
    """
    p, q = pq.p, pq.q
    if p < q:
        raise ValueError(f"comparison needs p >= q, got p={p:g}, q={q:g}; swap the roles")
    if profile.L == 1:
        v = u = profile.u[0]
    elif profile.L == 2:
        v, u = profile.u
    else:
        raise ValueError("comparison check needs a one- or two-component profile")
    v = np.maximum(v, 0.0)
    u = np.maximum(u, 0.0)
    gap = v ** (p + 1) / (p + 1) - u ** (q + 1) / (q + 1)
    j = int(np.argmax(gap))
    scale = float(np.max(u ** (q + 1) / (q + 1)))
    return ComparisonReport(float(gap[j]), scale, float(profile.r[j]))


# ---------------------------------------------------------------------------
# energy growth


@dataclass(frozen=True)
class GrowthEntry:
    name: str
    exponent: float  # nan when the integral vanishes identically
    bound: float

    @property
    def passed(self) -> bool:
        return math.isnan(self.exponent) or self.exponent <= self.bound + ENERGY_SLACK

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "exponent": None if math.isnan(self.exponent) else self.exponent,
            "bound": self.bound,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class EnergyReport:
    entries: tuple[GrowthEntry, ...]
    window: tuple[float, float]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def exponents(self) -> dict[str, float]:
        return {e.name: e.exponent for e in self.entries}


def _ball_integral(n: int, r: np.ndarray, g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """``|S^{n-1}| int_0^R s^{n-1} g ds`` at every node."""
    w = r ** (n - 1)
    dw = (n - 1) * r ** (n - 2)
    return sphere_area(n) * cumulative_hermite(r, w * g, dw * g + w * dg)


def energy_growth(profile: RadialProfile, spec: SystemSpec, window: tuple[float, float] | None = None,
                  moments: Sequence[float] = ()) -> EnergyReport:
    """Fitted growth exponents of ``R -> int_{B_R} u_i`` and ``R -> int_{B_R} f_i(u)``.

    Bounds are ``n - d_i`` and ``n - 2 - d_i`` with ``d`` the scaling
    exponents; for the Lane-Emden pair these are ``n - beta``, ``n - alpha``
    for ``u_1``, ``u_2`` and ``n - q alpha``, ``n - p beta`` for
    ``u_2^q``, ``u_1^p``.  Each ``s`` in ``moments`` adds ``int u_i^s`` with
    bound ``n - s d_i``.  Default window is ``[r_end/10, r_end]``.
    """
    d = scaling_exponents(spec)
    if d is None:
        raise ValueError("energy bounds need a system with power-law scaling")
    n = spec.n
    r = profile.r
    lo, hi = window if window is not None else (r[-1] / 10.0, r[-1])
    m = (r >= lo) & (r <= hi)
    if m.sum() < 2:
        raise WindowError(f"window [{lo:g}, {hi:g}] holds {int(m.sum())} nodes")
    u = np.maximum(profile.u, 0.0)
    du = np.where(profile.u > 0, profile.du, 0.0)

    g_src, dg_src = source_integrand(spec, profile)
    # source_integrand already carries s^{n-1}
    src = sphere_area(n) * cumulative_hermite(r, g_src, dg_src)

    def fit(name, cum, bound):
        y = cum[m]
        if np.all(y == 0):
            return GrowthEntry(name, math.nan, float(bound))
        if np.any(y <= 0):
            raise WindowError(f"{name}: integral not positive on the window")
        return GrowthEntry(name, _loglog_fit(r[m], y)[0], float(bound))

    entries = []
    for i in range(profile.L):
        entries.append(fit(f"u{i + 1}", _ball_integral(n, r, u[i], du[i]), n - d[i]))
    for i in range(profile.L):
        entries.append(fit(f"f{i + 1}", src[i], n - 2 - d[i]))
    for s in moments:
        for i in range(profile.L):
            g = u[i] ** s
            dg = np.where(u[i] > 0, s * u[i] ** (s - 1) * du[i], 0.0)
            entries.append(fit(f"u{i + 1}^{s:g}", _ball_integral(n, r, g, dg), n - s * d[i]))
    return EnergyReport(tuple(entries), (float(lo), float(hi)))


# ---------------------------------------------------------------------------
# Pohozaev identity


@dataclass(frozen=True)
class PohozaevPoint:
    R: float
    lhs: float
    rhs: float
    residual: float

    def to_dict(self) -> dict:
        return {"R": self.R, "lhs": self.lhs, "rhs": self.rhs, "residual": self.residual}


def _pair_arrays(profile: RadialProfile):
    """(V, V', U, U') in the ``-ΔU = V^p`` orientation."""
    if profile.L == 1:
        return profile.u[0], profile.du[0], profile.u[0], profile.du[0]
    if profile.L == 2:
        return profile.u[0], profile.du[0], profile.u[1], profile.du[1]
    raise ValueError("Pohozaev check needs a one- or two-component profile")


def _second_derivatives(spec: SystemSpec, profile: RadialProfile) -> np.ndarray:
    r = profile.r
    f = np.array([spec.evaluate(np.maximum(profile.u[:, j], 0.0)) for j in range(r.shape[0])]).T
    dd = np.empty_like(profile.du)
    inner = r > 0
    dd[:, inner] = -(spec.n - 1) / r[inner] * profile.du[:, inner] - f[:, inner]
    dd[:, ~inner] = -f[:, ~inner] / spec.n
    return dd


def _at(r, y, dy, R):
    """Cubic Hermite value of ``y`` at ``R`` from node values and slopes."""
    j = int(np.searchsorted(r, R))
    if j < r.shape[0] and abs(r[j] - R) <= 1e-13 * max(1.0, R):
        return y[j]
    j = min(max(j, 1), r.shape[0] - 1)
    x0, x1 = r[j - 1], r[j]
    h = x1 - x0
    t = (R - x0) / h
    return ((1 + 2 * t) * (1 - t) ** 2 * y[j - 1] + t * (1 - t) ** 2 * h * dy[j - 1]
            + t * t * (3 - 2 * t) * y[j] + t * t * (t - 1) * h * dy[j])


def pohozaev_residual(profile: RadialProfile, spec: SystemSpec, a1: float,
                      checkpoints: Sequence[float]) -> list[PohozaevPoint]:
    """Relative residual of the radial Pohozaev identity at each ``R``.

    With ``a2 = n - 2 - a1``::

        (n/(p+1) - a1) int_0^R s^{n-1} V^{p+1} + (n/(q+1) - a2) int_0^R s^{n-1} U^{q+1}
          = R^{n-1} (R V^{p+1}/(p+1) + R U^{q+1}/(q+1) + R U'V' + a1 U'V + a2 V'U)

    evaluated at ``R``.  The residual is ``|LHS - RHS|`` over the sum of the
    absolute values of all individual terms, so it stays meaningful when
    both sides cancel to zero.
    """
    if spec.powers is None:
        raise ValueError("Pohozaev check needs a Lane-Emden or scalar system")
    p, q = spec.powers.p, spec.powers.q
    n = spec.n
    a2 = n - 2.0 - a1
    r = profile.r
    V, dV, U, dU = _pair_arrays(profile)
    dd = _second_derivatives(spec, profile)
    ddV, ddU = (dd[0], dd[0]) if profile.L == 1 else (dd[0], dd[1])
    Vp, Up = np.maximum(V, 0.0), np.maximum(U, 0.0)

    w, dw = r ** (n - 1), (n - 1) * r ** (n - 2)
    gV = w * Vp ** (p + 1)
    dgV = dw * Vp ** (p + 1) + w * (p + 1) * Vp ** p * dV
    gU = w * Up ** (q + 1)
    dgU = dw * Up ** (q + 1) + w * (q + 1) * Up ** q * dU
    IV = cumulative_hermite(r, gV, dgV)
    IU = cumulative_hermite(r, gU, dgU)

    out = []
    for R in checkpoints:
        if not (r[0] <= R <= r[-1]):
            raise ValueError(f"checkpoint R={R:g} outside the profile range [{r[0]:g}, {r[-1]:g}]")
        IVR = _at(r, IV, gV, R)
        IUR = _at(r, IU, gU, R)
        v, u = _at(r, V, dV, R), _at(r, U, dU, R)
        dv, du_ = _at(r, dV, ddV, R), _at(r, dU, ddU, R)
        v, u = max(v, 0.0), max(u, 0.0)
        lhs_terms = [(n / (p + 1) - a1) * IVR, (n / (q + 1) - a2) * IUR]
        scale = R ** (n - 1)
        rhs_terms = [scale * R * v ** (p + 1) / (p + 1), scale * R * u ** (q + 1) / (q + 1),
                     scale * R * du_ * dv, scale * a1 * du_ * v, scale * a2 * dv * u]
        lhs, rhs = sum(lhs_terms), sum(rhs_terms)
        denom = sum(abs(x) for x in lhs_terms + rhs_terms)
        resid = abs(lhs - rhs) / denom if denom > 0 else 0.0
        out.append(PohozaevPoint(float(R), float(lhs), float(rhs), float(resid)))
    return out


# ---------------------------------------------------------------------------
# derivative bound and combined report


def derivative_bound_margin(profile: RadialProfile, n: int) -> float:
    """``min_i min_r ((n-2) u_i + r u_i') / max_i u_i(0)``; non-negative for
    profiles that stay positive on their whole range."""
    u, du, r = profile.u, profile.du, profile.r
    margin = (n - 2) * u + r * du
    scale = float(np.max(np.abs(u[:, 0]))) or 1.0
    return float(margin.min() / scale)


@dataclass
class DiagnosticsReport:
    comparison_max_violation: float | None
    energy_exponents: dict[str, dict] = field(default_factory=dict)
    pohozaev: list[dict] = field(default_factory=list)
    slopes: dict | None = None
    derivative_bound_margin: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "comparison_max_violation": self.comparison_max_violation,
            "energy_exponents": self.energy_exponents,
            "pohozaev": self.pohozaev,
            "slopes": self.slopes,
            "derivative_bound_margin": self.derivative_bound_margin,
            "notes": list(self.notes),
        }


def verify_profile(profile: RadialProfile, spec: SystemSpec, checkpoints: Sequence[float] | None = None,
                   a1: float | None = None, window: tuple[float, float] | None = None,
                   moments: Sequence[float] = ()) -> DiagnosticsReport:
    """Run every applicable check; checks that do not apply leave a note instead."""
    rep = DiagnosticsReport(None)
    # a negative harmonic-tail margin certifies an eventual crossing
    positive = bool(np.all(profile.u[:, :-1] > 0)) and derivative_bound_margin(profile, spec.n) >= 0.0
    if spec.powers is not None and profile.L <= 2:
        pq = spec.powers
        if profile.L == 1 or pq.p >= pq.q:
            rep.comparison_max_violation = check_comparison(profile, pq).max_violation
        else:
            swapped = PowerPair(pq.q, pq.p)
            rep.comparison_max_violation = check_comparison(profile.swapped(), swapped).max_violation
            rep.notes.append("comparison evaluated with roles swapped (p < q)")
        if checkpoints is None:
            checkpoints = [R for R in (1.0, 2.0, 5.0) if R <= profile.r[-1]]
        if a1 is None:
            a1 = spec.n / (pq.p + 1.0)
        rep.pohozaev = [pt.to_dict() for pt in pohozaev_residual(profile, spec, a1, checkpoints)]
    else:
        rep.notes.append("comparison and Pohozaev checks need a Lane-Emden pair")
    if scaling_exponents(spec) is not None and positive:
        try:
            er = energy_growth(profile, spec, moments=moments)
            rep.energy_exponents = {e.name: e.to_dict() for e in er.entries}
        except WindowError as exc:
            rep.notes.append(f"energy growth skipped: {exc}")
        try:
            rep.slopes = fit_decay_slopes(profile, window, spec).to_dict()
        except WindowError as exc:
            rep.notes.append(f"slope fit skipped: {exc}")
    elif not positive:
        rep.notes.append("profile crosses zero or is certified to; growth and slope fits skipped")
    rep.derivative_bound_margin = derivative_bound_margin(profile, spec.n)
    return rep
