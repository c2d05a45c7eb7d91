"""
System definitions, scaling exponents and regime classification for
Hardy-Littlewood-Sobolev type systems with a Laplacian power ``k``.

The Lane-Emden pair is encoded as ``-Δu_1 = u_2^q``, ``-Δu_2 = u_1^p``.
With that encoding ``u_2`` carries the exponent ``alpha = 2(p+1)/(pq-1)``
and ``u_1`` carries ``beta = 2(q+1)/(pq-1)``: in the far field
``u_1 ~ r^-beta`` and ``u_2 ~ r^-alpha``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

#: relative band for the critical-hyperbola equality test
CRITICAL_RTOL = 1e-12


class NotApplicableError(ValueError):
    """Raised when an operation needs ``pq > 1`` (or ``n > 2k``) and does not get it."""


@dataclass(frozen=True)
class PowerPair:
    p: float
    q: float

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0) or not (math.isfinite(self.p) and math.isfinite(self.q)):
            raise ValueError(f"p and q must be positive and finite, got p={self.p}, q={self.q}")

    @property
    def pq(self) -> float:
        return self.p * self.q


@dataclass(frozen=True)
class ExponentPair:
    alpha: float
    beta: float


class RegimeTag(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    detail: str
    hyperbola_lhs: float = math.nan
    hyperbola_rhs: float = math.nan
    exponents: ExponentPair | None = None


@dataclass(frozen=True)
class Monomial:
    """``coeff * prod_j u_j ** exponents[j]``."""

    coeff: float
    exponents: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(float(e) for e in self.exponents))
        if not (self.coeff > 0 and math.isfinite(self.coeff)):
            raise ValueError(f"monomial coefficient must be positive, got {self.coeff}")
        if any(not math.isfinite(e) or e < 0 for e in self.exponents):
            raise ValueError(f"monomial exponents must be finite and >= 0, got {self.exponents}")


@dataclass(frozen=True)
class SystemSpec:
    """Radial system ``-Δu_i = f_i(u)`` in ``R^n`` with monomial right-hand sides.

    Positive coefficients make ``sum_i f_i >= 0`` on the closed cone, and
    non-negative exponents keep every ``f_i`` continuous there.
    """

    n: int
    rhs: tuple[tuple[Monomial, ...], ...]
    label: str = ""
    # scaling data the diagnostics need; None when the system has no single pair
    powers: PowerPair | None = field(default=None, compare=False)

    def __post_init__(self):
        rhs = tuple(tuple(terms) for terms in self.rhs)
        object.__setattr__(self, "rhs", rhs)
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"dimension n must be an integer >= 3, got {self.n}")
        if len(rhs) < 1:
            raise ValueError("system needs at least one component")
        L = len(rhs)
        for i, terms in enumerate(rhs):
            for m in terms:
                if len(m.exponents) != L:
                    raise ValueError(
                        f"component {i}: monomial has {len(m.exponents)} exponents, expected {L}"
                    )

    @property
    def L(self) -> int:
        return len(self.rhs)

    def exponent_matrix(self) -> np.ndarray:
        """Stacked exponents, one row per monomial."""
        return np.array([m.exponents for terms in self.rhs for m in terms], dtype=float).reshape(-1, self.L)

    def coefficients(self) -> np.ndarray:
        return np.array([m.coeff for terms in self.rhs for m in terms], dtype=float)

    def owners(self) -> np.ndarray:
        return np.array([i for i, terms in enumerate(self.rhs) for _ in terms], dtype=np.intp)

    def evaluate(self, u: Sequence[float]) -> np.ndarray:
        """``f(u)`` for ``u`` in the closed cone (``0**0 == 1``)."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.L,):
            raise ValueError(f"expected {self.L} values, got shape {u.shape}")
        if np.any(u < 0) or not np.all(np.isfinite(u)):
            raise ValueError(f"u must lie in the closed positive cone, got {u.tolist()}")
        terms = self.coefficients() * np.prod(u ** self.exponent_matrix(), axis=1)
        return np.bincount(self.owners(), weights=terms, minlength=self.L)


def make_exponents(pq: PowerPair) -> ExponentPair:
    """Scaling exponents ``alpha = 2(p+1)/(pq-1)``, ``beta = 2(q+1)/(pq-1)``.

    Raises
    ------
    NotApplicableError
        If ``pq <= 1``.
    """
    d = pq.p * pq.q - 1.0
    if not d > 0:
        raise NotApplicableError(f"scaling exponents need pq>1, got pq={pq.p * pq.q:g}")
    return ExponentPair(2.0 * (pq.p + 1.0) / d, 2.0 * (pq.q + 1.0) / d)


def _compare(x: float, ref: float, rtol: float) -> int:
    if abs(x - ref) <= rtol * max(abs(ref), abs(x)):
        return 0
    return 1 if x > ref else -1


def classify(n: int, pq: PowerPair, k: int = 1) -> Regime:
    """Place ``(n, p, q, k)`` relative to the critical hyperbola
    ``1/(p+1) + 1/(q+1) = (n-2k)/n``.

    For ``k == 1`` the equivalent test ``alpha + beta`` vs ``n - 2`` is run as
    well and the two verdicts must agree.
    """
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if pq.pq <= 1:
        return Regime(RegimeTag.NOT_APPLICABLE, f"pq>1 required, got pq={pq.pq:g}")
    if n <= 2 * k:
        return Regime(RegimeTag.NOT_APPLICABLE, f"n > 2k required, got n={n}, k={k}")

    lhs = 1.0 / (pq.p + 1.0) + 1.0 / (pq.q + 1.0)
    rhs = (n - 2.0 * k) / n
    sign = _compare(lhs, rhs, CRITICAL_RTOL)
    ex = make_exponents(pq)
    tag = {1: RegimeTag.SUBCRITICAL, 0: RegimeTag.CRITICAL, -1: RegimeTag.SUPERCRITICAL}[sign]
    detail = f"1/(p+1)+1/(q+1) = {lhs:.17g} vs (n-2k)/n = {rhs:.17g}"

    if k == 1:
        # the alpha+beta gap is the hyperbola gap times (p+1)(q+1)/(pq-1); widen the band to match
        widen = (pq.p + 1.0) * (pq.q + 1.0) / (pq.pq - 1.0)
        sign_ab = _compare(ex.alpha + ex.beta, n - 2.0, CRITICAL_RTOL * widen)
        if sign_ab != sign:
            raise AssertionError(
                f"hyperbola test ({sign}) and alpha+beta test ({sign_ab}) disagree for n={n}, {pq}"
            )
        detail += f"; alpha+beta = {ex.alpha + ex.beta:.17g} vs n-2 = {n - 2}"
    return Regime(tag, detail, lhs, rhs, ex)


def lane_emden(n: int, pq: PowerPair) -> SystemSpec:
    """``-Δu_1 = u_2^q``, ``-Δu_2 = u_1^p``."""
    rhs = (
        (Monomial(1.0, (0.0, pq.q)),),
        (Monomial(1.0, (pq.p, 0.0)),),
    )
    return SystemSpec(n, rhs, label=f"lane-emden n={n} p={pq.p:g} q={pq.q:g}", powers=pq)


def scalar_power(n: int, p: float) -> SystemSpec:
    """Single equation ``-Δu = u^p``; diagnostics treat it as the pair ``p = q``."""
    return SystemSpec(n, ((Monomial(1.0, (p,)),),), label=f"scalar n={n} p={p:g}", powers=PowerPair(p, p))


def decoupled(n: int, pq: PowerPair) -> SystemSpec:
    """``-Δu_1 = u_1^p``, ``-Δu_2 = u_2^q``: violates the boundary control condition."""
    rhs = (
        (Monomial(1.0, (pq.p, 0.0)),),
        (Monomial(1.0, (0.0, pq.q)),),
    )
    return SystemSpec(n, rhs, label=f"decoupled n={n} p={pq.p:g} q={pq.q:g}")


def polyharmonic_cascade(n: int, k: int, pq: PowerPair) -> SystemSpec:
    """Second-order cascade for ``(-Δ)^k u = v^q``, ``(-Δ)^k v = u^p``.

    Components are ``(u_1..u_k, v_1..v_k)`` with ``u_1 = u``, ``v_1 = v`` and
    ``u_{j+1} = -Δu_j``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n <= 2 * k:
        raise NotApplicableError(f"polyharmonic cascade needs n > 2k, got n={n}, k={k}")
    L = 2 * k

    def unit(j: int, power: float = 1.0) -> Monomial:
        e = [0.0] * L
        e[j] = power
        return Monomial(1.0, tuple(e))

    rhs = []
    for j in range(k):  # u block
        rhs.append((unit(j + 1),) if j < k - 1 else (unit(k, pq.q),))
    for j in range(k):  # v block
        rhs.append((unit(k + j + 1),) if j < k - 1 else (unit(0, pq.p),))
    label = f"cascade n={n} k={k} p={pq.p:g} q={pq.q:g}"
    if k == 1:
        label = f"lane-emden n={n} p={pq.p:g} q={pq.q:g}"
    return SystemSpec(n, tuple(rhs), label=label, powers=pq)


def scaling_exponents(spec: SystemSpec) -> np.ndarray | None:
    """Exponents ``d`` with ``u_lam(x) = lam^d_i u_i(lam x)`` solving the same system.

    Only defined when every component has exactly one monomial; solves
    ``d_i + 2 = sum_j e_ij d_j``.  Returns None if the system has no unique
    positive solution of that linear system.
    """
    if any(len(terms) != 1 for terms in spec.rhs):
        return None
    E = spec.exponent_matrix()
    A = E - np.eye(spec.L)
    try:
        d = np.linalg.solve(A, np.full(spec.L, 2.0))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        return None
    return d


# ---------------------------------------------------------------------------
# sampled probe of the sign and boundary-control assumptions


@dataclass(frozen=True)
class BoundaryProbe:
    point: tuple[float, ...]
    zero_coords: tuple[int, ...]
    radii: tuple[float, ...]
    max_ratios: tuple[float, ...]
    bounded: bool


@dataclass(frozen=True)
class AssumptionReport:
    nonnegative_ok: bool
    min_rhs_sum: float
    probes: tuple[BoundaryProbe, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.nonnegative_ok and all(p.bounded for p in self.probes)


PROBE_RADII = tuple(10.0 ** -k for k in range(1, 7))
#: growth of the max ratio across the probe radii above which it counts as unbounded
RATIO_GROWTH_LIMIT = 100.0


def check_assumptions(spec: SystemSpec, sample_count: int = 64, seed: int = 0) -> AssumptionReport:
    """Sampled evidence for the sign condition and the boundary control inequality.

    Every face of the cone (non-empty proper set of vanishing coordinates,
    at most 64 faces) gets one random base point.  Around it, boxes of
    shrinking radius are sampled and ``sum_P |f| / sum_Z f`` recorded, where
    ``Z`` are the vanishing coordinates and ``P`` the positive ones.  The
    ratio counts as bounded when its maximum grows by less than
    ``RATIO_GROWTH_LIMIT`` from the largest to the smallest box.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    L = spec.L
    warnings: list[str] = []

    # sign condition on the closed cone, including faces
    pts = rng.uniform(0.0, 2.0, size=(sample_count, L))
    mask = rng.random(size=(sample_count, L)) < 0.25
    pts[mask] = 0.0
    sums = np.array([spec.evaluate(x).sum() for x in pts])
    min_sum = float(sums.min())
    nonneg = bool(min_sum >= 0.0)
    if not nonneg:
        warnings.append(f"sum f_i < 0 at a sampled point (min {min_sum:g})")

    faces = [
        z
        for size in range(1, L)
        for z in itertools.combinations(range(L), size)
    ]
    if len(faces) > 64:
        idx = np.sort(rng.choice(len(faces), size=64, replace=False))
        faces = [faces[i] for i in idx]

    probes = []
    for zero in faces:
        pos = [j for j in range(L) if j not in zero]
        base = np.zeros(L)
        base[pos] = rng.uniform(0.5, 2.0, size=len(pos))
        ratios = []
        for rad in PROBE_RADII:
            x = np.repeat(base[None, :], sample_count, axis=0)
            x[:, list(zero)] = rng.uniform(0.0, rad, size=(sample_count, len(zero)))
            x[:, pos] += rng.uniform(-rad, rad, size=(sample_count, len(pos)))
            np.maximum(x, 0.0, out=x)
            worst = 0.0
            for xi in x:
                f = spec.evaluate(xi)
                num = float(np.abs(f[pos]).sum())
                den = float(f[list(zero)].sum())
                if den > 0:
                    worst = max(worst, num / den)
                elif num > 0:
                    worst = math.inf
            ratios.append(worst)
        growth_ok = math.isfinite(ratios[-1]) and ratios[-1] <= RATIO_GROWTH_LIMIT * max(ratios[0], 1.0)
        if not growth_ok:
            warnings.append(
                f"boundary point {tuple(round(v, 6) for v in base)}: ratio grows from "
                f"{ratios[0]:.3g} to {ratios[-1]:.3g} as the neighbourhood shrinks"
            )
        probes.append(BoundaryProbe(tuple(base.tolist()), tuple(zero), PROBE_RADII, tuple(ratios), growth_ok))

    return AssumptionReport(nonneg, min_sum, tuple(probes), tuple(warnings))
