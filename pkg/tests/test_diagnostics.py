import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hlslab.diagnostics import (
    COMPARISON_RTOL,
    ENERGY_SLACK,
    WindowError,
    check_comparison,
    derivative_bound_margin,
    energy_growth,
    fit_decay_slopes,
    pohozaev_residual,
    verify_profile,
)
from hlslab.integrator import RadialProfile, ShotOptions, integrate_shot
from hlslab.regimes import PowerPair, lane_emden, scalar_power


def _const_profile(values, r_end=10.0, nodes=50):
    r = np.linspace(0.0, r_end, nodes)
    u = np.array([np.full(nodes, v) for v in values], dtype=float)
    return RadialProfile(r, u, np.zeros_like(u))


# ---------------------------------------------------------------------------
# slopes


def test_bubble_slope(bubble_spec, bubble_shot):
    rep = fit_decay_slopes(bubble_shot.profile.restrict(1e3), spec=bubble_spec)
    assert rep.slopes[0] == pytest.approx(-1.0, rel=0.02)
    # critical: no supercritical prediction attached
    assert rep.predicted is None


def test_symmetric_supercritical_slopes(sym533, le533):
    rep = fit_decay_slopes(sym533.profile, spec=le533)
    assert rep.predicted == (-1.0, -1.0)
    assert rep.within(0.05)
    assert rep.nodes >= 20
    assert rep.window == (1e3, 5e3)


def test_asymmetric_supercritical_slopes(gs525, le525):
    rep = fit_decay_slopes(gs525.shot.profile, spec=le525)
    np.testing.assert_allclose(rep.predicted, [-4 / 3, -2 / 3])
    assert rep.within(0.10)
    assert all(math.isfinite(x) and x > 0 for x in rep.limits)


def test_slope_residual_shrinks_outward(sym533):
    res = [fit_decay_slopes(sym533.profile, (lo, 5 * lo)).residuals[0] for lo in (10.0, 100.0, 1000.0)]
    assert res[0] > res[1] > res[2]


def test_slope_window_too_short(sym533):
    with pytest.raises(WindowError):
        fit_decay_slopes(sym533.profile, (100.0, 100.5))


def test_slope_window_must_be_positive(sub_shot):
    with pytest.raises(WindowError):
        fit_decay_slopes(sub_shot.profile, (0.0, sub_shot.profile.r[-1]))


# ---------------------------------------------------------------------------
# comparison


def test_comparison_symmetric_is_identity(sym533):
    rep = check_comparison(sym533.profile, PowerPair(3.0, 3.0))
    assert rep.max_violation == 0.0 and rep.passed


def test_comparison_holds_on_ground_state(gs552):
    rep = check_comparison(gs552.shot.profile, PowerPair(5.0, 2.0))
    assert rep.passed
    assert rep.max_violation <= COMPARISON_RTOL * rep.scale


def test_comparison_detects_constructed_failure():
    # u1 = 2, u2 = 1 with p = 5, q = 2: 2^6/6 - 1/3 > 0
    rep = check_comparison(_const_profile([2.0, 1.0]), PowerPair(5.0, 2.0))
    assert rep.max_violation == pytest.approx(64 / 6 - 1 / 3)
    assert not rep.passed


def test_comparison_rejects_p_below_q(sym533):
    with pytest.raises(ValueError):
        check_comparison(sym533.profile, PowerPair(2.0, 5.0))


@given(a=st.floats(0.1, 3.0), b=st.floats(0.1, 3.0))
@settings(max_examples=30, deadline=None)
def test_comparison_sign_matches_pointwise(a, b):
    rep = check_comparison(_const_profile([a, b], nodes=5), PowerPair(3.0, 2.0))
    assert rep.max_violation == pytest.approx(a ** 4 / 4 - b ** 3 / 3, abs=1e-12)


# ---------------------------------------------------------------------------
# energy growth


def test_bubble_energy(bubble_spec, bubble_shot):
    rep = energy_growth(bubble_shot.profile.restrict(1e4), bubble_spec)
    ex = rep.exponents()
    assert ex["u1"] == pytest.approx(2.0, abs=0.01)  # int u ~ 2 pi sqrt(3) R^2
    assert ex["u1"] <= 2.5 + ENERGY_SLACK
    assert rep.passed


def test_supercritical_energy_moment(sym533, le533):
    rep = energy_growth(sym533.profile, le533, moments=(3.0,))
    ex = rep.exponents()
    assert ex["u1^3"] == pytest.approx(2.0, abs=0.1)
    assert ex["u1"] <= 5 - 1 + ENERGY_SLACK
    assert rep.passed


def test_asymmetric_energy(gs525, le525):
    rep = energy_growth(gs525.shot.profile, le525)
    assert rep.passed
    bounds = {e.name: e.bound for e in rep.entries}
    assert bounds["u1"] == pytest.approx(5 - 4 / 3) and bounds["u2"] == pytest.approx(5 - 2 / 3)


def test_zero_profile_energy(le322):
    z = integrate_shot(le322, [0.0, 0.0], ShotOptions(r_max=10.0))
    rep = energy_growth(z.profile, le322)
    assert rep.passed
    assert all(math.isnan(e.exponent) for e in rep.entries)


# ---------------------------------------------------------------------------
# Pohozaev


@pytest.mark.parametrize("a1", [0.0, 0.5, 1.0])
def test_pohozaev_bubble(bubble_spec, bubble_shot, a1):
    pts = pohozaev_residual(bubble_shot.profile, bubble_spec, a1, [1.0, 2.0, 5.0])
    assert max(p.residual for p in pts) <= 1e-6


def test_pohozaev_bubble_balanced_weights_cancel(bubble_spec, bubble_shot):
    # a1 = a2 = n/(p+1): both sides vanish identically
    pts = pohozaev_residual(bubble_shot.profile, bubble_spec, 0.5, [2.0])
    assert abs(pts[0].lhs) <= 1e-12 and abs(pts[0].rhs) <= 1e-8


@pytest.mark.parametrize("a1", [0.0, 0.75, 1.0])
def test_pohozaev_subcritical(sub_shot, le322, a1):
    assert sub_shot.outcome.r > 5.0
    pts = pohozaev_residual(sub_shot.profile, le322, a1, [1.0, 2.0, 5.0])
    assert max(p.residual for p in pts) <= 1e-5


def test_pohozaev_independent_quadrature(sub_shot, le322):
    # carry the energy integrals as extra ODE states in scipy's DOP853
    from scipy.integrate import solve_ivp

    n, p, q, a1, R = 3, 2.0, 2.0, 0.0, 2.0
    f = le322.evaluate([0.08, 0.12])
    r0 = 1e-4
    y0 = [0.08 - f[0] * r0 ** 2 / 6, -f[0] * r0 / 3, 0.12 - f[1] * r0 ** 2 / 6, -f[1] * r0 / 3, 0.0, 0.0]

    def rhs(s, y):
        v, dv, u, du, _, _ = y
        return [dv, -2 / s * dv - u ** q, du, -2 / s * du - v ** p, s * s * v ** (p + 1), s * s * u ** (q + 1)]

    sol = solve_ivp(rhs, (r0, R), y0, method="DOP853", rtol=1e-13, atol=1e-16)
    IV, IU = sol.y[4, -1], sol.y[5, -1]  # the missing [0, r0] piece is below 1e-15
    lhs = (n / (p + 1) - a1) * IV + (n / (q + 1) - (n - 2 - a1)) * IU
    pt = pohozaev_residual(sub_shot.profile, le322, a1, [R])[0]
    # quadrature on the ~70 stored nodes is good to ~2e-7, well inside the 1e-5 Pohozaev tolerance
    assert pt.lhs == pytest.approx(lhs, rel=1e-6)


def test_pohozaev_a1_invariance(gs525, le525):
    res = [max(p.residual for p in pohozaev_residual(gs525.shot.profile, le525, a1, [1.0, 2.0, 5.0]))
           for a1 in (0.0, 5 / 3, 3.0)]
    assert max(res) <= 1e-5


def test_pohozaev_zero_profile(le322):
    z = integrate_shot(le322, [0.0, 0.0], ShotOptions(r_max=10.0))
    pt = pohozaev_residual(z.profile, le322, 0.5, [z.profile.r[-1]])[0]
    assert pt.lhs == 0.0 and pt.rhs == 0.0 and pt.residual == 0.0


def test_pohozaev_checkpoint_outside(sub_shot, le322):
    with pytest.raises(ValueError):
        pohozaev_residual(sub_shot.profile, le322, 0.5, [100.0])


# ---------------------------------------------------------------------------
# combined report


def test_derivative_bound_margin(sym533, sub_shot):
    assert derivative_bound_margin(sym533.profile, 5) >= -1e-10
    # a crossing profile eventually violates (n-2)u + r u' >= 0
    assert derivative_bound_margin(sub_shot.profile, 3) < 0


def test_verify_profile_keys(gs525, le525):
    rep = verify_profile(gs525.shot.profile, le525)
    d = rep.to_dict()
    for key in ("comparison_max_violation", "energy_exponents", "pohozaev", "slopes"):
        assert key in d
    json.dumps(d)
    assert d["comparison_max_violation"] <= COMPARISON_RTOL
    assert "roles swapped" in " ".join(d["notes"])
    assert all(pt["residual"] <= 1e-5 for pt in d["pohozaev"])


def test_verify_profile_crossing_notes(sub_shot, le322):
    rep = verify_profile(sub_shot.profile, le322)
    assert rep.slopes is None
    assert any("crosses" in n for n in rep.notes)


def test_verify_scalar(bubble_shot):
    rep = verify_profile(bubble_shot.profile.restrict(1e4), scalar_power(3, 5.0))
    assert rep.comparison_max_violation == 0.0
