import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dinv.dinverse import DInverse, PointMass
from dinv.drift import DriftFunction
from dinv.errors import ClassificationError, ConditionViolated, DomainError
from dinv.numerics import log_grid, normal_cdf
from dinv.scaling import (
    DEFAULT_LAMBDAS,
    DEFAULT_TIMES,
    Case,
    ScalingFamily,
    ScalingFn,
    classify,
    classify_sequence,
    degenerate_fixture,
    estimate_p,
    explosion_fixture,
    limit_law,
    limit_profile,
    power_fixture,
    verify_scale_invariance_explosion,
    verify_scale_invariance_power,
    verify_scaling_convergence,
    zero_fixture,
)

SQRT = ScalingFn.power(1.0, 0.5)
TS = log_grid(1e-3, 1e3, 60)


def family(drift, phi1, phi2=SQRT, **kw):
    return ScalingFamily(drift, phi1, phi2, **kw)


def test_default_grids():
    assert DEFAULT_LAMBDAS[0] == 2.0**-4 and DEFAULT_LAMBDAS[-1] == 2.0**-40
    assert DEFAULT_TIMES.size == 24
    assert DEFAULT_TIMES[0] == pytest.approx(1 / 16) and DEFAULT_TIMES[-1] == pytest.approx(16)


def test_scaling_fn_forms():
    lam = np.array([0.5, 0.01])
    assert np.allclose(ScalingFn.power(3.0, -1.5)(lam), 3.0 * lam**-1.5)
    assert np.allclose(ScalingFn.exp(1.0, 0.5, -0.5)(lam), np.exp(0.5 / lam) / np.sqrt(lam))
    tab = ScalingFn.tabulated([0.01, 0.1, 1.0], [1.0, 10.0, 100.0])
    assert tab(0.1) == pytest.approx(10.0)
    with pytest.raises(DomainError):
        ScalingFn.tabulated([0.1, 1.0], [1.0, -2.0])


def test_family_validation():
    with pytest.raises(ConditionViolated):
        family(DriftFunction.power(1.0, 0.25), SQRT)
    with pytest.raises(DomainError):
        family(DriftFunction.constant(1.0), SQRT, lambda_grid=[0.1, 0.2])
    with pytest.raises(DomainError):
        family(DriftFunction.constant(1.0), ScalingFn.wrap(lambda lam: 0 * lam))


# -- p ------------------------------------------------------------------------------


def test_estimate_p_examples():
    d = DriftFunction.constant(1.0)
    assert estimate_p(family(d, SQRT, SQRT)).p == pytest.approx(1.0, abs=1e-12)
    pe = estimate_p(family(d, SQRT, ScalingFn.wrap(lambda lam: 3 * np.sqrt(lam) + lam)))
    assert pe.converged and pe.p == pytest.approx(3.0, abs=1e-6)
    pe = estimate_p(family(d, SQRT, ScalingFn.power(1.0, 0.25)))
    assert not pe.converged


def test_estimate_p_needs_grid():
    with pytest.raises(DomainError):
        estimate_p(family(DriftFunction.constant(1.0), SQRT, lambda_grid=2.0 ** -np.arange(1, 5)))


# -- profile -------------------------------------------------------------------------


def test_classify_sequence_states():
    k = np.arange(30)
    assert classify_sequence(2.0**-k)[0] == "zero"
    assert classify_sequence(2.0**k)[0] == "inf"
    state, v = classify_sequence(3.0 + 2.0**-k)
    assert state == "finite" and v == pytest.approx(3.0, rel=1e-6)
    assert classify_sequence(np.sin(k))[0] == "unresolved"


def test_profile_examples():
    t = DEFAULT_TIMES
    prof = limit_profile(zero_fixture())
    assert set(prof.states) == {"zero"} and np.all(prof.values == 0)
    prof = limit_profile(power_fixture())
    assert set(prof.states) == {"finite"}
    assert np.allclose(prof.values, 3 * t**1.5, rtol=1e-9)
    prof = limit_profile(degenerate_fixture())
    assert set(prof.states) == {"inf"}


def test_profile_unresolved_raises():
    wobbly = ScalingFn.wrap(lambda lam: 2.0 + np.sin(1.0 / lam))
    with pytest.raises(ClassificationError) as err:
        limit_profile(family(DriftFunction.constant(1.0), wobbly))
    assert err.value.profile is not None


# -- classification -----------------------------------------------------------------------


def test_classify_power_fixture():
    r = classify(power_fixture())
    assert r.case is Case.POWER
    assert r.c == pytest.approx(3.0, rel=1e-2)
    assert r.alpha == pytest.approx(2.0, rel=1e-2)
    assert r.p == pytest.approx(1.0, rel=1e-2)


def test_classify_explosion_fixture():
    r = classify(explosion_fixture())
    assert r.case is Case.EXPLOSION
    assert r.t0 == pytest.approx(2.0, rel=1e-2)
    assert r.p == pytest.approx(1.0, rel=1e-2)
    lo, hi = r.diagnostics["t0_bracket"]
    assert lo <= 2.0 <= hi * (1 + 1e-12)
    assert (hi - lo) / r.t0 <= 1e-3 * 1.01


def test_classify_zero_and_degenerate():
    assert classify(zero_fixture()).case is Case.ZERO
    assert classify(degenerate_fixture()).case is Case.DEGENERATE


def test_classify_requires_convergent_p():
    fam = family(DriftFunction.constant(1.0), ScalingFn.power(1.0, 1.0), ScalingFn.power(1.0, 0.25))
    with pytest.raises(ClassificationError):
        classify(fam)


def test_classify_rejects_mixed_profile():
    # rho(t) = t^2 + t gives a profile that is finite at every t but not a pure power
    d = DriftFunction.custom(lambda t: np.asarray(t) ** 2 + np.asarray(t))
    fam = family(d, ScalingFn.wrap(lambda lam: lam**-0.5), lambda_grid=DEFAULT_LAMBDAS[:10])
    with pytest.raises(ClassificationError):
        classify(fam)


def test_report_as_dict():
    r = classify(power_fixture()).as_dict()
    assert r["case"] == "PowerDrift" and set(r) >= {"p", "c", "alpha", "g_profile", "diagnostics"}
    assert "t0" not in r
    r = classify(explosion_fixture()).as_dict()
    assert r["case"] == "Explosion" and "t0" in r


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 5.0))
def test_index_is_scale_free(s):
    base = classify(power_fixture())
    fam = family(DriftFunction.power(1.0, 2.0).scaled(s), ScalingFn.power(3.0 / s**2, -1.5))
    r = classify(fam)
    assert r.case is Case.POWER
    assert abs(r.alpha - base.alpha) <= 1e-3


@pytest.mark.parametrize("make", [power_fixture, explosion_fixture, zero_fixture, degenerate_fixture])
def test_profiles_are_monotone(make):
    prof = classify(make()).profile
    vals = prof.values[prof.resolved]
    with np.errstate(invalid="ignore"):
        steps = np.diff(vals)
    assert np.all((steps >= 0) | np.isnan(steps))


def test_power_with_square_root_index():
    fam = family(DriftFunction.power(1.0, 0.5), ScalingFn.power(2.0, 0.0))
    r = classify(fam)
    assert r.case is Case.POWER
    assert r.alpha == pytest.approx(0.5, abs=1e-6) and r.c == pytest.approx(2.0, rel=1e-6)


# -- limit laws ----------------------------------------------------------------------


def test_limit_law_examples():
    zero = limit_law(classify(zero_fixture()), 2.0)
    ref = DInverse(DriftFunction.zero(), 2.0)
    assert np.array_equal(zero.cdf(TS), ref.cdf(TS))

    ex = classify(explosion_fixture())
    law = limit_law(ex, 0.0)
    assert law.cdf(1.0) == 0.5 and law.cdf(1.9) == 0.5
    assert law.cdf(ex.t0) == 1.0 and law.cdf(2.5) == 1.0

    deg = limit_law(classify(degenerate_fixture()), 1.0)
    assert isinstance(deg, PointMass) and deg.cdf(1e-9) == 1.0


def test_limit_law_level_domain():
    with pytest.raises(DomainError):
        limit_law(classify(zero_fixture()), -1.0)


# -- scale invariance ---------------------------------------------------------------------


def test_power_invariance_examples():
    assert verify_scale_invariance_power(1.0, 1.0, 4.0, 1.0, TS) <= 1e-12
    for lam in (0.01, 0.5, 30.0):
        assert verify_scale_invariance_power(2.0, 0.5, lam, 1.5, TS) <= 1e-12
    assert verify_scale_invariance_power(1.7, 2.2, 1.0, 0.3, TS) == 0.0


def test_power_invariance_by_substitution():
    # c=1, alpha=1, lam=4, x=1: both sides reduce to N((t - 1)/sqrt(t))
    ref = normal_cdf((TS - 1) / np.sqrt(TS))
    lhs = DInverse(DriftFunction.power(0.5, 1.0), 2.0).cdf(4 * TS)
    assert np.max(np.abs(lhs - ref)) <= 1e-15


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.5, 3.0), st.floats(1e-3, 1e3), st.floats(0.0, 5.0))
def test_power_invariance_property(c, alpha, lam, x):
    assert verify_scale_invariance_power(c, alpha, lam, x, TS) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(1e-3, 1e3), st.floats(0.0, 5.0))
def test_explosion_invariance_with_scaled_cut(t0, lam, x):
    assert verify_scale_invariance_explosion(t0, lam, x, TS) <= 1e-12


def test_explosion_invariance_literal_form_fails():
    # truncating at t0 instead of lam*t0 only agrees at lam = 1
    assert verify_scale_invariance_explosion(2.0, 1.0, 1.0, TS, truncate_scaled=False) == 0.0
    assert verify_scale_invariance_explosion(2.0, 4.0, 1.0, TS, truncate_scaled=False) > 0.1


# -- convergence ---------------------------------------------------------------------------


@pytest.mark.parametrize("x", [0.0, 1.0])
@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_power_fixture_converges(x, t):
    rep = verify_scaling_convergence(power_fixture(), x, t)
    assert rep.converged
    assert rep.gaps[-1] < 1e-6


def test_explosion_fixture_converges_off_t0():
    fam = explosion_fixture()
    r = classify(fam)
    rep = verify_scaling_convergence(fam, 0.0, 1.0, r)
    assert rep.converged
    assert rep.limit_cdf == 0.5
    assert rep.gaps[-1] < 1e-6
    assert verify_scaling_convergence(fam, 1.0, 4.0, r).converged
    assert verify_scaling_convergence(fam, 0.0, r.t0 * 1.001, r).skipped


def test_zero_fixture_level_term():
    fam = zero_fixture()
    rep = verify_scaling_convergence(fam, 0.0, 1.0)
    assert rep.converged
    # x = 0: the finite-lam cdf is exactly N(h)
    lam = fam.lambda_grid
    assert np.allclose(fam.finite_cdf(lam, 1.0, 0.0), normal_cdf(fam.h(lam, 1.0)), rtol=0, atol=0)


def test_convergence_rejects_degenerate():
    with pytest.raises(DomainError):
        verify_scaling_convergence(degenerate_fixture(), 0.0, 1.0)


def test_convergence_at_smallest_lambda_all_probes():
    for make in (power_fixture, explosion_fixture, zero_fixture):
        fam = make()
        r = classify(fam)
        for x in (0.0, 0.5, 2.0):
            for t in (0.25, 0.5, 1.0, 3.0, 8.0):
                rep = verify_scaling_convergence(fam, x, t, r)
                if not rep.skipped:
                    assert rep.gaps[-1] < 1e-3, (make.__name__, x, t)


def test_finite_cdf_matches_direct_law():
    fam = power_fixture()
    lam, t, x = 2.0**-6, 1.3, 0.7
    phi1, phi2 = fam.phi1(lam), fam.phi2(lam)
    direct = DInverse(DriftFunction.power(phi1, 2.0), phi2 * x).cdf(lam * t)
    assert fam.finite_cdf(lam, t, x) == pytest.approx(direct, abs=1e-13)
    assert math.isfinite(fam.log_h(lam, t))
