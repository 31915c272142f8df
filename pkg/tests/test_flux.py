import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpmelab import (AveragingRule, CoefficientModel, MHMMode, SpatialOperatorConfig, face_average,
                     face_flux, face_velocity, front_setup, linear_setup, mhm_correction,
                     spatial_operator, truncation_leading, using_backend)
from gpmelab.errors import ConfigurationError, DomainError, NumericalFailure
from gpmelab.flux import EXP_PROFILE, SINE_PROFILE, SmoothProfile

A, H = AveragingRule.ARITHMETIC, AveragingRule.HARMONIC
PME3 = CoefficientModel.pme(3)
ALL_OPS = [SpatialOperatorConfig.arithmetic(), SpatialOperatorConfig.harmonic(),
           SpatialOperatorConfig.mhm(), SpatialOperatorConfig.mhm("term1"),
           SpatialOperatorConfig.mhm("term2"), SpatialOperatorConfig.mhm(local=True)]


def test_face_average_examples():
    assert face_average(A, 1, 3) == 2
    assert face_average(H, 0.7, 0.7) == pytest.approx(0.7, rel=1e-15)
    assert face_average(H, 1, 1e-6) == pytest.approx(2e-6, rel=1e-5)
    assert face_average(A, 1, 1e-6) == pytest.approx(0.5, rel=1e-5)
    assert face_average(H, 0.0, 2.0) == 0.0
    assert face_average(H, 0.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        face_average(A, -1.0, 1.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_mean_inequality(a, b):
    h, ar = face_average(H, a, b), face_average(A, a, b)
    g = np.sqrt(a * b)
    tol = 1e-12 * max(a, b, 1e-300)
    assert h <= g + tol and g <= ar + tol
    if abs(a - b) > 1e-9 * max(a, b):
        assert h < ar


def test_face_velocity():
    assert face_velocity(1.0, 1.0, 0.3) == 0
    assert face_velocity(1.0, 0.5, 0.1) == pytest.approx(5.0)
    assert face_velocity(0.5, 1.0, 0.1) == pytest.approx(-5.0)
    with pytest.raises(DomainError):
        face_velocity(1, 2, 0.0)


def test_mhm_requires_harmonic():
    with pytest.raises(ConfigurationError):
        SpatialOperatorConfig("arithmetic", True)
    assert SpatialOperatorConfig.mhm().label == "mhm"
    assert SpatialOperatorConfig.mhm("term2", local=True).label == "mhm-term2-local"


@pytest.mark.parametrize("cfg", ALL_OPS, ids=lambda c: c.label)
def test_constant_field_zero(cfg, backend):
    su = front_setup(PME3, 20)
    out = spatial_operator(np.full(21, 0.7), su, cfg, dt=1e-4)
    np.testing.assert_array_equal(out, 0.0)


def test_linear_profile_constant_k_zero(backend):
    su = front_setup(CoefficientModel.constant(1.0), 16)
    for cfg in (SpatialOperatorConfig.arithmetic(), SpatialOperatorConfig.harmonic()):
        out = spatial_operator(2.0 - 1.9 * su.grid.x, su, cfg)
        np.testing.assert_allclose(out, 0.0, atol=1e-10)


def test_quadratic_constant_k(backend):
    su = front_setup(CoefficientModel.constant(1.0), 20)
    out = spatial_operator(su.grid.x ** 2, su, SpatialOperatorConfig.harmonic())
    np.testing.assert_allclose(out[1:-1], 2.0, rtol=1e-9)
    assert out[0] == 0 and out[-1] == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1e-3, 3.0), min_size=6, max_size=40), st.sampled_from([1.0, 2.0, 3.0]),
       st.sampled_from(["arithmetic", "harmonic"]))
def test_conservative_telescoping(values, m, rule):
    p = np.array(values)
    n = p.size - 1
    model = CoefficientModel.pme(m)
    su = front_setup(model, n)
    dx = su.grid.dx
    out = spatial_operator(p, su, SpatialOperatorConfig(rule))
    flux = face_flux(rule, model, p, dx)
    lhs = dx * np.sum(out[1:-1])
    rhs = flux[0] - flux[-1]
    assert abs(lhs - rhs) <= 1e-12 * (1 + np.sum(np.abs(flux)))


def test_nonfinite_reports_node():
    su = front_setup(PME3, 10)
    p = np.full(11, 0.5)
    p[4] = np.inf
    for name in ("numpy", "numba"):
        with using_backend(name):
            with pytest.raises(NumericalFailure) as err:
                spatial_operator(p, su, SpatialOperatorConfig.harmonic())
            assert err.value.node in (3, 4, 5)


def test_local_switch_needs_dt():
    su = front_setup(PME3, 10)
    with pytest.raises(ConfigurationError):
        spatial_operator(np.full(11, 0.5), su, SpatialOperatorConfig.mhm(local=True))


def test_backends_agree(rng):
    for model in (CoefficientModel.pme(1), CoefficientModel.pme(2), PME3, CoefficientModel.pme(2.5),
                  CoefficientModel.superslow()):
        su = front_setup(model, 64)
        p = rng.uniform(0.05, 2.0, 65)
        for cfg in ALL_OPS:
            with using_backend("numpy"):
                a = spatial_operator(p, su, cfg, dt=su.grid.dx ** 2 / 16)
            with using_backend("numba"):
                b = spatial_operator(p, su, cfg, dt=su.grid.dx ** 2 / 16)
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.max(np.abs(a)))


# --- MHM correction -------------------------------------------------------

def test_mhm_constant_zero():
    for mode in MHMMode:
        assert mhm_correction(0.4, 0.4, 0.4, 0.01, PME3, mode) == 0.0


def test_mhm_m2_simplified(rng):
    model = CoefficientModel.pme(2)
    for _ in range(20):
        a, b, c = rng.uniform(0.1, 2.0, 3)
        dx = rng.uniform(1e-3, 0.1)
        dm, d2 = (b - a) / dx, (c - 2 * b + a) / dx ** 2
        expect = 1.5 * dx ** 2 * dm ** 2 * d2
        assert mhm_correction(a, b, c, dx, model) == pytest.approx(expect, rel=1e-12, abs=1e-14)
        assert mhm_correction(a, b, c, dx, model, "term2") == 0.0


def test_mhm_m3_simplified(rng):
    for _ in range(20):
        a, b, c = rng.uniform(0.1, 2.0, 3)
        dx = rng.uniform(1e-3, 0.1)
        dm, d2 = (b - a) / dx, (c - 2 * b + a) / dx ** 2
        expect = dx ** 2 / 4 * (9 * b * dm ** 2 * d2 + 5 * dm ** 4)
        assert mhm_correction(a, b, c, dx, PME3) == pytest.approx(expect, rel=1e-11)


def test_mhm_terms_add_up():
    args = (0.3, 0.5, 0.8, 0.02, PME3)
    full = mhm_correction(*args)
    assert full == pytest.approx(mhm_correction(*args, "term1") + mhm_correction(*args, "term2"))


def test_operator_includes_mhm():
    su = front_setup(PME3, 30)
    x = su.grid.x
    p = 1 + 0.5 * np.sin(3 * x)
    diff = (spatial_operator(p, su, SpatialOperatorConfig.mhm())
            - spatial_operator(p, su, SpatialOperatorConfig.harmonic()))
    expect = [mhm_correction(p[i - 1], p[i], p[i + 1], su.grid.dx, PME3) for i in range(1, 30)]
    np.testing.assert_allclose(diff[1:-1], expect, rtol=1e-9, atol=1e-12)


def test_mhm_scales_dx2():
    f = lambda x: 1 + 0.5 * np.sin(3 * x)
    x0 = 0.4
    vals = [mhm_correction(f(x0 - dx), f(x0), f(x0 + dx), dx, PME3) for dx in (0.01, 0.005)]
    assert vals[0] / vals[1] == pytest.approx(4.0, rel=0.05)


def test_mhm_close_to_arithmetic_on_line():
    model = CoefficientModel.pme(1)
    diffs = []
    for n in (50, 100, 200):
        su = linear_setup(model, n)
        p = 2.0 - 1.9 * su.grid.x
        d = spatial_operator(p, su, SpatialOperatorConfig.mhm()) - spatial_operator(p, su, SpatialOperatorConfig.arithmetic())
        diffs.append(np.max(np.abs(d)))
    orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    assert np.all(orders > 1.9)


def test_semidiscrete_matches_modified_equation():
    """The operator's truncation error follows the closed-form coefficient table (dt -> 0)."""
    from gpmelab.modeq import coefficients
    m, x0 = 3, 0.4
    a, w = 0.5, 3.0
    p = lambda x: 1 + a * np.sin(w * x)
    px = a * w * np.cos(w * x0)
    pxx = -a * w ** 2 * np.sin(w * x0)
    pxxx = -a * w ** 3 * np.cos(w * x0)
    pxxxx = a * w ** 4 * np.sin(w * x0)
    p0 = p(x0)
    k, kp, kpp, _ = PME3.derivatives(p0)
    exact = kp * px ** 2 + k * pxx
    for rule in ("arithmetic", "harmonic"):
        rem = []
        for dx in (0.01, 0.005):
            x = x0 + dx * np.arange(-2, 3)
            su = front_setup(PME3, 4)
            cfg = SpatialOperatorConfig(rule)
            num = spatial_operator(p(x), su, cfg)[2] * (su.grid.dx ** 2) / dx ** 2
            c = coefficients(PME3, p0, 0.0, dx, rule)
            pred = (c.B * px ** 2 * pxx + c.C * pxx ** 2 + c.D * pxxx * px
                    + c.F * px ** 4 + c.G * pxxxx)
            rem.append(num - exact - pred)
        assert abs(rem[0]) < 1e-6 and rem[0] / rem[1] == pytest.approx(16, rel=0.15)


# --- face-average truncation ------------------------------------------------

def test_truncation_constant_and_linear():
    const = SmoothProfile(lambda x: 3.0 + 0 * x, lambda x: 0 * x, lambda x: 0 * x)
    for rule in (A, H):
        t = truncation_leading(rule, const, 0.3, 0.1)
        assert t.measured == pytest.approx(0, abs=1e-15) and t.predicted == 0
    line = SmoothProfile(lambda x: 1 + 2 * x, lambda x: 2 + 0 * x, lambda x: 0 * x)
    assert truncation_leading(A, line, 0.3, 0.1).measured == pytest.approx(0, abs=1e-15)


@pytest.mark.parametrize("profile,x_face", [(EXP_PROFILE, 0.0), (SINE_PROFILE, 0.3)],
                         ids=["exp", "sine"])
@pytest.mark.parametrize("rule", [A, H])
def test_truncation_order(profile, x_face, rule):
    # sin has vanishing even derivatives at 0, hence the shifted face for that profile
    rem = [abs(truncation_leading(rule, profile, x_face, dx).remainder)
           for dx in (0.1, 0.05, 0.025)]
    assert np.log2(rem[0] / rem[1]) >= 3.9 and np.log2(rem[1] / rem[2]) >= 3.9
