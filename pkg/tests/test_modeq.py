import numpy as np
import pytest

from gpmelab import (CoefficientModel, DtRule, Field, IntegratorConfig, SpatialOperatorConfig,
                     coefficients, front_setup, oscillation_predictor, simulate)
from gpmelab.errors import DomainError
from gpmelab.modeq import write_predictor_csv

MODELS = [CoefficientModel.pme(1), CoefficientModel.pme(2), CoefficientModel.pme(3),
          CoefficientModel.pme(2.5), CoefficientModel.superslow()]


def test_table_values_pme3():
    p, dt, dx = 0.7, 1e-4, 0.02
    c = coefficients(CoefficientModel.pme(3), p, dt, dx)
    k, kp, kpp, kppp = p ** 3, 3 * p ** 2, 6 * p, 6.0
    assert c.A == pytest.approx(-3.5 * dt * (kp ** 2 + k * kpp))
    assert c.B == pytest.approx(0.75 * dx ** 2 * kpp)
    assert c.C == pytest.approx(kp * (-2 * k * dt + dx ** 2 / 4))
    assert c.D == pytest.approx(kp * (-3 * k * dt + dx ** 2 / 3))
    assert c.E == pytest.approx(-dt / 2 * (3 * kp * kpp + k * kppp))
    assert c.F == pytest.approx(dx ** 2 / 6 * kppp)
    assert c.G == pytest.approx(k * (-k * dt / 2 + dx ** 2 / 12))
    assert c.deltaB_H == pytest.approx(-0.75 * dx ** 2 * kp ** 2 / k)
    assert c.deltaF_H == pytest.approx(-dx ** 2 / 4 * (2 * kp * kpp / k - kp ** 3 / k ** 2))


def test_simplified_forms(rng):
    p = rng.uniform(1e-6, 2.0, 100)
    dx = 0.02
    c2 = coefficients(CoefficientModel.pme(2), p, 1e-4, dx, "harmonic")
    np.testing.assert_allclose(c2.B, -1.5 * dx ** 2, rtol=1e-12)
    assert np.max(np.abs(c2.F)) <= 1e-12 * dx ** 2
    c3 = coefficients(CoefficientModel.pme(3), p, 1e-4, dx, "harmonic")
    np.testing.assert_allclose(c3.B, -2.25 * dx ** 2 * p, rtol=1e-12)
    np.testing.assert_allclose(c3.F, -1.25 * dx ** 2, rtol=1e-12)


def test_pme1_values():
    p, dx = np.array([0.2, 1.0, 3.0]), 0.05
    c = coefficients(CoefficientModel.pme(1), p, 1e-3, dx)
    np.testing.assert_array_equal(c.B, 0)
    np.testing.assert_array_equal(c.E, 0)
    np.testing.assert_array_equal(c.F, 0)
    np.testing.assert_allclose(c.deltaB_H, -0.75 * dx ** 2 / p, rtol=1e-14)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label)
def test_rules_differ_only_in_B_F(model):
    p = np.linspace(0.05, 3, 30)
    a = coefficients(model, p, 2e-4, 0.03, "arithmetic")
    h = coefficients(model, p, 2e-4, 0.03, "harmonic")
    for name in "ACDEG":
        np.testing.assert_array_equal(getattr(a, name), getattr(h, name))
    np.testing.assert_allclose(h.B, a.B + a.deltaB_H)
    np.testing.assert_allclose(h.F, a.F + a.deltaF_H)
    assert np.all(a.deltaB_H < 0)


def test_m2_deltaF_zero():
    p = np.linspace(1e-3, 10, 2000)
    c = coefficients(CoefficientModel.pme(2), p, 1e-4, 0.01)
    assert np.max(np.abs(c.deltaF_H)) <= 1e-18


def test_domain():
    with pytest.raises(DomainError):
        coefficients(CoefficientModel.pme(3), 0.0, 1e-4, 0.01)
    with pytest.raises(DomainError):
        coefficients(CoefficientModel.pme(3), 1.0, 1e-4, 0.0)


def test_predictor_constant_field():
    model = CoefficientModel.pme(3)
    rep = oscillation_predictor(Field(np.full(21, 0.4), 0.0), model, 1e-4, 0.05)
    np.testing.assert_allclose(rep.effective_diffusion, 0.4 ** 3)
    assert rep.violating_nodes == []


def test_predictor_flags_sharp_front():
    model = CoefficientModel.pme(3)
    p = np.full(51, 1e-3)
    p[:10] = 1.5
    rep = oscillation_predictor(p, model, 0.02 ** 2 / 16, 0.02)
    assert 10 in rep.violating_nodes and rep.min_effective_diffusion < 0


def test_predictor_matches_kernel():
    from gpmelab import kernels
    model = CoefficientModel.pme(3)
    p = np.maximum(0.1, 2 * (1 - np.linspace(0, 1, 51) / 0.3))
    rep = oscillation_predictor(p, model, 2.5e-5, 0.02)
    np.testing.assert_allclose(kernels.predictor_np(p, 0.02, 2.5e-5, model), rep.effective_diffusion,
                               rtol=1e-12)
    kind, param = model.kernel_params()
    mn, cnt = kernels.predictor_nb(p, 0.02, 2.5e-5, kind, param)
    assert mn == pytest.approx(rep.min_effective_diffusion, rel=1e-12)
    assert cnt == len(rep.violating_nodes)


def test_predictor_m1_smooth_run_never_violates():
    # smooth m=1 setup: k = p, N = 50, dt = dx^2/4
    res = simulate(front_setup(CoefficientModel.pme(1), 50), SpatialOperatorConfig.harmonic(),
                   IntegratorConfig("fe", DtRule(4), 0.5), record_predictor=True)
    assert int(np.max(res.predictor_count)) == 0


def test_predictor_m3_harmonic_violates():
    res = simulate(front_setup(CoefficientModel.pme(3), 50), SpatialOperatorConfig.harmonic(),
                   IntegratorConfig("fe", DtRule(16), 0.3), record_predictor=True)
    assert int(np.max(res.predictor_count)) >= 1


def test_predictor_csv(tmp_path):
    path = tmp_path / "pred.csv"
    write_predictor_csv(path, [0.0, 0.5], [1.0, -0.25], [0, 2])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,min_effective_diffusion,n_violating_nodes"
    assert lines[2] == "0.5,-0.25,2"
