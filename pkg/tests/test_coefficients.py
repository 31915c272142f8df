import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpmelab import CoefficientModel, degeneracy_check, evaluate
from gpmelab.errors import ConfigurationError, DomainError

PME3 = CoefficientModel.pme(3)
SS = CoefficientModel.superslow()


def test_pme_examples():
    assert evaluate(PME3, 0.5, 0) == pytest.approx(0.125, rel=1e-15)
    assert evaluate(PME3, 2.0, 2) == pytest.approx(12.0, rel=1e-15)
    assert evaluate(PME3, 2.0, 3) == 6.0
    assert evaluate(CoefficientModel.pme(2), 1.7, 3) == 0.0


def test_superslow_example():
    assert evaluate(SS, 0.5, 1) == pytest.approx(np.exp(-2.0) * 4.0, rel=1e-14)
    assert evaluate(SS, 0.5, 1) == pytest.approx(0.5413, abs=1e-4)


def test_superslow_closed_forms():
    p = np.linspace(0.05, 3.0, 40)
    k, kp, kpp, kppp = SS.derivatives(p)
    e = np.exp(-1 / p)
    np.testing.assert_allclose(kp, e * p ** -2, rtol=1e-13)
    np.testing.assert_allclose(kpp, e * (p ** -4 - 2 * p ** -3), rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(kppp, e * (p ** -6 - 6 * p ** -5 + 6 * p ** -4), rtol=1e-12, atol=1e-300)


def test_errors():
    with pytest.raises(DomainError):
        evaluate(SS, 0.0)
    with pytest.raises(DomainError):
        evaluate(SS, -1.0, 1)
    with pytest.raises(DomainError):
        evaluate(PME3, -0.1)
    with pytest.raises(ValueError):
        evaluate(PME3, 1.0, 4)
    with pytest.raises(ValueError):
        evaluate(PME3, 1.0, -1)
    with pytest.raises(ConfigurationError):
        CoefficientModel.pme(0.5)
    with pytest.raises(ConfigurationError):
        CoefficientModel.from_dict({"model": "stefan"})


def test_linear_is_pme1():
    p = np.linspace(0.1, 2, 7)
    lin = CoefficientModel.linear()
    for a, b in zip(lin.derivatives(p), CoefficientModel.pme(1).derivatives(p)):
        np.testing.assert_array_equal(a, b)


def test_config_round_trip():
    for model in (PME3, SS, CoefficientModel.linear(), CoefficientModel.pme(2.5)):
        assert CoefficientModel.from_dict(model.to_dict()) == model
    assert CoefficientModel.from_dict({"model": "pme", "m": 3}) == PME3


@pytest.mark.parametrize("model", [CoefficientModel.pme(1), CoefficientModel.pme(2), PME3,
                                   CoefficientModel.pme(2.5), SS])
@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivatives_match_central_differences(model, order):
    p = np.linspace(0.3, 2.0, 9)
    errs = []
    for h in (1e-3, 5e-4):
        fd = (model.evaluate(p + h, order - 1) - model.evaluate(p - h, order - 1)) / (2 * h)
        errs.append(np.max(np.abs(fd - model.evaluate(p, order))))
    if errs[0] < 1e-9:
        return  # exact for low-degree polynomials
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_ratios_consistent_with_derivatives():
    p = np.linspace(0.2, 3, 11)
    for model in (CoefficientModel.pme(1), PME3, CoefficientModel.pme(2.5), SS):
        k, kp, kpp, kppp = model.derivatives(p)
        r1, r2, r3 = model.ratios(p)
        np.testing.assert_allclose(r1, kp / k, rtol=1e-13)
        np.testing.assert_allclose(r2, kpp / k, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(r3, kppp / k, rtol=1e-12, atol=1e-14)


def test_superslow_ratios_survive_underflow():
    p = np.array([1e-3, 1.2e-3])
    assert np.all(SS(p) == 0.0)
    assert np.all(np.isfinite(np.column_stack(SS.ratios(p))))


def test_superslow_faster_than_any_power():
    p = 10.0 ** -np.arange(1, 7)
    for n in range(1, 7):
        q = SS(p) / p ** n
        assert q[-1] < 1e-100
        assert np.all(np.diff(q) <= 0)


def test_degeneracy_examples():
    rep = degeneracy_check(PME3, [0.1, 0.5, 2.0])
    np.testing.assert_allclose(rep.C_values, 2 / 3, rtol=1e-15)
    assert rep.condition1_ok and rep.condition2_ok
    assert degeneracy_check(SS, [0.25]).C_values[0] == pytest.approx(0.5, rel=1e-15)
    np.testing.assert_array_equal(degeneracy_check(CoefficientModel.pme(1), [0.3, 1.0]).C_values, 0.0)


def test_degeneracy_identities_machine_precision():
    p = np.linspace(1e-3, 10, 500)
    for m in (1, 2, 3, 4, 2.5):
        C = degeneracy_check(CoefficientModel.pme(m), p).C_values
        np.testing.assert_allclose(C, 1 - 1 / m, rtol=0, atol=4e-16)
    ps = np.linspace(0.02, 0.49, 300)
    np.testing.assert_allclose(degeneracy_check(SS, ps).C_values, 1 - 2 * ps, rtol=0, atol=1e-14)
    assert degeneracy_check(SS, ps).condition2_ok


def test_degeneracy_undefined_not_crash():
    rep = degeneracy_check(CoefficientModel.constant(2.0), [0.5, 1.0])
    assert np.all(rep.undefined)
    assert not rep.condition1_ok
    assert not rep.condition2_ok


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 10.0), st.sampled_from([1.0, 2.0, 3.0, 4.0]))
def test_pme_positive_and_degenerate(p, m):
    model = CoefficientModel.pme(m)
    assert model(p) > 0
    assert model(p * 1e-6) < model(p)
