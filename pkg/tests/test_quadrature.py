import numpy as np
import pytest

from qwzness.errors import IntegrationError
from qwzness.quadrature import (GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, QuadratureSpec, integrate,
                                panel_rule)


def lorentzian_panel(center, width):
    def panel(a, b):
        x, wk, wg = panel_rule(a, b)
        f = width / ((x - center) ** 2 + width ** 2)
        return np.array(wk @ f), np.array(wg @ f)
    return panel


def test_rule_integrates_polynomials():
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    for p in range(23):
        exact = (1 - (-1) ** (p + 1)) / (p + 1)
        assert KRONROD_WEIGHTS @ NODES ** p == pytest.approx(exact, abs=1e-14)
    for p in range(8):
        exact = (1 - (-1) ** (p + 1)) / (p + 1)
        assert GAUSS_WEIGHTS @ NODES ** p == pytest.approx(exact, abs=1e-14)


@pytest.mark.parametrize("strategy", ["local", "global"])
@pytest.mark.parametrize("width", [1.0, 1e-3, 1e-6])
def test_narrow_lorentzian(strategy, width):
    a, b, c = -3.0, 5.0, 0.3
    exact = np.arctan((b - c) / width) - np.arctan((a - c) / width)
    res = integrate(lorentzian_panel(c, width), [a, c, b], rtol=1e-11, atol=1e-14, strategy=strategy)
    assert float(res.value) == pytest.approx(exact, rel=1e-10)
    assert res.error < 1e-10 * abs(exact)


def test_array_valued_integrand():
    def panel(a, b):
        x, wk, wg = panel_rule(a, b)
        f = np.stack([np.sin(x), np.exp(1j * x)])
        return f @ wk, f @ wg
    res = integrate(panel, [0.0, np.pi], rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(res.value, [2.0, 2j], atol=1e-12)


def test_panel_budget_exceeded():
    def panel(a, b):
        x, wk, wg = panel_rule(a, b)
        f = np.sign(x - 0.1234567) + np.abs(x) ** 0.5
        return np.array(wk @ f), np.array(wg @ f) + 1.0
    with pytest.raises(IntegrationError) as err:
        integrate(panel, [-1.0, 1.0], rtol=1e-14, atol=1e-15, max_panels=50)
    assert err.value.error_estimate > 0


def test_bad_inputs():
    with pytest.raises(ValueError):
        integrate(lorentzian_panel(0, 1), [1.0])
    with pytest.raises(ValueError):
        integrate(lorentzian_panel(0, 1), [0.0, 1.0], strategy="magic")
    with pytest.raises(ValueError):
        QuadratureSpec(rtol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(window=-1.0)


def test_default_margin():
    q = QuadratureSpec()
    assert q.margin(0.5, 2.0) == pytest.approx(20 * 0.5 + 10 * 2.0 + 2.0)
    assert QuadratureSpec(window=3.0).margin(0.5, 2.0) == 3.0
