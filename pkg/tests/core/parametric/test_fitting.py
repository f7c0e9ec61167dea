import numpy as np
import pytest

from app.core.data.simulation import SimulationLaw, simulate
from app.core.data.truths import ConstantTruth, GompertzTruth, QuadraticTruth, WeibullTruth
from app.core.errors import EmptyWindowError
from app.core.parametric.families import get_family
from app.core.parametric.fitting import fit_weighted_mle
from app.core.parametric.least_false import least_false_parameter
from app.core.parametric.sandwich import sandwich
from app.core.smoothing.kernels import get_kernel


def test_constant_occurrence_exposure(d3, constant_family):
    fit = fit_weighted_mle(d3, constant_family, interval=(0.0, 3.0))
    assert fit.theta_hat[0] == pytest.approx(0.5, abs=1e-12)
    assert fit.method == "closed_form"
    assert fit.converged
    assert fit.n_events == 3


def test_constant_matches_closed_form(constant_sample, constant_family):
    a, b = 0.4, 2.1
    fit = fit_weighted_mle(constant_sample, constant_family, interval=(a, b))
    expected = constant_sample.event_count(a, b) / constant_sample.exposure(None, a, b)
    assert fit.theta_hat[0] == pytest.approx(expected, rel=1e-10)


def test_gompertz_on_constant_data():
    law = SimulationLaw(ConstantTruth(1.0), horizon=2.0)
    sample = simulate(law, 10_000, seed=17)
    family = get_family("gompertz")
    fit = fit_weighted_mle(sample, family)
    assert fit.converged
    assert fit.score_residual <= 1e-8
    se = sandwich(sample, family, None, None, fit.theta_hat).standard_errors()
    assert abs(fit.theta_hat[1]) <= 3 * se[1]


def test_gompertz_recovers_truth():
    law = SimulationLaw(GompertzTruth(0.5, 0.8), ConstantTruth(0.2), horizon=2.5)
    sample = simulate(law, 20_000, seed=8)
    fit = fit_weighted_mle(sample, get_family("gompertz"))
    se = sandwich(sample, get_family("gompertz"), None, None, fit.theta_hat).standard_errors()
    assert abs(fit.theta_hat[0] - 0.5) < 4 * se[0]
    assert abs(fit.theta_hat[1] - 0.8) < 4 * se[1]


def test_weibull_uses_newton_and_converges():
    law = SimulationLaw(WeibullTruth(1.0, 1.5), horizon=2.0)
    sample = simulate(law, 5000, seed=21)
    fit = fit_weighted_mle(sample, get_family("weibull"))
    assert fit.method == "newton"
    assert fit.converged
    assert fit.theta_hat[1] == pytest.approx(1.5, abs=0.1)


def test_local_and_global_parametrizations_agree(constant_sample):
    kernel = get_kernel("epanechnikov")
    s, h = 1.2, 1.0
    w = kernel.weight(s, h)
    interval = (s - h / 2, s + h / 2)
    family = get_family("gompertz")
    local = family.localize(s)
    fit_global = fit_weighted_mle(constant_sample, family, weight=w, interval=interval)
    fit_local = fit_weighted_mle(constant_sample, local, weight=w, interval=interval)
    t = np.linspace(*interval, 11)
    np.testing.assert_allclose(
        family.hazard(t, fit_global.theta_hat), local.hazard(t, fit_local.theta_hat), rtol=1e-6
    )


def test_fixed_slope_profile(constant_sample):
    family = get_family("gompertz").localize(1.0)
    fit = fit_weighted_mle(constant_sample, family, interval=(0.5, 1.5), fixed={1: 0.0})
    expected = constant_sample.event_count(0.5, 1.5) / constant_sample.exposure(None, 0.5, 1.5)
    assert fit.method == "closed_form"
    assert fit.theta_hat[0] == pytest.approx(expected, rel=1e-10)


def test_empty_window(d3, constant_family):
    with pytest.raises(EmptyWindowError):
        fit_weighted_mle(d3, constant_family, interval=(3.0 - 1e-3, 3.0 - 1e-4))
    with pytest.raises(ValueError):
        fit_weighted_mle(d3, constant_family, interval=(1.0, 5.0))


def test_least_false_constant_is_exposure_weighted_mean():
    truth = QuadraticTruth(1.0, 1.0)
    fit = least_false_parameter(truth, get_family("constant"), (0.0, 1.0), at_risk=lambda t: np.ones_like(t))
    assert fit.theta_hat[0] == pytest.approx(1.0 + 1.0 / 3.0, rel=1e-10)


def test_least_false_recovers_model_truth():
    law = SimulationLaw(GompertzTruth(0.5, 0.8), horizon=2.0)
    fit = least_false_parameter(law, get_family("gompertz"), (0.0, 2.0))
    np.testing.assert_allclose(fit.theta_hat, [0.5, 0.8], rtol=1e-6)
