import numpy as np
import pytest

from app.core.data.simulation import SimulationLaw, simulate
from app.core.data.truths import ConstantTruth
from app.core.parametric.families import get_family
from app.core.parametric.fitting import fit_weighted_mle
from app.core.parametric.sandwich import sandwich


def test_information_on_d3(d3, constant_family):
    matrices = sandwich(d3, constant_family, None, (0.0, 3.0), [0.5])
    assert matrices.j_hat[0, 0] == pytest.approx(4.0)


def test_residual_path_vanishes_at_ends(constant_sample):
    family = get_family("gompertz")
    fit = fit_weighted_mle(constant_sample, family, interval=(0.2, 2.5))
    matrices = sandwich(constant_sample, family, None, (0.2, 2.5), fit.theta_hat)
    np.testing.assert_allclose(matrices.e_path(0.2), 0.0, atol=1e-12)
    np.testing.assert_allclose(matrices.e_path(2.5), 0.0, atol=1e-8)


def test_model_true_information_equals_variability():
    law = SimulationLaw(ConstantTruth(1.0), horizon=2.0)
    sample = simulate(law, 10_000, seed=31)
    family = get_family("constant")
    fit = fit_weighted_mle(sample, family)
    matrices = sandwich(sample, family, None, None, fit.theta_hat)
    gap = np.linalg.norm(matrices.j_hat - matrices.m_hat) / np.linalg.norm(matrices.j_hat)
    assert gap < 0.10


def test_covariance_is_symmetric_positive(constant_sample):
    family = get_family("gompertz")
    fit = fit_weighted_mle(constant_sample, family)
    cov = sandwich(constant_sample, family, None, None, fit.theta_hat).covariance
    np.testing.assert_allclose(cov, cov.T)
    assert np.all(np.linalg.eigvalsh(cov) > 0)
