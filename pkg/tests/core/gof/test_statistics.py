import dataclasses

import numpy as np
import pytest

from app.config import settings
from app.core.data.sample import SurvivalSample
from app.core.data.simulation import SimulationLaw, simulate
from app.core.data.truths import ConstantTruth
from app.core.bench.experiment import gof_level_study
from app.core.errors import NoEventsError
from app.core.gof.path import dn_path
from app.core.gof.statistics import (
    default_kind,
    gof_statistic,
    kolmogorov_tail,
    simulate_bridge_exceedance,
    threshold_for,
)
from app.core.parametric.families import get_family


# --- RESIDUAL PATH ---
def test_path_on_d3(d3, constant_family):
    path = dn_path(d3, constant_family, (0.0, 3.0))
    assert path.fit.theta_hat[0] == pytest.approx(0.5)
    assert np.allclose(path.eval_points, [0, 1, 1, 2, 2, 3, 3, 3])
    assert np.allclose(path.values[1:-1], [-1.5, -0.5, -1.5, -0.5, -1.0, 0.0], atol=1e-12)
    assert path.values[0] == 0.0
    assert path.values[-1] == pytest.approx(0.0, abs=1e-12)
    assert path.max_abs == pytest.approx(1.5)
    assert np.array_equal(path.left_limit, [False, True, False, True, False, True, False, False])
    assert np.allclose(path.dn, path.values / np.sqrt(3))
    assert path.n_ab == 3


def test_path_needs_failures(d3, constant_family):
    with pytest.raises(NoEventsError):
        dn_path(d3, constant_family, (1.5, 1.9))


def test_multi_parameter_path_ends_at_zero(constant_sample, gompertz_family):
    path = dn_path(constant_sample, gompertz_family, (0.2, 2.5))
    assert path.product_form
    assert path.weighted_values is None
    assert path.values[-1] == pytest.approx(0.0, abs=1e-4)


def _constant_path_on_grid(sample, theta, a, t):
    """N(a, t] - theta int_a^t Y du, straight from the observations."""
    exposure = np.clip(np.minimum(sample.times[None, :], t[:, None]) - a, 0.0, None).sum(axis=1)
    counted = sample.counting_process(t) - sample.counting_process(a)
    return counted - theta * exposure


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_path_supremum_sits_on_failure_points(constant_law, constant_family, seed):
    sample = simulate(constant_law, 300, seed=seed)
    a, b = 0.3, 2.6
    path = dn_path(sample, constant_family, (a, b))
    theta = path.fit.theta_hat[0]

    at_points = _constant_path_on_grid(sample, theta, a, path.eval_points[~path.left_limit])
    np.testing.assert_allclose(path.values[~path.left_limit], at_points, atol=1e-9)

    dense = np.linspace(a, b, 1000)
    on_grid = np.max(np.abs(_constant_path_on_grid(sample, theta, a, dense)))
    assert on_grid <= path.max_abs + 1e-10
    # a grid step misses at most one jump plus the drift over the step
    assert on_grid >= path.max_abs - 1.0 - theta * sample.n * (b - a) / 999
    with_points = np.max(np.abs(np.concatenate([
        _constant_path_on_grid(sample, theta, a, dense), path.values,
    ])))
    assert with_points == pytest.approx(path.max_abs, abs=1e-10)


@pytest.mark.parametrize("factor", [4.0, 0.25])
def test_statistics_ignore_the_time_unit(constant_law, constant_family, factor):
    sample = simulate(constant_law, 500, seed=41)
    scaled = SurvivalSample.from_records(sample.times * factor, sample.statuses, horizon=sample.horizon * factor)
    path = dn_path(sample, constant_family, (0.4, 2.2))
    rescaled = dn_path(scaled, constant_family, (0.4 * factor, 2.2 * factor))
    assert rescaled.fit.theta_hat[0] == pytest.approx(path.fit.theta_hat[0] / factor, rel=1e-10)
    assert rescaled.n_ab == path.n_ab
    for kind in ("ks_const", "cvm", "l1"):
        assert gof_statistic(rescaled, kind).statistic == pytest.approx(gof_statistic(path, kind).statistic, rel=1e-9)


# --- STATISTICS ---
def test_constant_ks_on_d3(d3, constant_family):
    path = dn_path(d3, constant_family, (0.0, 3.0))
    for level in (0.10, 0.05):
        decision = gof_statistic(path, "ks_const", level)
        assert decision.statistic == pytest.approx(1.5 / np.sqrt(3), abs=1e-4)
        assert decision.statistic == pytest.approx(0.8660, abs=1e-4)
        assert not decision.reject
    assert gof_statistic(path, "ks_const", 0.10).threshold == 1.225
    assert gof_statistic(path, "ks_const", 0.05).threshold == 1.359


def test_one_parameter_ks_agrees_for_constant_model(d3, constant_family):
    path = dn_path(d3, constant_family, (0.0, 3.0))
    one_p = gof_statistic(path, "ks_1p").statistic
    assert one_p == pytest.approx(gof_statistic(path, "ks_const").statistic, rel=1e-9)


def test_integral_statistics_on_d3(d3, constant_family):
    path = dn_path(d3, constant_family, (0.0, 3.0))
    assert gof_statistic(path, "cvm").statistic == pytest.approx(0.5 / 9)
    assert gof_statistic(path, "l1").statistic == pytest.approx(1.0 / 3 ** 1.5)
    zero = dataclasses.replace(path, failure_values=np.zeros(3))
    decision = gof_statistic(zero, "cvm")
    assert decision.statistic == 0.0 and not decision.reject


def test_statistic_family_mismatch(d3, constant_family, constant_sample, gompertz_family):
    constant_path = dn_path(d3, constant_family, (0.0, 3.0))
    gompertz_path = dn_path(constant_sample, gompertz_family, (0.0, 1.0))
    with pytest.raises(ValueError):
        gof_statistic(gompertz_path, "ks_const")
    with pytest.raises(ValueError):
        gof_statistic(gompertz_path, "ks_1p")
    with pytest.raises(ValueError):
        gof_statistic(constant_path, "ad")


def test_default_kinds():
    assert default_kind(get_family("constant")) == "ks_const"
    assert default_kind(get_family("gompertz")) == "ks_multi"


# --- THRESHOLDS ---
@pytest.mark.parametrize("kind,level,expected", [
    ("ks_1p", 0.10, 1.225),
    ("ks_multi", 0.05, 1.359),
    ("cvm", 0.10, 0.347),
    ("cvm", 0.05, 0.461),
    ("l1", 0.10, 0.499),
    ("l1", 0.05, 0.582),
])
def test_threshold_table(kind, level, expected):
    assert threshold_for(kind, level) == expected


def test_threshold_errors_and_overrides(mocker):
    with pytest.raises(ValueError):
        threshold_for("ad", 0.10)
    with pytest.raises(ValueError):
        threshold_for("cvm", 0.01)
    mocker.patch.dict(settings.THRESHOLD_OVERRIDES, {"cvm@0.01": 0.744})
    assert threshold_for("cvm", 0.01) == 0.744


def test_kolmogorov_tail():
    assert kolmogorov_tail(1.225) == pytest.approx(0.10, abs=0.005)
    assert kolmogorov_tail(1.359) == pytest.approx(0.05, abs=0.005)


@pytest.mark.slow
@pytest.mark.parametrize("functional,threshold", [("ks", 1.225), ("cvm", 0.347), ("l1", 0.499)])
def test_bridge_exceedance_matches_table(functional, threshold):
    rate = simulate_bridge_exceedance(threshold, functional, n_paths=100_000, n_grid=10_000, seed=7)
    assert rate == pytest.approx(0.10, abs=0.01)


@pytest.mark.slow
def test_null_rejection_rates():
    law = SimulationLaw(ConstantTruth(1.0), horizon=3.0)
    one = gof_level_study(law, get_family("constant"), (0.0, 3.0), n=2000, replications=2000,
                          kinds=["ks_const", "cvm", "l1"], level=0.10, seed=17)
    assert list(one["kind"]) == ["ks_const", "cvm", "l1"]
    assert one["rate"].between(0.07, 0.13).all()
    two = gof_level_study(law, get_family("gompertz"), (0.0, 3.0), n=2000, replications=2000,
                          kinds=["ks_multi"], level=0.10, seed=17)
    assert float(two["rate"].iloc[0]) <= 0.13
