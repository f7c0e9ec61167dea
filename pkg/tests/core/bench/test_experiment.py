import numpy as np
import pandas as pd
import pytest

from app.core.bench.comparison import compare_estimators
from app.core.bench.experiment import EstimatorConfig, Experiment, McReport, run_experiment
from app.core.bench.improvement import improvement_region
from app.core.data.simulation import SimulationLaw, derive_seed, simulate
from app.core.data.truths import (
    GompertzMakehamTruth,
    QuadraticTruth,
    WeibullTruth,
)
from app.core.dynamic.estimator import LocalFitSpec, estimate_curve, fit_local_at
from app.core.bandwidth.plan import BandwidthPlan
from app.core.errors import ConfigError
from app.core.parametric.families import get_family
from app.core.smoothing.kernels import get_kernel
from app.core.smoothing.nelson_aalen import smoothed_hazard


@pytest.fixture
def small_experiment(constant_law):
    return Experiment(
        law=constant_law,
        n=300,
        replications=4,
        estimators=(
            EstimatorConfig(label="dynamic", bandwidth="fixed:1.0"),
            EstimatorConfig(label="smoother", kind="smoothed_na", bandwidth="fixed:1.0"),
            EstimatorConfig(label="global", kind="parametric"),
        ),
        grid=(0.5, 1.0, 1.5, 2.0),
        seed=9,
        name="small",
    )


# --- CONFIGURATION ---
def test_estimator_validation():
    ok, violations = EstimatorConfig(label="x", kind="spline", family="cubic", bandwidth="fixed:-1").validate()
    assert not ok
    assert len(violations) == 3
    ok, violations = EstimatorConfig(label="na", kind="smoothed_na", bandwidth="gof").validate()
    assert violations == ["estimator 'na': the smoothed Nelson-Aalen takes no gof bandwidth"]


def test_experiment_validation(constant_law):
    exp = Experiment(law=constant_law, n=10, replications=0,
                     estimators=(EstimatorConfig(label="a"), EstimatorConfig(label="a")),
                     grid=(1.0, 0.5, 4.0))
    ok, violations = exp.validate()
    assert not ok
    assert "replications must be >= 1" in violations
    assert "estimator labels must be unique" in violations
    assert any(v.startswith("grid must be ascending") for v in violations)
    with pytest.raises(ConfigError):
        run_experiment(exp)


# --- RUNS ---
def test_run_is_deterministic(small_experiment):
    first = run_experiment(small_experiment)
    second = run_experiment(small_experiment, threads=2)
    assert first.estimates.shape == (4, 3, 4)
    np.testing.assert_array_equal(first.estimates, second.estimates)
    np.testing.assert_array_equal(first.ise, second.ise)


def test_replication_samples_use_derived_seeds(small_experiment):
    report = run_experiment(small_experiment)
    sample = simulate(small_experiment.law, small_experiment.n, seed=derive_seed(small_experiment.seed, 2))
    expected = sample.n_failures / sample.exposure(None, 0.0, sample.horizon)
    assert np.allclose(report.estimates[2, 2, :], expected)


def test_table_decomposes_mse(small_experiment):
    report = run_experiment(small_experiment)
    table = report.table
    assert len(table) == 3 * 4
    np.testing.assert_allclose(table["mse"], table["bias"] ** 2 + table["variance"])
    np.testing.assert_allclose(table["bias"], table["mean"] - table["truth"])
    assert table.loc[table["estimator"] == "global", "theory_variance"].isna().all()
    fixed = table[table["estimator"] == "dynamic"]
    assert (fixed["theory_variance"] > 0).all()
    assert report.failures == {"dynamic": 0, "smoother": 0, "global": 0}


def test_long_frame_and_summary(small_experiment):
    report = run_experiment(small_experiment)
    long = report.to_long_frame()
    assert list(long.columns) == ["estimator", "s", "metric", "value"]
    assert set(long["metric"]) == {"mean", "bias", "variance", "mse", "theory_bias", "theory_variance", "failures"}
    summary = report.summary()
    assert summary["replications"] == 4
    assert [row["estimator"] for row in summary["integrated_mse"]] == ["dynamic", "smoother", "global"]


# --- RANKING ---
def _report(ise):
    ise = np.asarray(ise, dtype=float)
    labels = ("a", "b")
    return McReport(
        name="paired", labels=labels, grid=np.array([1.0]), truth=np.array([1.0]),
        estimates=np.zeros((ise.shape[0], 2, 1)), ise=ise, table=pd.DataFrame(),
        failures={}, n=10, seed=0,
    )


def test_compare_ranks_by_imse(rng):
    a = 1.0 + 0.01 * rng.standard_normal(40)
    ranking = compare_estimators(_report(np.column_stack([a, a + 1.0])))
    assert list(ranking["estimator"]) == ["a", "b"]
    assert list(ranking["rank"]) == [1, 2]
    assert ranking.loc[0, "vs_b"] == "win"
    assert ranking.loc[1, "vs_a"] == "loss"
    assert ranking.loc[0, "vs_a"] == "-"


def test_compare_calls_small_differences_a_tie(rng):
    a = rng.standard_normal(40) + 5.0
    b = a.copy()
    b[::2] += 1e-3
    b[1::2] -= 1e-3
    ranking = compare_estimators(_report(np.column_stack([a, b])))
    assert set(ranking["vs_a"]) == {"-", "tie"}
    assert set(ranking["vs_b"]) == {"-", "tie"}
    identical = compare_estimators(_report(np.column_stack([a, a])))
    assert list(identical["rank"]) == [1, 1]
    assert set(identical["vs_a"]) == {"-", "tie"}


# --- IMPROVEMENT REGION ---
def test_gompertz_makeham_is_inside_region():
    grid = np.linspace(0.0, 3.0, 31)
    region = improvement_region(GompertzMakehamTruth(0.2, 0.3, 1.0), "gompertz", grid)
    assert (region["flag"] == "better").all()
    assert region["criterion"].between(0.0, 1.0).all()


def test_weibull_criterion_is_one():
    grid = np.linspace(0.1, 3.0, 30)
    region = improvement_region(WeibullTruth(1.0, 1.5), "weibull", grid)
    np.testing.assert_allclose(region["criterion"], 1.0, atol=1e-8)


def test_region_edge_cases(constant_law):
    flat = improvement_region(constant_law, "constant", [0.5, 1.0])
    assert list(flat["flag"]) == ["indeterminate", "indeterminate"]
    assert improvement_region(WeibullTruth(1.0, 1.5), "weibull", [0.0])["flag"][0] == "indeterminate"
    with pytest.raises(ValueError):
        improvement_region(QuadraticTruth(), "spline", [1.0])


@pytest.mark.slow
def test_running_gompertz_beats_smoother_bias():
    truth = QuadraticTruth(1.0, 1.0)
    law = SimulationLaw(truth, horizon=2.0)
    uniform = get_kernel("uniform")
    h, s = 0.4, 1.0
    spec = LocalFitSpec(family=get_family("gompertz"), kernel=uniform, bandwidth=BandwidthPlan.fixed(h),
                        grid=(s,), min_events=1, startup="none")
    smooth, gomp = [], []
    for r in range(300):
        sample = simulate(law, 20000, seed=derive_seed(71, r))
        smooth.append(smoothed_hazard(sample, uniform, h, s))
        gomp.append(fit_local_at(sample, spec, s, h).alpha_hat)
    smooth, gomp = np.array(smooth) - 2.0, np.array(gomp) - 2.0

    theory = 0.5 * uniform.constants.beta_k * h ** 2 * 2.0
    mc_se = smooth.std(ddof=1) / np.sqrt(smooth.size)
    assert abs(smooth.mean() - theory) <= max(0.3 * theory, 2 * mc_se)

    batches = [(abs(g.mean()) < abs(n.mean())) for g, n in zip(np.split(gomp, 5), np.split(smooth, 5))]
    assert sum(batches) >= 4


@pytest.mark.slow
def test_single_replication_is_one_estimate_curve_run(constant_law):
    config = EstimatorConfig(label="dynamic", family="gompertz", bandwidth="fixed:0.8")
    exp = Experiment(law=constant_law, n=500, replications=1, estimators=(config,),
                     grid=(0.5, 1.0, 1.5, 2.0, 2.5), seed=17)
    report = run_experiment(exp)
    sample = simulate(constant_law, 500, seed=derive_seed(17, 0))
    curve = estimate_curve(sample, config.to_spec(exp.grid))
    np.testing.assert_array_equal(report.estimates[0, 0], curve.alpha_hat)


@pytest.mark.slow
def test_flat_truth_gives_equal_imse(constant_law):
    exp = Experiment(
        law=constant_law,
        n=2000,
        replications=200,
        estimators=(
            EstimatorConfig(label="constant", bandwidth="fixed:0.5"),
            EstimatorConfig(label="smoother", kind="smoothed_na", bandwidth="fixed:0.5"),
        ),
        grid=tuple(np.linspace(0.5, 2.5, 9)),
        seed=23,
    )
    imse = run_experiment(exp).integrated_mse().set_index("estimator")["imse"]
    assert 0.8 <= imse["constant"] / imse["smoother"] <= 1.25


@pytest.mark.slow
def test_running_gompertz_wins_on_gompertz_makeham():
    # bias dominates the smoother's error on [0.75, 1.75] at this n and h
    law = SimulationLaw(GompertzMakehamTruth(0.2, 0.3, 1.0), horizon=2.5)
    exp = Experiment(
        law=law,
        n=20000,
        replications=100,
        estimators=(
            EstimatorConfig(label="gompertz", family="gompertz", bandwidth="fixed:1.0"),
            EstimatorConfig(label="smoother", kind="smoothed_na", bandwidth="fixed:1.0"),
        ),
        grid=tuple(np.linspace(0.75, 1.75, 9)),
        seed=31,
    )
    report = run_experiment(exp)
    assert report.failures == {"gompertz": 0, "smoother": 0}
    batches = [np.mean(chunk[:, 0]) < np.mean(chunk[:, 1]) for chunk in np.split(report.ise, 10)]
    assert sum(batches) >= 9
    ranking = compare_estimators(report)
    assert ranking.loc[0, "estimator"] == "gompertz"
    assert ranking.loc[0, "vs_smoother"] == "win"
