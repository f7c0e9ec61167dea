import numpy as np
import pytest

from app.core.bandwidth.plan import BandwidthPlan
from app.core.data.sample import SurvivalSample
from app.core.data.simulation import SimulationLaw, simulate
from app.core.data.truths import ConstantTruth
from app.core.dynamic.estimator import LocalFitSpec, estimate_curve, fit_local_at, local_constant
from app.core.errors import ConfigError, InsufficientWindowError
from app.core.gof.windows import startup_interval
from app.core.parametric.families import get_family
from app.core.smoothing.kernels import get_kernel
from app.core.smoothing.nelson_aalen import smoothed_hazard


def _spec(family="constant", kernel="uniform", h=2.0, grid=(1.0,), **kwargs):
    kwargs.setdefault("min_events", 1)
    kwargs.setdefault("startup", "none")
    return LocalFitSpec(
        family=get_family(family),
        kernel=get_kernel(kernel),
        bandwidth=BandwidthPlan.fixed(h),
        grid=grid,
        **kwargs,
    )


# --- HAND ORACLES ---
def test_occurrence_over_exposure_on_d3(d3):
    theta, alpha, se = fit_local_at(d3, _spec(), s=2.0, h=2.0)
    assert alpha == pytest.approx(2 / 3, abs=1e-12)
    assert theta[0] == pytest.approx(2 / 3, abs=1e-12)
    assert se == pytest.approx(np.sqrt(1.0 * (2 / 3) / (2.0 * d3.at_risk(2.0))))


def test_full_window_is_global_fit(d3):
    estimate = fit_local_at(d3, _spec(), s=1.5, h=3.0)
    assert estimate.alpha_hat == pytest.approx(0.5, abs=1e-12)
    assert estimate.window == (0.0, 3.0)


def test_local_constant_matches_fit_on_d3(d3, epanechnikov):
    expected = local_constant(d3, epanechnikov, 2.0, 2.0)
    estimate = fit_local_at(d3, _spec(kernel="epanechnikov"), s=2.0, h=2.0)
    assert estimate.alpha_hat == pytest.approx(expected, rel=1e-10, abs=1e-10)
    assert local_constant(d3, get_kernel("uniform"), 2.0, 2.0) == pytest.approx(2 / 3)


def test_local_constant_oracle_randomized(rng):
    kernels = [get_kernel(k) for k in ("uniform", "epanechnikov", "biweight")]
    cases = 0
    while cases < 50:
        n = int(rng.integers(20, 200))
        times = rng.exponential(1.0, n)
        statuses = (rng.uniform(size=n) < 0.8).astype(int)
        sample = SurvivalSample.from_records(times, statuses)
        kernel = kernels[cases % len(kernels)]
        h = rng.uniform(0.2, 1.5)
        s = rng.uniform(0.0, sample.horizon)
        a, b = max(s - h / 2, 0.0), min(s + h / 2, sample.horizon)
        if sample.event_count(a, b) == 0 or sample.at_risk(s) == 0:
            continue
        spec = LocalFitSpec(family=get_family("constant"), kernel=kernel, bandwidth=BandwidthPlan.fixed(h),
                            grid=(s,), min_events=1, startup="none")
        fitted = fit_local_at(sample, spec, s, h).alpha_hat
        assert fitted == pytest.approx(local_constant(sample, kernel, s, h), rel=1e-10, abs=1e-10)
        cases += 1


def test_time_scaling_equivariance(constant_sample, epanechnikov):
    c = 2.5
    scaled = SurvivalSample.from_records(constant_sample.times * c, constant_sample.statuses,
                                         horizon=constant_sample.horizon * c)
    for s in (0.7, 1.4, 2.2):
        original = local_constant(constant_sample, epanechnikov, s, 0.5)
        assert local_constant(scaled, epanechnikov, c * s, c * 0.5) == pytest.approx(original / c, rel=1e-10)


def test_continuity_across_event_times(constant_sample, epanechnikov):
    x = constant_sample.failure_times[len(constant_sample.failure_times) // 3]
    left = local_constant(constant_sample, epanechnikov, x - 1e-8, 0.5)
    right = local_constant(constant_sample, epanechnikov, x + 1e-8, 0.5)
    assert abs(left - right) < 1e-5 * left


def test_insufficient_window(d3):
    with pytest.raises(InsufficientWindowError):
        fit_local_at(d3, _spec(min_events=10), s=2.0, h=2.0)
    with pytest.raises(ValueError):
        fit_local_at(d3, _spec(), s=2.0, h=0.0)


def test_sandwich_standard_error(constant_sample):
    spec = _spec(h=0.5, se_mode="sandwich")
    estimate = fit_local_at(constant_sample, spec, s=1.5, h=0.5)
    formula = fit_local_at(constant_sample, _spec(h=0.5), s=1.5, h=0.5).se
    assert estimate.se == pytest.approx(formula, rel=0.25)


# --- CURVES ---
def test_constant_curve_accuracy(constant_sample):
    grid = tuple(np.linspace(0.25, 2.75, 11))
    curve = estimate_curve(constant_sample, _spec(h=0.5, grid=grid, min_events=10))
    assert curve.gaps() == {}
    assert np.mean(np.abs(curve.alpha_hat - 1.0)) <= 0.1
    assert all(p.score_residual <= 1e-8 for p in curve.points)
    assert np.all(curve.theta_local[:, 0] == curve.alpha_hat)


def test_gompertz_curve_score_residuals(constant_sample):
    grid = tuple(np.linspace(0.5, 2.5, 5))
    curve = estimate_curve(constant_sample, _spec(family="gompertz", kernel="epanechnikov", h=1.0, grid=grid))
    assert curve.param_names == ("theta", "beta")
    assert all(p.converged and p.score_residual <= 1e-8 for p in curve.points)
    frame = curve.to_frame()
    assert list(frame.columns) == ["s", "alpha_hat", "h_used", "se", "band_lo", "band_hi",
                                   "theta_1", "theta_2", "flag"]


def test_gaps_are_flagged():
    sample = SurvivalSample.from_records([1.0, 2.0, 3.0], [1, 1, 1], horizon=5.0)
    curve = estimate_curve(sample, _spec(h=2.0, grid=(2.0, 4.0), min_events=2))
    assert curve.point_at(2.0).flag == ""
    assert curve.point_at(4.0).flag == "no_risk"
    assert np.isnan(curve.point_at(4.0).alpha_hat)

    starved = estimate_curve(sample, _spec(h=2.0, grid=(2.0,), min_events=10))
    assert starved.gaps() == {"insufficient_window": 1}


def test_invalid_spec_reports_all_violations(d3):
    spec = _spec(grid=(2.0, 1.0, 7.0), se_mode="bootstrap", band_level=1.5)
    with pytest.raises(ConfigError) as exc:
        estimate_curve(d3, spec)
    assert len(exc.value.violations) == 4


def test_threads_do_not_change_results(constant_sample):
    grid = tuple(np.linspace(0.25, 2.75, 9))
    one = estimate_curve(constant_sample, _spec(family="gompertz", h=0.8, grid=grid, threads=1))
    many = estimate_curve(constant_sample, _spec(family="gompertz", h=0.8, grid=grid, threads=4))
    np.testing.assert_array_equal(one.alpha_hat, many.alpha_hat)
    np.testing.assert_array_equal(one.se, many.se)


def test_half_window_startup(constant_sample):
    spec = _spec(h=0.5, grid=(0.0, 0.1, 1.5), startup="half_window")
    curve = estimate_curve(constant_sample, spec)
    anchor = fit_local_at(constant_sample, spec, 0.25, 0.5)
    for s in (0.0, 0.1):
        point = curve.point_at(s)
        assert point.flag == "startup"
        assert point.alpha_hat == pytest.approx(anchor.alpha_hat)
    assert curve.point_at(1.5).flag == ""


def test_truncated_windows_without_startup(constant_sample):
    spec = _spec(h=0.5, grid=(0.0,))
    point = estimate_curve(constant_sample, spec).point_at(0.0)
    assert point.flag == ""
    a, b = 0.0, 0.25
    expected = constant_sample.event_count(a, b) / constant_sample.exposure(None, a, b)
    assert point.alpha_hat == pytest.approx(expected, rel=1e-10)


def test_gof_startup_uses_interval_fit(constant_sample):
    spec = _spec(h=0.5, grid=(0.0, 1.5, 3.0), startup="gof", min_events=10)
    curve = estimate_curve(constant_sample, spec)
    first, last = curve.point_at(0.0), curve.point_at(3.0)
    assert first.flag == "startup"
    assert last.flag == "shutdown"
    left = startup_interval(constant_sample, get_family("constant"), None, None, 10, side="left")
    assert curve.startup_boundary == left.boundary
    assert first.alpha_hat == pytest.approx(left.theta_start[0])
    assert np.isfinite(first.se) and first.se > 0


def test_two_pass_slope(constant_sample):
    grid = tuple(np.linspace(0.5, 2.5, 5))
    spec = _spec(family="gompertz", kernel="epanechnikov", h=0.6, grid=grid, slope_window_factor=3.0)
    curve = estimate_curve(constant_sample, spec)
    assert curve.metadata["two_pass_slope"] is True
    assert curve.gaps() == {}
    assert np.all(np.abs(curve.alpha_hat - 1.0) < 0.3)


@pytest.mark.slow
def test_gof_bandwidth_marks_global_points():
    law = SimulationLaw(ConstantTruth(1.0), horizon=2.0)
    sample = simulate(law, 1000, seed=4)
    spec = LocalFitSpec(family=get_family("constant"), kernel=get_kernel("epanechnikov"),
                        bandwidth=BandwidthPlan.gof(), grid=(0.5, 1.0, 1.5), min_events=20, startup="none")
    curve = estimate_curve(sample, spec)
    for point in curve.points:
        if point.flag == "global":
            assert np.isinf(point.h_used)
            assert point.alpha_hat == pytest.approx(sample.n_failures / sample.exposure(None, 0, 2.0))
        else:
            assert np.isfinite(point.alpha_hat)


# --- MONTE CARLO ---
@pytest.mark.slow
def test_variance_formula():
    law = SimulationLaw(ConstantTruth(1.0), horizon=3.0)
    n, h, s = 2000, 0.5, 1.5
    uniform = get_kernel("uniform")
    spec_c = _spec(h=h, min_events=1)
    spec_g = _spec(family="gompertz", h=h, min_events=1)
    dyn, gomp, smooth = [], [], []
    for r in range(500):
        sample = simulate(law, n, seed=1000 + r)
        dyn.append(fit_local_at(sample, spec_c, s, h).alpha_hat)
        gomp.append(fit_local_at(sample, spec_g, s, h).alpha_hat)
        smooth.append(smoothed_hazard(sample, uniform, h, s))
    target = uniform.constants.gamma_k / (n * h) * 1.0 / np.exp(-s)
    for values in (dyn, gomp, smooth):
        assert np.var(values, ddof=1) == pytest.approx(target, rel=0.25)


@pytest.mark.slow
def test_band_coverage():
    law = SimulationLaw(ConstantTruth(1.0), horizon=3.0)
    spec = _spec(h=0.5, grid=(1.5,), min_events=1)
    covered = 0
    for r in range(500):
        curve = estimate_curve(simulate(law, 4000, seed=5000 + r), spec)
        point = curve.points[0]
        covered += point.band_lo <= 1.0 <= point.band_hi
    assert 0.90 <= covered / 500 <= 0.98
