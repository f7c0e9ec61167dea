import numpy as np
import pytest

from app.core.data.sample import SurvivalSample
from app.core.data.simulation import SimulationLaw, derive_seed, simulate
from app.core.data.truths import ConstantTruth, PiecewiseConstantTruth
from app.core.errors import InsufficientWindowError
from app.core.gof.windows import (
    expand_window,
    geometric_grid,
    smallest_feasible_h,
    startup_interval,
    window_bounds,
)

CHANGE_POINT = 1.0


@pytest.fixture(scope="module")
def change_point_law():
    return SimulationLaw(PiecewiseConstantTruth((CHANGE_POINT,), (0.5, 5.0)), horizon=2.0)


# --- GEOMETRY ---
def test_window_bounds_are_clipped():
    assert window_bounds(1.0, 1.0, 3.0) == (0.5, 1.5)
    assert window_bounds(0.2, 1.0, 3.0) == (0.0, pytest.approx(0.7))
    assert window_bounds(2.8, 1.0, 3.0) == (pytest.approx(2.3), 3.0)


def test_geometric_grid_ends_at_stop():
    grid = geometric_grid(0.5, 3.0, 1.5)
    assert grid[0] == 0.5 and grid[-1] == 3.0
    assert np.all(np.diff(grid) > 0)
    assert np.array_equal(geometric_grid(4.0, 3.0, 1.5), [3.0])


def test_smallest_feasible_h(d3):
    # (0, 2] holds failures 1 and 2
    h = smallest_feasible_h(d3, 1.0, 2)
    assert h == pytest.approx(2.0)
    assert d3.event_count(*window_bounds(1.0, h, 3.0)) == 2
    with pytest.raises(InsufficientWindowError):
        smallest_feasible_h(d3, 1.0, 4)


# --- WINDOW EXPANSION ---
def test_expand_window_needs_enough_failures(constant_family):
    sample = SurvivalSample.from_records([0.5, 1.0, 1.5, 2.0, 2.5], [1, 1, 1, 1, 1], horizon=3.0)
    with pytest.raises(InsufficientWindowError):
        expand_window(sample, constant_family, 1.5, min_events=10)


def test_expand_window_grid_checks(constant_sample, constant_family):
    with pytest.raises(ValueError):
        expand_window(constant_sample, constant_family, 1.5, min_events=10, h_grid=[1.0, 0.5])
    with pytest.raises(InsufficientWindowError):
        expand_window(constant_sample, constant_family, 1.5, min_events=200, h_grid=[1e-4, 2e-4])


def test_expand_window_reports_choice(constant_sample, constant_family):
    choice = expand_window(constant_sample, constant_family, 1.5, min_events=50)
    record = choice.to_dict()
    assert set(record) == {"s", "h_hat", "statistic_at_stop", "kind", "level", "sentinel_flag"}
    assert record["kind"] == "ks_const"
    assert record["level"] == 0.10
    assert choice.tests >= 1
    if choice.sentinel:
        assert np.isinf(choice.h)
    else:
        assert choice.h >= choice.h_min


def test_expand_window_short_grid_is_not_sentinel(constant_sample, constant_family):
    choice = expand_window(constant_sample, constant_family, 1.5, min_events=20, h_grid=[0.2, 0.3, 0.4])
    assert not choice.sentinel
    assert choice.h in (0.2, 0.3, 0.4)


@pytest.mark.slow
def test_model_true_data_mostly_reaches_full_range(constant_family):
    law = SimulationLaw(ConstantTruth(1.0), horizon=2.0)
    sentinels = 0
    for r in range(50):
        sample = simulate(law, 2000, seed=derive_seed(41, r))
        sentinels += expand_window(sample, constant_family, 1.0, min_events=200).sentinel
    assert sentinels / 50 >= 0.5


@pytest.mark.slow
def test_window_stops_before_change_point(change_point_law, constant_family):
    s = CHANGE_POINT - 0.25
    one_sided = 0
    for r in range(40):
        sample = simulate(change_point_law, 5000, seed=derive_seed(43, r))
        choice = expand_window(sample, constant_family, s, min_events=50)
        one_sided += (not choice.sentinel) and s + 0.5 * choice.h <= CHANGE_POINT + 1e-9
    assert one_sided / 40 >= 0.8


# --- STARTUP ---
def test_startup_sides(constant_sample, constant_family):
    left = startup_interval(constant_sample, constant_family, min_events=50)
    right = startup_interval(constant_sample, constant_family, min_events=50, side="right")
    T = constant_sample.horizon
    assert left.fit.interval == (0.0, left.boundary)
    assert right.fit.interval == (right.boundary, T)
    assert 0.0 < left.boundary <= T
    assert 0.0 <= right.boundary < T
    assert np.array_equal(left.theta_start, left.fit.theta_hat)
    assert left.b0 == left.boundary
    if not left.rejected:
        assert left.boundary == T and left.rejected_at is None


def test_startup_shrinks_after_rejection(change_point_law, constant_family):
    choice = startup_interval(simulate(change_point_law, 5000, seed=3), constant_family, min_events=50)
    assert choice.rejected
    assert choice.boundary < choice.rejected_at
    assert choice.boundary <= CHANGE_POINT


@pytest.mark.slow
def test_startup_boundary_before_change_point(change_point_law, constant_family):
    before = 0
    for r in range(40):
        sample = simulate(change_point_law, 5000, seed=derive_seed(47, r))
        before += startup_interval(sample, constant_family, min_events=50).boundary <= CHANGE_POINT
    assert before / 40 >= 0.8


def test_startup_errors(d3, constant_family):
    with pytest.raises(ValueError):
        startup_interval(d3, constant_family, min_events=1, side="middle")
    with pytest.raises(InsufficientWindowError):
        startup_interval(d3, constant_family, min_events=5)
