import numpy as np
import pytest

from app.core.smoothing.nelson_aalen import (
    nelson_aalen,
    smoothed_hazard,
    smoothed_hazard_curve,
    smoothed_hazard_variance,
)


def test_hand_values(d3, d4):
    path = nelson_aalen(d3)
    assert path(1.0) == pytest.approx(1 / 3)
    assert path(2.0) == pytest.approx(5 / 6)
    assert path(3.0) == pytest.approx(11 / 6)
    assert path(0.5) == 0.0
    assert nelson_aalen(d4)(3.0) == pytest.approx(0.75)


def test_variance_increments(d3):
    path = nelson_aalen(d3)
    assert path.variance(3.0) == pytest.approx(1 / 9 + 1 / 4 + 1)


def test_smoothed_hand_values(d3, uniform, epanechnikov):
    assert smoothed_hazard(d3, uniform, 2.0, 2.0) == pytest.approx(0.75)
    assert smoothed_hazard(d3, epanechnikov, 2.0, 2.0) == pytest.approx(0.375)
    assert smoothed_hazard(d3, uniform, 2.0, 10.0) == 0.0


def test_smoothed_variance_on_d3(d3, uniform):
    # failures 2 and 3 with weights 1/2, at-risk 2 and 1
    assert smoothed_hazard_variance(d3, uniform, 2.0, 2.0) == pytest.approx(0.25 ** 2 + 0.5 ** 2)
    with pytest.raises(ValueError):
        smoothed_hazard_variance(d3, uniform, 0.0, 2.0)


def test_uniform_smoother_is_path_difference(constant_sample, uniform, rng):
    path = nelson_aalen(constant_sample)
    for _ in range(20):
        h = rng.uniform(0.1, 1.0)
        s = rng.uniform(h / 2, constant_sample.horizon - h / 2)
        expected = (path(s + h / 2) - path(s - h / 2)) / h
        assert smoothed_hazard(constant_sample, uniform, h, s) == pytest.approx(expected, rel=1e-12, abs=1e-14)


def test_nonpositive_bandwidth(d3, uniform):
    with pytest.raises(ValueError):
        smoothed_hazard(d3, uniform, 0.0, 1.0)


def test_curve_export(d3, uniform):
    frame = smoothed_hazard_curve(d3, uniform, 2.0, [1.0, 2.0])
    assert list(frame.columns) == ["s", "alpha_tilde", "h"]
    assert frame["alpha_tilde"].iloc[1] == pytest.approx(0.75)
