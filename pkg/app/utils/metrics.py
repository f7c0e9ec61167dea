"""
Prometheus metrics for the estimation stack.
Counters only track operational health (fits, tests, gaps); they never
feed back into results, so outputs stay reproducible.
"""
import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Union

from prometheus_client import REGISTRY, Counter, Histogram, write_to_textfile

logger = logging.getLogger(__name__)

# ============================================
# 1. FITTING
# ============================================

local_fits_total = Counter(
    'dynhazard_local_fits_total',
    'Weighted likelihood fits by family and outcome',
    ['family', 'outcome']
)

fit_iterations = Histogram(
    'dynhazard_fit_iterations',
    'Optimizer iterations per weighted likelihood fit',
    buckets=[1, 2, 4, 8, 16, 32, 64, 128]
)

curve_gaps_total = Counter(
    'dynhazard_curve_gaps_total',
    'Grid points left as flagged gaps',
    ['flag']
)

# ============================================
# 2. GOODNESS OF FIT
# ============================================

gof_tests_total = Counter(
    'dynhazard_gof_tests_total',
    'Interval goodness-of-fit tests by statistic and decision',
    ['kind', 'decision']
)

# ============================================
# 3. SIMULATION
# ============================================

simulated_observations_total = Counter(
    'dynhazard_simulated_observations_total',
    'Observations drawn by the simulator'
)

replications_total = Counter(
    'dynhazard_replications_total',
    'Monte Carlo replications by outcome',
    ['outcome']
)

operation_duration = Histogram(
    'dynhazard_operation_duration_seconds',
    'Wall time of heavy operations',
    buckets=[0.01, 0.1, 0.5, 1.0, 5.0, 30.0, 120.0, 600.0],
    labelnames=['operation']
)


@contextmanager
def measure_duration(operation: str):
    """Context manager to measure code block duration"""
    start = time.time()
    try:
        yield
    finally:
        operation_duration.labels(operation=operation).observe(time.time() - start)


def dump_metrics(path: Union[str, Path]) -> None:
    """Writes the default registry in text exposition format."""
    write_to_textfile(str(path), REGISTRY)
    logger.info(f"Metrics written to {path}")
