# app/core/bench/comparison.py

import logging

import numpy as np
import pandas as pd

from app.core.bench.experiment import McReport

logger = logging.getLogger(__name__)

# Paired differences beyond this many standard errors count as a win or loss
SIGNIFICANCE_SE = 2.0


def _paired(a: np.ndarray, b: np.ndarray) -> str:
    ok = np.isfinite(a) & np.isfinite(b)
    diff = a[ok] - b[ok]
    if diff.size == 0:
        return "n/a"
    mean = float(np.mean(diff))
    se = float(np.std(diff, ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else 0.0
    if abs(mean) <= SIGNIFICANCE_SE * se or mean == 0.0:
        return "tie"
    return "win" if mean < 0 else "loss"


def compare_estimators(report: McReport) -> pd.DataFrame:
    """
    Ranking by integrated weighted MSE. Column `vs_<label>` reads
    win / loss / tie for the row estimator against that one, from paired
    per-replication ISE differences at the 2-SE level.
    """
    table = report.integrated_mse()
    table["rank"] = table["imse"].rank(method="min", na_option="bottom").astype(int)
    for j, other in enumerate(report.labels):
        table[f"vs_{other}"] = [
            "-" if i == j else _paired(report.ise[:, i], report.ise[:, j])
            for i in range(len(report.labels))
        ]
    table = table.sort_values(["rank", "estimator"], kind="mergesort").reset_index(drop=True)
    logger.info(f"Ranking for '{report.name}': {', '.join(table['estimator'])}")
    return table
