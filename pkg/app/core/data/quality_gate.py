# app/core/data/quality_gate.py

import logging
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# Header occupies line 1 of the file
FIRST_DATA_LINE = 2


class SampleQualityGate:
    """
    Validates raw survival rows before they become a SurvivalSample.
    Prevents 'Garbage In, Garbage Out': every bad row is reported with its
    file line number instead of stopping at the first one.
    """

    def __init__(self, time_column: str = "time", status_column: str = "status"):
        self.time_column = time_column
        self.status_column = status_column

    def validate_frame(
        self, frame: pd.DataFrame, horizon: Optional[float] = None
    ) -> Tuple[bool, List[str]]:
        """
        Checks a frame of raw strings (as read with dtype=str).
        Returns: (is_valid, violations)
        """
        if frame is None or frame.empty:
            return False, ["empty file: no data rows"]

        # 1. Column presence
        missing = [c for c in (self.time_column, self.status_column) if c not in frame.columns]
        if missing:
            return False, [f"missing column '{c}'" for c in missing]

        violations: List[str] = []
        raw_time = frame[self.time_column].astype(str).str.strip()
        raw_status = frame[self.status_column].astype(str).str.strip()
        time = pd.to_numeric(raw_time, errors="coerce")
        status = pd.to_numeric(raw_status, errors="coerce")

        for pos in range(len(frame)):
            line = pos + FIRST_DATA_LINE
            t_raw, d_raw = raw_time.iat[pos], raw_status.iat[pos]
            t, d = time.iat[pos], status.iat[pos]

            # 2. Missing / malformed values
            if t_raw in ("", "nan"):
                violations.append(f"missing {self.time_column} at line {line}")
            elif not np.isfinite(t):
                violations.append(f"malformed {self.time_column} '{t_raw}' at line {line}")
            # 3. Domain checks
            elif t < 0:
                violations.append(f"negative time at line {line}")
            elif horizon is not None and t > horizon:
                violations.append(f"time beyond horizon {horizon} at line {line}")

            if d_raw in ("", "nan"):
                violations.append(f"missing {self.status_column} at line {line}")
            elif not np.isfinite(d) or d not in (0, 1):
                violations.append(f"status must be 0 or 1, got '{d_raw}' at line {line}")

        if violations:
            logger.warning(f"Sample rejected with {len(violations)} violation(s); first: {violations[0]}")
            return False, violations
        return True, []
