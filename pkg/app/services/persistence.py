# app/services/persistence.py

import io
import json
import logging
import math
import os
import platform
import tempfile
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import pandas as pd
import pydantic
import scipy

from app.config import settings

logger = logging.getLogger(__name__)

PROVENANCE_PREFIX = "# "


def package_versions() -> Dict[str, str]:
    return {
        settings.PROJECT_NAME.lower(): settings.VERSION,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
        "python": platform.python_version(),
    }


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays unwrapped, non-finite floats -> None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, pydantic.BaseModel):
        return _plain(value.model_dump())
    return value


def dumps(payload: Any) -> str:
    return json.dumps(_plain(payload), sort_keys=True, indent=2)


class PersistenceService:
    """
    Deterministic result files. Every write goes to a temp file in the
    target directory and is moved into place with os.replace; outputs
    carry no timestamps or host names.
    """

    def atomic_write(self, path: Union[str, Path], text: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        logger.debug(f"Wrote {path}")
        return path

    def save_frame(self, path: Union[str, Path], frame: pd.DataFrame, provenance: Dict) -> Path:
        """CSV with the provenance as one '# '-prefixed JSON line on top."""
        header = PROVENANCE_PREFIX + json.dumps(_plain(provenance), sort_keys=True) + "\n"
        body = frame.to_csv(index=False, lineterminator="\n", float_format="%.12g")
        return self.atomic_write(path, header + body)

    def save_json(self, path: Union[str, Path], payload: Any) -> Path:
        return self.atomic_write(path, dumps(payload) + "\n")

    def load_frame(self, path: Union[str, Path]) -> Tuple[pd.DataFrame, Dict]:
        """Inverse of save_frame: (frame, provenance)."""
        text = Path(path).read_text(encoding="utf-8")
        provenance: Dict = {}
        lines = text.split("\n")
        body_start = 0
        for i, line in enumerate(lines):
            if not line.startswith(PROVENANCE_PREFIX.strip()):
                body_start = i
                break
            provenance.update(json.loads(line[len(PROVENANCE_PREFIX):]))
        frame = pd.read_csv(io.StringIO("\n".join(lines[body_start:])))
        return frame, provenance


persistence = PersistenceService()
