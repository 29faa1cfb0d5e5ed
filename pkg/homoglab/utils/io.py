import json
import logging
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)


def to_jsonable(obj: Any) -> Any:
    """Recursively converts numpy scalars/arrays, dataframes and dataclasses."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else None
    if isinstance(obj, pd.DataFrame):
        return to_jsonable(obj.to_dict(orient="list"))
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    return obj


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n")
    log.debug(f"Wrote {path}")
    return path


def write_table(path: Path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format="%.17g")
    log.debug(f"Wrote {path}")
    return path


def write_columns(path: Path, x: Sequence[float], y: Sequence[float], header: str):
    """Two-column whitespace separated data file readable by gnuplot."""
    path = Path(path)
    np.savetxt(path, np.column_stack([x, y]), fmt="%.17g", header=header)
    return path
