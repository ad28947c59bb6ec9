"""
JSON and CSV rendering helpers for exact and float values
"""

import io
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from backend.config.settings import settings
from backend.services.qcyc import Q8Number

COEFFICIENT_COLUMNS = ["c0", "c1", "c2", "c3"]
VALUE_COLUMNS = COEFFICIENT_COLUMNS + ["re", "im"]


def value_payload(x: Any) -> Dict[str, Any]:
    if isinstance(x, Q8Number):
        return x.to_payload()
    x = complex(x)
    return {"re": x.real, "im": x.imag}


def value_columns(x: Any) -> Dict[str, Any]:
    """Exact p/q coefficients on 1, zeta, zeta^2, zeta^3 (blank for floats) and the double image."""
    payload = value_payload(x)
    row = dict(zip(COEFFICIENT_COLUMNS, payload.get("coefficients", [""] * 4)))
    row["re"] = payload["re"]
    row["im"] = payload["im"]
    return row


def frame_to_csv(frame: pd.DataFrame, path: Optional[Path] = None) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=f"%.{settings.FLOAT_DIGITS}g", lineterminator="\n")
    text = buffer.getvalue()
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


def _default(obj: Any) -> Any:
    if isinstance(obj, Q8Number):
        return obj.to_payload()
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps(payload: Any) -> str:
    return json.dumps(payload, indent=2, default=_default)
