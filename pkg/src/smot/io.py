"""File formats: measure, coupling and cost JSON; round-trip CSV."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .coupling import FiniteCoupling
from .errors import DomainError
from .measure import DiscreteMeasure
from .wsot.cost import CostSpec


def read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}", path=str(path)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not valid JSON: {exc.msg}", path=str(path), line=exc.lineno) from exc


def load_measure(path) -> DiscreteMeasure:
    """Measure JSON ``{"atoms": [[x, w], ...]}`` with increasing ``x``."""
    return DiscreteMeasure.from_json(read_json(path))


def load_coupling(path) -> FiniteCoupling:
    """Coupling JSON ``{"rows": [{"x": .., "w": .., "kernel": [[y, p], ...]}, ...]}``."""
    return FiniteCoupling.from_json(read_json(path))


def load_cost(path, xs=None, ys=None) -> CostSpec:
    """Cost JSON, e.g. ``{"kind": "pairwise", "c": [[..]]}`` over ``xs x ys``."""
    return CostSpec.from_json(read_json(path), xs, ys)


def clean(obj):
    """JSON-safe copy: numpy scalars become Python numbers, infinities become strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, round-trip floats."""
    return json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False)


def fmt17(v) -> str:
    return "%.17g" % v if isinstance(v, (float, np.floating)) else str(v)


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt17(v) for v in r])
    return buf.getvalue()


def write_text(path, text: str):
    Path(path).write_text(text)
