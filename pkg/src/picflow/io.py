"""JSON and CSV serialization for tensors, warped metrics and reports.

Tensor documents are ``{"n", "format": "dense", "components", "meta"}`` with
the ``n^4`` components flattened in C order.  Warped metrics are
``{"n", "s", "phi", "f" (optional), "tip"}``.  Floats are written with
Python's shortest round-trip repr in JSON and with 17 significant digits in
CSV; non-finite values become the strings ``"inf"``, ``"-inf"``, ``"nan"``.
Files are written to a temporary name and renamed, so a failed write never
leaves a partial file behind.
"""

import json
import math
import os
import tempfile

import numpy as np

from .models import WarpedMetric
from .tensor import make_tensor


def to_jsonable(obj):
    """Recursively convert numpy types and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def format_csv_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def csv_text(rows, columns):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_csv_value(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def write_csv(path, rows, columns):
    atomic_write(path, csv_text(rows, columns))


# --- tensors ----------------------------------------------------------------

def tensor_to_dict(Rm, meta=None):
    return {
        "n": Rm.n,
        "format": "dense",
        "components": Rm.components.ravel().tolist(),
        "meta": meta or {},
    }


def tensor_from_dict(doc):
    """Validated tensor from a JSON document; raises ValueError if malformed."""
    if not isinstance(doc, dict):
        raise ValueError("tensor document must be a JSON object")
    if doc.get("format", "dense") != "dense":
        raise ValueError(f"unsupported tensor format {doc.get('format')!r}")
    if "n" not in doc or "components" not in doc:
        raise ValueError("tensor document needs 'n' and 'components'")
    return make_tensor(int(doc["n"]), np.asarray(doc["components"], dtype=float))


def save_tensor(path, Rm, meta=None):
    write_json(path, tensor_to_dict(Rm, meta))


def load_tensor(path):
    return tensor_from_dict(read_json(path))


# --- warped metrics ---------------------------------------------------------

def warped_to_dict(W):
    doc = {"n": W.n, "s": W.s.tolist(), "phi": W.phi.tolist(), "tip": bool(W.tip)}
    if W.f is not None:
        doc["f"] = W.f.tolist()
    return doc


def warped_from_dict(doc):
    if not isinstance(doc, dict) or not {"n", "s", "phi"} <= set(doc):
        raise ValueError("warped metric document needs 'n', 's' and 'phi'")
    f = doc.get("f")
    return WarpedMetric(int(doc["n"]), np.asarray(doc["s"], dtype=float),
                        np.asarray(doc["phi"], dtype=float),
                        None if f is None else np.asarray(f, dtype=float),
                        bool(doc.get("tip", False)))


def save_warped(path, W):
    write_json(path, warped_to_dict(W))


def load_warped(path):
    return warped_from_dict(read_json(path))
