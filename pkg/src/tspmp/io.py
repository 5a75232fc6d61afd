"""JSON and CSV serialization with a versioned schema.

Floats are written with 17 significant digits so that every value parses
back to the identical double.  Non-finite floats become ``null``.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .calculus import GridFunction
from .errors import TspmpError

SCHEMA = "tspmp/1"


class SchemaError(TspmpError, ValueError):
    pass


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj) -> str:
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        s = format_float(x)
        # keep floats recognizable as floats
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if hasattr(obj, "to_json"):
        return _encode(obj.to_json())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(payload: dict) -> str:
    """Serialize ``payload`` with the schema tag first."""
    body = {"schema": SCHEMA}
    body.update({k: v for k, v in payload.items() if k != "schema"})
    return _encode(body) + "\n"


def loads(text: str) -> dict:
    data = json.loads(text)
    if not isinstance(data, dict) or data.get("schema") != SCHEMA:
        raise SchemaError(f"expected a JSON object with schema {SCHEMA!r}")
    return data


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def read_json(path) -> dict:
    return loads(Path(path).read_text(encoding="utf-8"))


# -----------------------------------------------------------------------------
# CSV
# -----------------------------------------------------------------------------


def gridfunction_to_csv(gf: GridFunction, header: list[str] | None = None) -> str:
    """One row per grid point: ``t, v_0, ..., v_{d-1}``."""
    d = gf.values.shape[1]
    header = header or ["t"] + [f"v{i}" for i in range(d)]
    if len(header) != d + 1:
        raise SchemaError("CSV header does not match the value dimension")
    buf = _io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for t, row in zip(gf.grid, gf.values):
        wr.writerow([format_float(t)] + [format_float(v) for v in row])
    return buf.getvalue()


def gridfunction_from_csv(text: str, columns: list[str] | None = None) -> GridFunction:
    """Parse CSV into a grid function; ``columns`` selects value columns by name (default: all numeric ones after ``t``)."""
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise SchemaError("CSV must start with a header whose first column is 't'")
    header, body = rows[0], [r for r in rows[1:] if r]
    if columns is None:
        idx = [i for i, name in enumerate(header[1:], 1) if name != "class"]
    else:
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"CSV lacks columns {missing}")
        idx = [header.index(c) for c in columns]
    grid = np.array([float(r[0]) for r in body])
    vals = np.array([[float(r[i]) for i in idx] for r in body]).reshape(len(body), len(idx))
    return GridFunction(grid, vals)


def trajectory_to_csv(traj) -> str:
    """Columns ``t, class, q_0.., u_0.., cost`` where ``cost`` is the running cost state ``q⁰``."""
    ts = traj.timescale
    n, m = traj.q.values.shape[1], traj.u.values.shape[1]
    buf = _io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["t", "class"] + [f"q_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)] + ["cost"])
    for k, t in enumerate(traj.grid):
        row = [format_float(t), ts.classify(t).label]
        row += [format_float(v) for v in traj.q.values[k]]
        row += [format_float(v) for v in traj.u.values[k]]
        row.append(format_float(traj.q0.values[k, 0]))
        wr.writerow(row)
    return buf.getvalue()


def fd_result_to_csv(res) -> str:
    buf = _io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["alpha", "error"])
    for a, e in res.rows():
        wr.writerow([format_float(a), format_float(e)])
    return buf.getvalue()
