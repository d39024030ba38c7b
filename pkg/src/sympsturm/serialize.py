"""Problem-file schema, validation, builders, and deterministic emission.

Input is UTF-8 JSON with a fixed schema tag; every command has an explicit
field list and unknown fields are rejected by name, as are NaN/Infinity
payloads and asymmetric matrices where symmetry is part of the contract.
Output is either JSON with sorted keys or CSV with a fixed column order and
17-significant-digit floats, so identical inputs produce identical bytes.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from dataclasses import dataclass, is_dataclass, fields as dc_fields

import numpy as np

from .errors import SchemaError
from .flows import BoundaryCondition, CoefficientPath, MorseSturmSystem
from .paths import rotation_path
from .symplectic import horizontal_frame, vertical_frame
from .spectral import OperatorFamily

SCHEMA_VERSION = "sympsturm/1"

COMMANDS = (
    "clm", "rs", "cz", "triple", "hormander", "flow", "morse",
    "spectral-flow", "verify", "kepler", "focal",
)

# fields allowed per command, beyond the common {"schema", "command"}
_FIELDS = {
    "clm": {"n", "interval", "path", "seed", "reference"},
    "rs": {"n", "interval", "path", "seed", "reference"},
    "cz": {"n", "interval", "path"},
    "triple": {"n", "alpha", "beta", "gamma"},
    "hormander": {"n", "l1", "l2", "m1", "m2"},
    "flow": {"n", "interval", "coefficient", "cells"},
    "morse": {"n", "T", "P", "Q", "R", "bc", "cells"},
    "spectral-flow": {"n", "T", "boundary", "start", "end", "cells"},
    "verify": set(),
    "kepler": {"h", "e"},
    "focal": {"n", "interval", "metric", "tangent", "shape", "curvature",
              "second_tangent", "second_shape", "cells"},
}


@dataclass(eq=False)
class ProblemFile:
    """A validated problem: the command plus its raw payload dict."""

    command: str
    payload: dict


def _reject_constant(token):
    raise SchemaError(f"non-finite number {token!r} in problem file")


def parse_problem(source):
    """Read and validate a problem file from a path, file object, or '-'.

    Raises SchemaError with the JSON line/column on parse failures and with
    the offending field name on schema violations.
    """
    if source == "-":
        import sys

        text = sys.stdin.read()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return validate_problem(raw)


def validate_problem(raw):
    if not isinstance(raw, dict):
        raise SchemaError("problem file must be a JSON object")
    if raw.get("schema") != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema {raw.get('schema')!r}; expected {SCHEMA_VERSION!r}"
        )
    command = raw.get("command")
    if command not in COMMANDS:
        raise SchemaError(f"unknown command {command!r}; expected one of {COMMANDS}")
    allowed = _FIELDS[command] | {"schema", "command"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise SchemaError(f"unknown field(s) {unknown} for command {command!r}")
    payload = {k: v for k, v in raw.items() if k not in ("schema", "command")}
    _check_finite(payload, "payload")
    return ProblemFile(command, payload)


def _check_finite(obj, where):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{where}[{i}]")
    elif isinstance(obj, float) and not np.isfinite(obj):
        raise SchemaError(f"non-finite value at {where}")


# ---------------------------------------------------------------------------
# field readers
# ---------------------------------------------------------------------------


def _need(payload, name, command):
    if name not in payload:
        raise SchemaError(f"command {command!r} requires field {name!r}")
    return payload[name]


def _as_int(value, name, minimum=1):
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise SchemaError(f"field {name!r} must be an integer >= {minimum}")
    return value


def _as_float(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"field {name!r} must be a number")
    return float(value)


def _as_interval(value, name):
    if (not isinstance(value, list) or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
        raise SchemaError(f"field {name!r} must be [a, b] with numbers a < b")
    a, b = float(value[0]), float(value[1])
    if not b > a:
        raise SchemaError(f"field {name!r} must satisfy a < b, got [{a}, {b}]")
    return (a, b)


def as_matrix(value, name, shape=None, symmetric=False, tol=1e-10):
    """Nested-list matrix with finiteness, shape, and symmetry checks."""
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(f"matrix {name!r} is not a rectangular numeric array") from None
    if M.ndim != 2:
        raise SchemaError(f"matrix {name!r} must be two-dimensional, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise SchemaError(f"matrix {name!r} contains non-finite entries")
    if shape is not None and M.shape != shape:
        raise SchemaError(f"matrix {name!r} must have shape {shape}, got {M.shape}")
    if symmetric and not np.allclose(M, M.T, atol=tol * max(1.0, np.abs(M).max())):
        raise SchemaError(f"matrix {name!r} is not symmetric")
    return M


def _matrix_fun(spec, dim, name, symmetric=True):
    """Time-dependent matrix from a coefficient spec.

    Specs: {"type": "constant", "matrix": M}, {"type": "polynomial",
    "coefficients": [M0, M1, ...]}, {"type": "samples", "times": [...],
    "matrices": [...]}; a bare nested list is shorthand for a constant.
    Returns a callable t -> matrix.
    """
    if isinstance(spec, list):
        spec = {"type": "constant", "matrix": spec}
    if not isinstance(spec, dict) or "type" not in spec:
        raise SchemaError(f"field {name!r} must be a coefficient spec with a 'type'")
    kind = spec["type"]
    shape = (dim, dim)
    if kind == "constant":
        M = as_matrix(spec.get("matrix"), f"{name}.matrix", shape, symmetric)
        return (lambda t, _M=M: _M)
    if kind == "polynomial":
        coeffs = spec.get("coefficients")
        if not isinstance(coeffs, list) or not coeffs:
            raise SchemaError(f"field {name!r} needs a nonempty 'coefficients' list")
        mats = [as_matrix(c, f"{name}.coefficients[{k}]", shape, symmetric)
                for k, c in enumerate(coeffs)]

        def fun(t, _mats=mats):
            out = np.zeros(shape)
            tk = 1.0
            for M in _mats:
                out = out + tk * M
                tk *= t
            return out

        return fun
    if kind == "samples":
        ts = spec.get("times")
        mats = spec.get("matrices")
        if not isinstance(ts, list) or not isinstance(mats, list) or len(ts) != len(mats):
            raise SchemaError(f"field {name!r} needs matching 'times' and 'matrices'")
        samples = [as_matrix(m, f"{name}.matrices[{k}]", shape, symmetric)
                   for k, m in enumerate(mats)]
        path = CoefficientPath.from_samples(ts, np.stack(samples))
        return path.fun
    raise SchemaError(f"field {name!r} has unknown coefficient type {kind!r}")


def _as_frame(spec, n, name):
    """A Lagrangian frame of the base space from a named kind or a matrix."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SchemaError(f"field {name!r} must be a frame spec with a 'kind'")
    kind = spec["kind"]
    if kind == "dirichlet":
        return horizontal_frame(n)
    if kind == "neumann":
        return vertical_frame(n)
    if kind == "frame":
        return as_matrix(spec.get("matrix"), f"{name}.matrix", (2 * n, n))
    raise SchemaError(f"field {name!r} has unknown frame kind {kind!r}")


def _as_path(spec, n, interval, name):
    """A symplectic path: the closed-form rotation or a coefficient flow."""
    from .flows import integrate_fundamental
    from .paths import FlowPath

    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SchemaError(f"field {name!r} must be a path spec with a 'kind'")
    kind = spec["kind"]
    if kind == "rotation":
        return rotation_path(n, interval)
    if kind == "coefficient":
        fun = _matrix_fun(spec.get("coefficient"), 2 * n, f"{name}.coefficient")
        cells = spec.get("cells", 1024)
        path = CoefficientPath.from_callable(fun, interval, 2 * n)
        return FlowPath(integrate_fundamental(path, _as_int(cells, f"{name}.cells", 2)))
    raise SchemaError(f"field {name!r} has unknown path kind {kind!r}")


# ---------------------------------------------------------------------------
# problem builders (validated payload -> engine objects)
# ---------------------------------------------------------------------------


def build_pair_problem(pf):
    """clm / rs: (reference frame, moving leg) in the base space."""
    from .paths import FlowLeg, pair_against_constant

    p = pf.payload
    n = _as_int(_need(p, "n", pf.command), "n")
    interval = _as_interval(_need(p, "interval", pf.command), "interval")
    psi = _as_path(_need(p, "path", pf.command), n, interval, "path")
    seed = _as_frame(p.get("seed", "dirichlet"), n, "seed")
    ref = _as_frame(p.get("reference", "dirichlet"), n, "reference")
    return pair_against_constant(ref, FlowLeg(psi, seed))


def build_cz_problem(pf):
    p = pf.payload
    n = _as_int(_need(p, "n", pf.command), "n")
    interval = _as_interval(_need(p, "interval", pf.command), "interval")
    return _as_path(_need(p, "path", pf.command), n, interval, "path")


def build_frames(pf, names):
    p = pf.payload
    n = _as_int(_need(p, "n", pf.command), "n")
    return n, [_as_frame(_need(p, name, pf.command), n, name) for name in names]


def build_flow_problem(pf):
    p = pf.payload
    n = _as_int(_need(p, "n", pf.command), "n")
    interval = _as_interval(_need(p, "interval", pf.command), "interval")
    fun = _matrix_fun(_need(p, "coefficient", pf.command), 2 * n, "coefficient")
    cells = _as_int(p.get("cells", 1024), "cells", 2)
    return CoefficientPath.from_callable(fun, interval, 2 * n), cells


def build_morse_problem(pf):
    p = pf.payload
    n = _as_int(_need(p, "n", pf.command), "n")
    T = _as_float(_need(p, "T", pf.command), "T")
    P = _matrix_fun(_need(p, "P", pf.command), n, "P")
    Q = _matrix_fun(p.get("Q", [[0.0] * n] * n), n, "Q", symmetric=False)
    R = _matrix_fun(_need(p, "R", pf.command), n, "R")
    bc_name = _need(p, "bc", pf.command)
    if bc_name not in ("dirichlet", "neumann", "periodic"):
        raise SchemaError(f"field 'bc' must be dirichlet/neumann/periodic, got {bc_name!r}")
    ms = MorseSturmSystem(P=P, Q=Q, R=R, T=T, n=n)
    bc = getattr(BoundaryCondition, bc_name)(n)
    cells = _as_int(p.get("cells", 48), "cells", 2)
    return ms, bc, cells


def build_spectral_problem(pf):
    p = pf.payload
    n = _as_int(_need(p, "n", pf.command), "n")
    T = _as_float(_need(p, "T", pf.command), "T")
    C0 = _matrix_fun(_need(p, "start", pf.command), 2 * n, "start")
    C1 = _matrix_fun(_need(p, "end", pf.command), 2 * n, "end")
    bspec = _need(p, "boundary", pf.command)
    if isinstance(bspec, str) and bspec == "diagonal":
        from .paths import diagonal_frame
        from .symplectic import standard_space

        L = diagonal_frame(standard_space(n))
    elif isinstance(bspec, str) and bspec == "dirichlet-pair":
        from .paths import pair_frame

        L = pair_frame(horizontal_frame(n), horizontal_frame(n))
    else:
        L = as_matrix(bspec, "boundary", (4 * n, 2 * n))

    def coeff(s, t):
        return (1.0 - s) * C0(t) + s * C1(t)

    cells = _as_int(p.get("cells", 48), "cells", 8)
    return OperatorFamily(coeff, n, T, L), cells


def build_focal_problem(pf):
    from .applications import FocalSetup

    p = pf.payload
    n = _as_int(_need(p, "n", pf.command), "n")
    interval = _as_interval(_need(p, "interval", pf.command), "interval")
    G = as_matrix(_need(p, "metric", pf.command), "metric", (n, n), symmetric=True)
    tangent = np.asarray(_need(p, "tangent", pf.command), dtype=float).reshape(n, -1)
    shape = p.get("shape")
    shape = None if shape is None else as_matrix(shape, "shape", (n, n))
    setup = FocalSetup(G, tangent, shape)
    R = _matrix_fun(_need(p, "curvature", pf.command), n, "curvature", symmetric=False)
    second = None
    if "second_tangent" in p:
        st = np.asarray(p["second_tangent"], dtype=float).reshape(n, -1)
        ss = p.get("second_shape")
        ss = None if ss is None else as_matrix(ss, "second_shape", (n, n))
        second = FocalSetup(G, st, ss)
    cells = _as_int(p.get("cells", 512), "cells", 2)
    return setup, R, interval, second, cells


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def _g17(x):
    return format(float(x), ".17g")


def plain(obj):
    """Recursively convert reports and numpy objects to JSON-ready values."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [plain(row) for row in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if is_dataclass(obj):
        return {f.name: plain(getattr(obj, f.name)) for f in dc_fields(obj)
                if not f.name.startswith("_")}
    return str(obj)


def serialize_problem(pf):
    """Canonical JSON bytes of a problem (the normalize of round-tripping)."""
    record = {"schema": SCHEMA_VERSION, "command": pf.command}
    record.update(pf.payload)
    return normalize(record)


def normalize(record):
    """Canonical JSON bytes: sorted keys, newline-terminated."""
    return (json.dumps(plain(record), sort_keys=True, indent=2,
                       ensure_ascii=False) + "\n").encode("utf-8")


def emit(record, fmt, csv_columns=None, csv_rows=None):
    """Render a record to bytes.

    JSON mode serializes the whole record with sorted keys. CSV mode writes
    ``csv_columns`` as header and ``csv_rows`` (lists aligned with the
    columns) with floats at 17 significant digits; scalar records fall back
    to a two-column name,value table in sorted-key order.
    """
    if fmt == "json":
        return normalize(record)
    if fmt != "csv":
        raise SchemaError(f"unknown output format {fmt!r}")
    out = io.StringIO()
    if csv_columns is not None:
        out.write(",".join(csv_columns) + "\n")
        for row in csv_rows:
            out.write(",".join(_csv_cell(v) for v in row) + "\n")
    else:
        flat = plain(record)
        out.write("field,value\n")
        for key in sorted(flat):
            out.write(f"{key},{_csv_cell(flat[key])}\n")
    return out.getvalue().encode("utf-8")


def _csv_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _g17(v)
    if isinstance(v, (list, dict)):
        return json.dumps(plain(v), sort_keys=True).replace(",", ";")
    return str(v)


def atomic_write(path, data):
    """Write bytes to path through a same-directory temp file and rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sympsturm-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
