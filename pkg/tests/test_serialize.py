"""Problem-file schema, builders, and deterministic emission."""

import io
import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sympsturm.errors import SchemaError
from sympsturm.indices import clm_index, cz_index
from sympsturm.serialize import (
    SCHEMA_VERSION,
    as_matrix,
    atomic_write,
    build_cz_problem,
    build_flow_problem,
    build_focal_problem,
    build_frames,
    build_morse_problem,
    build_pair_problem,
    build_spectral_problem,
    emit,
    normalize,
    parse_problem,
    plain,
    serialize_problem,
)


def record(command, **payload):
    rec = {"schema": SCHEMA_VERSION, "command": command}
    rec.update(payload)
    return rec


def parse(command, **payload):
    return parse_problem(io.StringIO(json.dumps(record(command, **payload))))


# ---------------------------------------------------------------------------
# parsing and schema validation
# ---------------------------------------------------------------------------


def test_parse_problem_from_path_filelike_and_stdin(tmp_path, monkeypatch):
    text = json.dumps(record("kepler", h=-0.5, e=0.0))

    path = tmp_path / "problem.json"
    path.write_text(text, encoding="utf-8")
    pf = parse_problem(str(path))
    assert pf.command == "kepler"
    assert pf.payload == {"h": -0.5, "e": 0.0}

    assert parse_problem(io.StringIO(text)).payload == pf.payload

    monkeypatch.setattr("sys.stdin", io.StringIO(text))
    assert parse_problem("-").payload == pf.payload


def test_parse_problem_reports_json_position():
    with pytest.raises(SchemaError, match=r"invalid JSON at line 2 column"):
        parse_problem(io.StringIO('{\n  "schema": }\n'))


def test_schema_tag_is_checked():
    with pytest.raises(SchemaError, match="must be a JSON object"):
        parse_problem(io.StringIO("[1, 2]"))
    with pytest.raises(SchemaError, match="unsupported schema 'sympsturm/0'"):
        parse_problem(io.StringIO(json.dumps({"schema": "sympsturm/0"})))
    with pytest.raises(SchemaError, match="unsupported schema None"):
        parse_problem(io.StringIO(json.dumps({"command": "clm"})))


def test_unknown_command_and_fields_are_named():
    with pytest.raises(SchemaError, match="unknown command 'maslov'"):
        parse("maslov")
    # Offending field names appear sorted in the message.
    with pytest.raises(SchemaError, match=r"unknown field\(s\) \['apex', 'zz'\]"):
        parse("kepler", h=-0.5, e=0.0, zz=1, apex=2)


def test_non_finite_numbers_are_rejected():
    text = '{"schema": "sympsturm/1", "command": "kepler", "h": NaN, "e": 0.0}'
    with pytest.raises(SchemaError, match="non-finite number 'NaN'"):
        parse_problem(io.StringIO(text))
    with pytest.raises(SchemaError, match="non-finite number '-Infinity'"):
        parse_problem(io.StringIO(text.replace("NaN", "-Infinity")))
    # Direct dict validation names the nested location.
    from sympsturm.serialize import validate_problem

    rec = record("morse", n=1, T=1.0, P=[[1.0]], R=[[float("nan")]], bc="dirichlet")
    with pytest.raises(SchemaError, match=r"non-finite value at payload\.R\[0\]\[0\]"):
        validate_problem(rec)


def test_as_matrix_names_the_offender():
    with pytest.raises(SchemaError, match="'M' is not a rectangular numeric array"):
        as_matrix([[1.0], [2.0, 3.0]], "M")
    with pytest.raises(SchemaError, match="'v' must be two-dimensional"):
        as_matrix([1.0, 2.0], "v")
    with pytest.raises(SchemaError, match=r"'M' must have shape \(3, 3\), got \(2, 2\)"):
        as_matrix([[1.0, 0.0], [0.0, 1.0]], "M", shape=(3, 3))
    with pytest.raises(SchemaError, match="'Q' is not symmetric"):
        as_matrix([[0.0, 1.0], [2.0, 0.0]], "Q", symmetric=True)
    with pytest.raises(SchemaError, match="'M' contains non-finite entries"):
        as_matrix([[float("inf")]], "M")
    M = as_matrix([[0.0, 1.0], [1.0, 0.0]], "M", shape=(2, 2), symmetric=True)
    assert M.dtype == float


def test_interval_and_scalar_field_errors():
    # Intervals are validated when the builder reads them, not at parse time.
    pf = parse("cz", n=1, interval=[2.0, 1.0], path="rotation")
    with pytest.raises(SchemaError, match="'interval' must satisfy a < b"):
        build_cz_problem(pf)
    with pytest.raises(SchemaError, match="'n' must be an integer >= 1"):
        build_cz_problem(parse("cz", n=0, interval=[0.0, 1.0], path="rotation"))
    with pytest.raises(SchemaError, match="'n' must be an integer >= 1"):
        build_cz_problem(parse("cz", n=True, interval=[0.0, 1.0], path="rotation"))
    with pytest.raises(SchemaError, match="requires field 'path'"):
        build_cz_problem(parse("cz", n=1, interval=[0.0, 1.0]))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def test_build_pair_problem_rotation_matches_known_index():
    pf = parse("clm", n=1, interval=[0.0, float(np.pi)], path="rotation")
    pair = build_pair_problem(pf)
    assert clm_index(pair).value == 1


def test_build_cz_problem_rotation():
    pf = parse("cz", n=1, interval=[0.0, 2.0 * float(np.pi)], path="rotation")
    assert cz_index(build_cz_problem(pf)).value == 2


def test_build_frames_accepts_named_kinds_and_matrices():
    pf = parse(
        "triple",
        n=1,
        alpha="dirichlet",
        beta="neumann",
        gamma={"kind": "frame", "matrix": [[1.0], [1.0]]},
    )
    n, frames = build_frames(pf, ["alpha", "beta", "gamma"])
    assert n == 1
    assert frames[0].shape == (2, 1)
    assert np.allclose(frames[2], [[1.0], [1.0]])
    bad = parse("triple", n=1, alpha="robin", beta="dirichlet", gamma="neumann")
    with pytest.raises(SchemaError, match="unknown frame kind 'robin'"):
        build_frames(bad, ["alpha", "beta", "gamma"])


def test_coefficient_specs_polynomial_samples_and_shorthand():
    A = [[1.0, 0.0], [0.0, 1.0]]
    B = [[0.0, 1.0], [1.0, 0.0]]

    poly = parse(
        "flow",
        n=1,
        interval=[0.0, 1.0],
        coefficient={"type": "polynomial", "coefficients": [A, B]},
    )
    path, cells = build_flow_problem(poly)
    assert cells == 1024
    assert np.allclose(path.fun(0.5), np.array(A) + 0.5 * np.array(B))

    samp = parse(
        "flow",
        n=1,
        interval=[0.0, 1.0],
        coefficient={"type": "samples", "times": [0.0, 1.0],
                     "matrices": [[[0.0, 0.0], [0.0, 0.0]], A]},
        cells=64,
    )
    path, cells = build_flow_problem(samp)
    assert cells == 64
    assert np.allclose(path.fun(0.5), 0.5 * np.array(A))

    # A bare nested list is shorthand for a constant coefficient.
    bare = parse("flow", n=1, interval=[0.0, 1.0], coefficient=B)
    path, _ = build_flow_problem(bare)
    assert np.allclose(path.fun(0.123), B)


def test_coefficient_spec_errors():
    base = dict(n=1, interval=[0.0, 1.0])
    with pytest.raises(SchemaError, match="unknown coefficient type 'fourier'"):
        build_flow_problem(parse("flow", coefficient={"type": "fourier"}, **base))
    with pytest.raises(SchemaError, match="nonempty 'coefficients' list"):
        build_flow_problem(
            parse("flow", coefficient={"type": "polynomial", "coefficients": []}, **base)
        )
    with pytest.raises(SchemaError, match="matching 'times' and 'matrices'"):
        build_flow_problem(
            parse("flow", coefficient={"type": "samples", "times": [0.0],
                                       "matrices": []}, **base)
        )
    with pytest.raises(SchemaError, match="coefficient spec with a 'type'"):
        build_flow_problem(parse("flow", coefficient="rotation", **base))
    # Asymmetric coefficient matrices are rejected at the schema layer.
    with pytest.raises(SchemaError, match=r"'coefficient\.matrix' is not symmetric"):
        build_flow_problem(
            parse("flow", coefficient=[[0.0, 1.0], [2.0, 0.0]], **base)
        )


def test_build_morse_problem():
    pf = parse(
        "morse",
        n=1,
        T=3.5 * float(np.pi),
        P=[[1.0]],
        R=[[-1.0]],
        bc="dirichlet",
        cells=96,
    )
    ms, bc, cells = build_morse_problem(pf)
    assert ms.n == 1
    assert np.allclose(ms.R(0.7), [[-1.0]])
    assert np.allclose(ms.Q(0.0), [[0.0]])
    assert cells == 96

    bad = parse("morse", n=1, T=1.0, P=[[1.0]], R=[[0.0]], bc="robin")
    with pytest.raises(SchemaError, match="must be dirichlet/neumann/periodic"):
        build_morse_problem(bad)


def test_build_spectral_problem_blends_endpoints():
    C0 = [[0.5, 0.0], [0.0, 0.5]]
    C1 = [[-1.5, 0.0], [0.0, -1.5]]
    pf = parse(
        "spectral-flow",
        n=1,
        T=float(np.pi),
        boundary="dirichlet-pair",
        start=C0,
        end=C1,
    )
    fam, cells = build_spectral_problem(pf)
    assert fam.L.shape == (4, 2)
    assert cells == 48
    assert np.allclose(fam.coeff(0.0, 0.3), C0)
    assert np.allclose(fam.coeff(1.0, 0.3), C1)
    assert np.allclose(fam.coeff(0.5, 0.3), 0.5 * (np.array(C0) + np.array(C1)))

    diag = parse("spectral-flow", n=1, T=1.0, boundary="diagonal", start=C0, end=C0)
    fam, _ = build_spectral_problem(diag)
    assert fam.L.shape == (4, 2)

    explicit = parse(
        "spectral-flow",
        n=1,
        T=1.0,
        boundary=[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 1.0]],
        start=C0,
        end=C0,
    )
    fam, _ = build_spectral_problem(explicit)
    assert fam.L.shape == (4, 2)

    bad = parse("spectral-flow", n=1, T=1.0, boundary=[[1.0, 0.0]], start=C0, end=C0)
    with pytest.raises(SchemaError, match=r"'boundary' must have shape \(4, 2\)"):
        build_spectral_problem(bad)


def test_build_focal_problem():
    pf = parse(
        "focal",
        n=2,
        interval=[0.0, 3.0],
        metric=[[1.0, 0.0], [0.0, 1.0]],
        tangent=[[1.0], [0.0]],
        curvature=[[-1.0, 0.0], [0.0, -1.0]],
    )
    setup, R, interval, second, cells = build_focal_problem(pf)
    assert setup.tangent.shape == (2, 1)
    assert np.allclose(R(1.2), -np.eye(2))
    assert interval == (0.0, 3.0)
    assert second is None
    assert cells == 512

    pf2 = parse(
        "focal",
        n=2,
        interval=[0.0, 3.0],
        metric=[[1.0, 0.0], [0.0, 1.0]],
        tangent=[[1.0], [0.0]],
        second_tangent=[[0.0], [1.0]],
        curvature=[[-1.0, 0.0], [0.0, -1.0]],
        cells=128,
    )
    _, _, _, second, cells = build_focal_problem(pf2)
    assert second is not None
    assert np.allclose(second.tangent, [[0.0], [1.0]])
    assert cells == 128


# ---------------------------------------------------------------------------
# canonical emission
# ---------------------------------------------------------------------------


def test_plain_flattens_reports_and_numpy():
    from sympsturm.paths import rotation_path, pair_against_constant, FlowLeg
    from sympsturm.symplectic import horizontal_frame

    pair = pair_against_constant(
        horizontal_frame(1), FlowLeg(rotation_path(1, (0.0, np.pi)), horizontal_frame(1))
    )
    flat = plain(clm_index(pair))
    assert isinstance(flat, dict)
    assert flat["value"] == 1

    assert plain(np.float64(0.25)) == 0.25
    assert plain(np.int64(3)) == 3
    assert plain(np.bool_(True)) is True
    assert plain(np.arange(4).reshape(2, 2)) == [[0, 1], [2, 3]]
    assert plain((1, "a", None)) == [1, "a", None]
    assert plain({2: np.float32(0.5)}) == {"2": 0.5}


def test_normalize_is_canonical():
    data = normalize({"b": 1.0, "a": [2, 3], "c": {"y": False, "x": "s"}})
    text = data.decode("utf-8")
    assert text.endswith("\n") and not text.endswith("\n\n")
    assert text == json.dumps(
        {"a": [2, 3], "b": 1.0, "c": {"x": "s", "y": False}},
        sort_keys=True, indent=2,
    ) + "\n"


@settings(max_examples=50, deadline=None)
@given(
    st.dictionaries(
        st.text(st.characters(codec="ascii", categories=("L", "N")), min_size=1, max_size=8),
        st.one_of(
            st.booleans(),
            st.integers(-1000, 1000),
            st.floats(allow_nan=False, allow_infinity=False, width=32),
            st.text(max_size=12),
        ),
        max_size=8,
    )
)
def test_normalize_ignores_key_order(d):
    shuffled = dict(reversed(list(d.items())))
    assert normalize(d) == normalize(shuffled)
    assert json.loads(normalize(d)) == plain(d)


def test_serialize_problem_round_trips():
    pf = parse("morse", n=2, T=2.0, P=[[1.0, 0.0], [0.0, 2.0]],
               R=[[0.0, 0.0], [0.0, 0.0]], bc="neumann")
    data = serialize_problem(pf)
    again = parse_problem(io.StringIO(data.decode("utf-8")))
    assert again.command == pf.command
    assert again.payload == pf.payload
    assert serialize_problem(again) == data


def test_emit_json_and_csv():
    rec = {"value": 3, "ok": True, "err": 0.1, "tags": [1, 2]}
    assert emit(rec, "json") == normalize(rec)

    csv = emit(rec, "csv").decode("utf-8")
    lines = csv.strip().split("\n")
    assert lines[0] == "field,value"
    # Sorted keys; floats at 17 significant digits; bools lowercase; lists
    # as JSON with semicolons so the cell stays comma-free.
    assert lines[1] == "err,0.10000000000000001"
    assert lines[2] == "ok,true"
    assert lines[3] == "tags,[1; 2]"
    assert lines[4] == "value,3"

    tab = emit({}, "csv", csv_columns=["a", "b"], csv_rows=[[1.5, False], [2, "x"]])
    assert tab.decode("utf-8") == "a,b\n1.5,false\n2,x\n"

    with pytest.raises(SchemaError, match="unknown output format 'yaml'"):
        emit(rec, "yaml")


def test_emit_is_deterministic():
    rec = {"z": 0.3333333333333333, "a": {"k": [1.0, 2.0]}}
    assert emit(rec, "json") == emit(dict(reversed(list(rec.items()))), "json")
    assert emit(rec, "csv") == emit(rec, "csv")


def test_atomic_write(tmp_path):
    target = tmp_path / "out.json"
    atomic_write(str(target), b"first\n")
    assert target.read_bytes() == b"first\n"
    atomic_write(str(target), b"second\n")
    assert target.read_bytes() == b"second\n"
    leftovers = [p for p in os.listdir(tmp_path) if p.startswith(".sympsturm-")]
    assert leftovers == []
