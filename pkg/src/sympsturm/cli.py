"""Command-line front end.

One dispatcher, eleven subcommands, three exit codes: 0 for success, 1 for
a failed verdict (a counterexample candidate), 2 for input or numerical
resolution errors. Problem files are JSON (see serialize); artifacts are
written atomically and identical inputs with the same seed produce
byte-identical output.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import serialize
from .errors import SchemaError, SympsturmError
from .flows import discrete_morse_index, integrate_fundamental
from .indices import clm_index, cz_index, hormander_index, rs_index, triple_index
from .serialize import atomic_write, emit, parse_problem
from .spectral import spectral_flow
from .suites import SUITES, run_suite, summarize
from .symplectic import standard_space

log = logging.getLogger("sympsturm")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sympsturm",
        description="Intersection indices, spectral flow, and Sturm-type "
                    "theorem checks for linear Hamiltonian systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, needs_input=True):
        p = sub.add_parser(name, help=help_text)
        if needs_input:
            p.add_argument("--input", default="-", metavar="FILE",
                           help="problem file (JSON), '-' for stdin")
        p.add_argument("--output", metavar="FILE", help="write the full report here")
        p.add_argument("--format", choices=("csv", "json"), default="json",
                       help="artifact format (default json)")
        p.add_argument("--tol", type=float, default=None,
                       help="override the defect/drift tolerance where one applies")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized internals")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel trial processes (verify only)")
        p.add_argument("--grid", type=int, default=None,
                       help="override the grid/cell count")
        return p

    add("clm", "CLM index of psi(t)L against a fixed reference")
    add("rs", "Robbin-Salamon index of psi(t)L against a fixed reference")
    add("cz", "Conley-Zehnder index of a symplectic path")
    add("triple", "triple index of three Lagrangian frames")
    add("hormander", "Hormander index of four Lagrangian frames")
    add("flow", "integrate a fundamental solution and report its quality")
    add("morse", "discrete Morse index of a Morse-Sturm system")
    add("spectral-flow", "spectral flow of a discretized operator family")

    p = add("verify", "run a seeded randomized theorem suite", needs_input=False)
    p.add_argument("--theorem", required=True,
                   choices=sorted(SUITES) + ["all"], help="suite name")
    p.add_argument("--trials", type=int, default=50, help="number of seeded trials")
    p.add_argument("--dim", type=int, default=None, help="cap on the half-dimension n")

    p = add("kepler", "first conjugate point along a Kepler orbit", needs_input=False)
    p.add_argument("--h", type=float, default=None, help="orbit energy (h < 0)")
    p.add_argument("--e", type=float, default=None, help="eccentricity in [0, 1)")
    p.add_argument("--input", default=None, metavar="FILE",
                   help="problem file with h and e (alternative to flags)")

    add("focal", "conjugate/focal-point index comparison along a geodesic")
    return parser


def main(argv=None):
    level = os.environ.get("SYMPSTURM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except SympsturmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args):
    handler = {
        "clm": _run_pair_index,
        "rs": _run_pair_index,
        "cz": _run_cz,
        "triple": _run_triple,
        "hormander": _run_hormander,
        "flow": _run_flow,
        "morse": _run_morse,
        "spectral-flow": _run_spectral,
        "verify": _run_verify,
        "kepler": _run_kepler,
        "focal": _run_focal,
    }[args.command]
    return handler(args)


def _write_artifact(args, record, csv_columns=None, csv_rows=None):
    if args.output:
        data = emit(record, args.format, csv_columns=csv_columns, csv_rows=csv_rows)
        atomic_write(args.output, data)
        log.info("wrote %s (%d bytes)", args.output, len(data))


def _run_pair_index(args):
    pf = parse_problem(args.input)
    pair = serialize.build_pair_problem(pf)
    fun = clm_index if args.command == "clm" else rs_index
    report = fun(pair, grid=args.grid)
    value = report.value
    print(int(value) if float(value).is_integer() else value)
    _write_artifact(args, {"command": args.command, "report": report})
    return 0


def _run_cz(args):
    pf = parse_problem(args.input)
    psi = serialize.build_cz_problem(pf)
    report = cz_index(psi, grid=args.grid)
    print(report.value)
    _write_artifact(args, {"command": "cz", "report": report})
    return 0


def _run_triple(args):
    pf = parse_problem(args.input)
    n, (alpha, beta, gamma) = serialize.build_frames(pf, ("alpha", "beta", "gamma"))
    rng = np.random.default_rng(args.seed)
    report = triple_index(standard_space(n), alpha, beta, gamma, rng=rng)
    print(report.value)
    _write_artifact(args, {"command": "triple", "report": report})
    return 0


def _run_hormander(args):
    pf = parse_problem(args.input)
    n, (l1, l2, m1, m2) = serialize.build_frames(pf, ("l1", "l2", "m1", "m2"))
    report = hormander_index(standard_space(n), l1, l2, m1, m2)
    print(report.value)
    _write_artifact(args, {"command": "hormander", "report": report})
    return 0


def _run_flow(args):
    pf = parse_problem(args.input)
    path, cells = serialize.build_flow_problem(pf)
    if args.grid:
        cells = args.grid
    kwargs = {} if args.tol is None else {"defect_tol": args.tol}
    sol = integrate_fundamental(path, cells, **kwargs)
    record = {
        "command": "flow",
        "interval": list(sol.interval),
        "cells": cells,
        "monodromy": sol.monodromy,
        "error_estimate": sol.error_estimate,
        "symplectic_defect": sol.symplectic_defect,
    }
    print(f"cells={cells} defect={sol.symplectic_defect:.3e} "
          f"error={sol.error_estimate:.3e}")
    dim = sol.samples.shape[1]
    columns = ["t"] + [f"psi_{i + 1}{j + 1}" for i in range(dim) for j in range(dim)]
    rows = [[t] + list(M.reshape(-1)) for t, M in zip(sol.grid, sol.samples)]
    _write_artifact(args, record, csv_columns=columns, csv_rows=rows)
    return 0


def _run_morse(args):
    pf = parse_problem(args.input)
    ms, bc, cells = serialize.build_morse_problem(pf)
    if args.grid:
        cells = args.grid
    value = discrete_morse_index(ms, bc, N=cells)
    print(value)
    _write_artifact(args, {"command": "morse", "morse_index": value,
                           "cells": cells, "bc": pf.payload.get("bc")})
    return 0


def _run_spectral(args):
    pf = parse_problem(args.input)
    family, cells = serialize.build_spectral_problem(pf)
    if args.grid:
        cells = args.grid
    report = spectral_flow(family, N=cells)
    print(report.value)
    _write_artifact(args, {"command": "spectral-flow", "report": report})
    return 0


def _run_verify(args):
    names = sorted(SUITES) if args.theorem == "all" else [args.theorem]
    all_reports = {}
    summaries = []
    for name in names:
        reports = run_suite(name, args.trials, args.seed,
                            n_max=args.dim, jobs=args.jobs)
        all_reports[name] = reports
        summaries.append(summarize(reports))

    columns = ["theorem", "trials", "passes", "skips", "failures"]
    lines = emit({}, "csv", csv_columns=columns,
                 csv_rows=[[s[c] for c in columns] for s in summaries])
    sys.stdout.write(lines.decode("utf-8"))

    if args.format == "json":
        record = {"command": "verify", "seed": args.seed, "trials": args.trials,
                  "suites": all_reports}
        _write_artifact(args, record)
    else:
        _write_artifact(args, {}, csv_columns=columns,
                        csv_rows=[[s[c] for c in columns] for s in summaries])
    return 0 if all(s["failures"] == 0 for s in summaries) else 1


def _run_kepler(args):
    from .applications import first_conjugate_distance, jacobi_field, kepler_orbit

    h, e = args.h, args.e
    if args.input:
        pf = parse_problem(args.input)
        h = serialize._as_float(pf.payload.get("h", h), "h")
        e = serialize._as_float(pf.payload.get("e", e), "e")
    if h is None or e is None:
        raise SchemaError("kepler needs --h and --e (or an input file)")
    kwargs = {} if args.tol is None else {"drift_tol": args.tol}
    orbit = kepler_orbit(h, e, **kwargs)
    report = first_conjugate_distance(orbit)
    payload = {
        "command": "kepler",
        "h": orbit.h,
        "e": orbit.e,
        "s_star": report.s_star,
        "bound": report.bound,
        "verdict": report.verdict,
        "energy_drift": orbit.energy_drift,
        "jacobi_period": orbit.jacobi_period,
    }
    sys.stdout.write(emit(payload, "json").decode("utf-8"))
    if args.output:
        J = jacobi_field(orbit, orbit.s)
        columns = ["t", "r", "s", "K", "J"]
        rows = list(zip(orbit.t, orbit.r, orbit.s, orbit.curvature, J))
        _write_artifact(args, payload, csv_columns=columns, csv_rows=rows)
    return 0 if report.verdict else 1


def _run_focal(args):
    from .applications import conjugate_focal_comparison

    pf = parse_problem(args.input)
    setup, R, interval, second, cells = serialize.build_focal_problem(pf)
    if args.grid:
        cells = args.grid
    report = conjugate_focal_comparison(setup, R, interval, second=second, N=cells)
    print("pass" if report.verdict else "FAIL",
          f"left={report.left} right={report.right}")
    _write_artifact(args, {"command": "focal", "report": report})
    return 0 if report.verdict else 1


if __name__ == "__main__":
    sys.exit(main())
