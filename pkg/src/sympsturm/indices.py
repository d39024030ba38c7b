"""Intersection indices of Lagrangian path pairs.

Conventions (fixed throughout the package):

* The engine's crossing form of a pair (ell_1, ell_2) at a crossing instant
  is Gamma(ell_2, ell_1; t)[v] = Q_{ell_2}[v] - Q_{ell_1}[v], the difference
  of the chart derivatives of the two legs on v in the intersection. For a
  leg moved by a flow with generator X the chart derivative is exactly
  omega(v, X v), independently of the chart; legs without a generator use
  Richardson-extrapolated finite differences.

* iota_CLM(ell_1, ell_2; [a,b]) = n_+(Gamma(a)) + sum_{a<t<b} sgn(Gamma(t))
  - n_-(Gamma(b)), with Gamma = Gamma(ell_2, ell_1; .).

* iota_RS(ell_1, ell_2; [a,b]) = (1/2) sgn(G(a)) + sum interior sgn(G(t))
  + (1/2) sgn(G(b)) with G = Gamma(ell_1, ell_2; .) = -Gamma(ell_2, ell_1).
  Hence iota_CLM(l1, l2) = iota_RS(l2, l1) - (h(b) - h(a))/2 where h =
  dim(l1 cap l2).

* The Conley-Zehnder index is iota_CLM(Delta, Gr psi) in the double space,
  the L-Maslov index is iota_CLM(L x L, Gr psi).

Crossings are located on a grid through the normalized determinant
indicator of the orthonormalized joint frame (the product of cosines of
principal angles, so its zeros are exactly the nontrivial intersections),
refined by bracketing for sign changes and bounded minimization for
touch points, and the whole detection is re-run on a doubled grid until two
consecutive levels agree.

Degenerate crossings are resolved by rotating the second leg with e^{eps J}
over a fixed budget of eps values; the result is accepted only when the
endpoint intersection dimensions match the unperturbed pair, which is the
hypothesis under which the index is invariant. Identically-intersecting
stretches are accepted only when they span the whole interval and the
intersection subspace is certified constant with vanishing crossing form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import (
    ConvergenceError,
    DegenerateCrossingError,
    FrameError,
    IdenticallyDegenerateError,
    RefinementError,
)
from .paths import (
    ConstantLeg,
    FlowLeg,
    FlowPath,
    GraphFlowPath,
    IteratedPath,
    LagrangianPath,
    PairPath,
    SymplecticPath,
    diagonal_frame,
    graph_leg,
    omega_graph_frame,
    pair_against_constant,
    pair_frame,
)
from .symplectic import (
    inertia,
    intersection,
    orthonormal_columns,
    reduce_by_isotropic,
    subspace_sum,
)

IND_ZERO = 1e-9          # grid indicator values below this count as exact zeros
TOUCH_SCAN = 1e-3        # local minima below this get refined as touch candidates
TOUCH_NOISE = 1e-12      # numerical noise floor of the refined indicator minimum
DIM_TOL = 1e-6           # singular values below this span the crossing intersection
ENDPOINT_DIM_TOL = 1e-8  # singular-value cut for the exact endpoint evaluations
GRAM_TOL = 1e-10         # inertia threshold for generator-exact crossing forms
GRAM_TOL_FD = 1e-7       # inertia threshold for finite-difference crossing forms
SEGMENT_FORM_TOL = 1e-8  # max |gram| certified as a vanishing segment form
SEGMENT_ANGLE_TOL = 1e-7 # subspace constancy tolerance along a segment
PERTURBATION_BUDGET = (1e-4, 1e-5, 1e-6)


@dataclass(eq=False)
class MappedLeg(LagrangianPath):
    """M @ ell(t) for a constant symplectic M."""

    inner: LagrangianPath
    M: np.ndarray

    def __post_init__(self):
        self.space = self.inner.space
        self.interval = self.inner.interval
        self._Minv = np.linalg.inv(self.M)

    def frame(self, t):
        return self.M @ self.inner.frame(t)

    def generator(self, t):
        X = self.inner.generator(t)
        if X is None:
            return None
        return self.M @ X @ self._Minv

    def suggested_grid(self):
        return self.inner.suggested_grid()

    def restricted(self, a, b):
        return MappedLeg(self.inner.restricted(a, b), self.M)


@dataclass(eq=False)
class CrossingRecord:
    """One crossing instant with its form data and index contribution."""

    t: float
    dim: int
    location: str            # 'start' | 'interior' | 'end'
    gram: np.ndarray
    inertia: tuple           # (n_plus, n_zero, n_minus) of gram
    basis: np.ndarray
    method: str              # 'generator' | 'fd' | 'mixed'

    @property
    def signature(self):
        return self.inertia[0] - self.inertia[2]


@dataclass(eq=False)
class SegmentRecord:
    """A certified constant-intersection stretch (always the full interval)."""

    t0: float
    t1: float
    dim: int
    max_form: float


@dataclass(eq=False)
class CrossingSet:
    crossings: list
    segment: object          # SegmentRecord or None
    dim_start: int
    dim_end: int
    grid_size: int


@dataclass(eq=False)
class IndexReport:
    """An index value plus everything that went into it."""

    value: float
    kind: str
    crossings: list
    segment: object = None
    perturbation: float = None
    extras: dict = field(default_factory=dict)

    def __int__(self):
        return int(round(self.value))


# ---------------------------------------------------------------------------
# frame evaluation and the indicator
# ---------------------------------------------------------------------------


def _orthonormalize_stack(stack):
    """Batched QR with positive diagonal, continuous in the input frames."""
    Q, R = np.linalg.qr(stack)
    d = np.diagonal(R, axis1=-2, axis2=-1).copy()
    s = np.where(d < 0, -1.0, 1.0)
    return Q * s[..., None, :]


def _frames_stack(leg, ts):
    fast = _fast_node_frames(leg, ts)
    if fast is not None:
        return fast
    return np.stack([np.asarray(leg.frame(t), dtype=float) for t in ts])


def _fast_node_frames(leg, ts):
    """Batched frames when the leg rides a sampled fundamental solution."""
    if isinstance(leg, ConstantLeg):
        return np.broadcast_to(leg.seed, (len(ts),) + leg.seed.shape).copy()
    if isinstance(leg, FlowLeg) and isinstance(leg.path, FlowPath):
        sol = leg.path.sol
        if len(sol.grid) == len(ts) and np.allclose(sol.grid, ts, atol=1e-13):
            return sol.frames_at_nodes(leg.seed)
    if isinstance(leg, FlowLeg) and isinstance(leg.path, GraphFlowPath) \
            and isinstance(leg.path.inner, FlowPath):
        sol = leg.path.inner.sol
        if len(sol.grid) == len(ts) and np.allclose(sol.grid, ts, atol=1e-13):
            d = leg.path.inner.space.dim
            top = np.broadcast_to(leg.seed[:d], (len(ts), d, leg.seed.shape[1]))
            bot = np.einsum("kij,jm->kim", sol.samples, leg.seed[d:])
            return np.concatenate([top, bot], axis=1)
    return None


def _orthonormal_frame_at(leg, t):
    F = np.asarray(leg.frame(t), dtype=float)
    return _orthonormalize_stack(F[None])[0]


def _indicator_values(leg1, leg2, ts):
    Q1 = _orthonormalize_stack(_frames_stack(leg1, ts))
    Q2 = _orthonormalize_stack(_frames_stack(leg2, ts))
    joint = np.concatenate([Q1, Q2], axis=2)
    sign, logabs = np.linalg.slogdet(joint)
    vals = sign * np.exp(logabs)
    return vals, Q1, Q2


def _indicator_at(leg1, leg2, t):
    Q1 = _orthonormal_frame_at(leg1, t)
    Q2 = _orthonormal_frame_at(leg2, t)
    sign, logabs = np.linalg.slogdet(np.concatenate([Q1, Q2], axis=1))
    return sign * np.exp(logabs)


def _intersection_data(leg1, leg2, t, tol):
    """(dim, orthonormal basis) of ell_1(t) cap ell_2(t) via the joint SVD."""
    Q1 = _orthonormal_frame_at(leg1, t)
    Q2 = _orthonormal_frame_at(leg2, t)
    joint = np.concatenate([Q1, -Q2], axis=1)
    U, s, Vt = np.linalg.svd(joint)
    small = s < tol
    dim = int(np.sum(small))
    if dim == 0:
        return 0, np.zeros((Q1.shape[0], 0))
    k = Q1.shape[1]
    coeffs = Vt[-dim:, :k].T
    basis = orthonormal_columns(Q1 @ coeffs, tol=1e-10)
    if basis.shape[1] != dim:
        raise RefinementError(f"unstable intersection basis at t={t}")
    return dim, basis


# ---------------------------------------------------------------------------
# crossing forms
# ---------------------------------------------------------------------------


def _chart_derivative(leg, t0, basis, span):
    """Gram of Q_leg[v] = d/dt omega(v, w_v(t)) on the given basis.

    Exact via the leg's generator when available (omega(v, X v)); otherwise
    a Richardson-extrapolated finite difference of the chart map, one-sided
    at the interval ends.
    """
    X = leg.generator(t0)
    F = leg.space.form
    if X is not None:
        G = basis.T @ F.T @ X @ basis
        return 0.5 * (G + G.T), "generator"

    W = leg.space.J @ _orthonormal_frame_at(leg, t0)

    def chart(t):
        Ft = np.asarray(leg.frame(t), dtype=float)
        sol = np.linalg.solve(np.concatenate([Ft, W], axis=1), basis)
        w = -W @ sol[Ft.shape[1]:, :]
        return basis.T @ F.T @ w

    a, b = leg.interval
    h = 1e-5 * span
    if t0 + h > b:
        d1 = (chart(t0) - chart(t0 - h)) / h
        d2 = (chart(t0) - chart(t0 - h / 2)) / (h / 2)
        G = 2.0 * d2 - d1
    elif t0 - h < a:
        d1 = (chart(t0 + h) - chart(t0)) / h
        d2 = (chart(t0 + h / 2) - chart(t0)) / (h / 2)
        G = 2.0 * d2 - d1
    else:
        d1 = (chart(t0 + h) - chart(t0 - h)) / (2 * h)
        d2 = (chart(t0 + h / 2) - chart(t0 - h / 2)) / h
        G = (4.0 * d2 - d1) / 3.0
    return 0.5 * (G + G.T), "fd"


def crossing_form(pair, t0, basis):
    """Gamma(ell_2, ell_1; t0) = Q_{ell_2} - Q_{ell_1} on the basis columns."""
    a, b = pair.interval
    span = b - a
    G2, m2 = _chart_derivative(pair.leg2, t0, basis, span)
    G1, m1 = _chart_derivative(pair.leg1, t0, basis, span)
    method = m2 if m1 == m2 else "mixed"
    return G2 - G1, method


def _gram_tol(method):
    return GRAM_TOL if method == "generator" else GRAM_TOL_FD


def _record(pair, t0, location, dim_tol):
    dim, basis = _intersection_data(pair.leg1, pair.leg2, t0, dim_tol)
    if dim == 0:
        return None
    gram, method = crossing_form(pair, t0, basis)
    ine = inertia(gram, tol=_gram_tol(method))
    return CrossingRecord(float(t0), dim, location, gram, ine, basis, method)


# ---------------------------------------------------------------------------
# crossing detection
# ---------------------------------------------------------------------------


def _default_grid(pair):
    hints = [g for g in (pair.leg1.suggested_grid(), pair.leg2.suggested_grid()) if g]
    if hints:
        return int(np.clip(max(hints), 256, 4096))
    return 512


def _detect_raw(pair, G):
    a, b = pair.interval
    span = b - a
    ts = np.linspace(a, b, G + 1)
    vals, _, _ = _indicator_values(pair.leg1, pair.leg2, ts)
    zero = np.abs(vals) < IND_ZERO

    # maximal runs of grid zeros
    runs = []
    k = 0
    while k <= G:
        if zero[k]:
            j = k
            while j + 1 <= G and zero[j + 1]:
                j += 1
            runs.append((k, j))
            k = j + 1
        else:
            k += 1

    f = lambda t: _indicator_at(pair.leg1, pair.leg2, t)

    segment_run = None
    interior_times = []
    dead_runs = []
    for (i, j) in runs:
        if j == i:
            if 0 < i < G:
                interior_times.append(ts[i])
            continue
        if i == 0 and j == G:
            segment_run = (i, j)
            continue
        # A multi-node sub-threshold run is either a genuine constant-
        # intersection stretch or the indicator dead zone surrounding one
        # high-multiplicity crossing (the determinant vanishes to order m,
        # so its sub-threshold radius is grid-independent). The rank at the
        # nodes tells them apart.
        core = [k for k in range(i, j + 1)
                if _intersection_data(pair.leg1, pair.leg2, ts[k], DIM_TOL)[0] > 0]
        if len(core) > 1:
            raise DegenerateCrossingError(
                f"identically intersecting stretch [{ts[i]:.6g}, {ts[j]:.6g}] "
                "does not cover the interval; refine or perturb the data"
            )
        if len(core) == 1:
            if 0 < core[0] < G:
                interior_times.append(ts[core[0]])
            continue
        dead_runs.append((i, j))

    def probe_between(lo, hi, outer_sign):
        """Resolve zeros of the indicator on (lo, hi) when both ends share
        ``outer_sign``. The signed minimum is conclusive: a dip below the
        noise floor means two transversal roots (e.g. an eigenvalue pair
        colliding at 1 and splitting off the circle), a minimum at the
        noise floor is a tangency, and a positive minimum above it means
        no intersection at all, because sigma_min >= |det| for orthonormal
        joint frames."""
        res = scipy.optimize.minimize_scalar(
            lambda t: outer_sign * f(t), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-13 * max(1.0, span)},
        )
        fmin = float(res.fun)
        tm = float(res.x)
        if fmin < -TOUCH_NOISE:
            kw = dict(xtol=1e-13 * max(1.0, span), rtol=8.9e-16)
            interior_times.append(scipy.optimize.brentq(f, lo, tm, **kw))
            interior_times.append(scipy.optimize.brentq(f, tm, hi, **kw))
        elif fmin <= TOUCH_NOISE:
            interior_times.append(tm)

    for (i, j) in dead_runs:
        lo, hi = ts[max(i - 1, 0)], ts[min(j + 1, G)]
        if i > 0 and j < G and np.sign(vals[i - 1]) != np.sign(vals[j + 1]):
            interior_times.append(scipy.optimize.brentq(
                f, lo, hi, xtol=1e-13 * max(1.0, span), rtol=8.9e-16
            ))
            continue
        outer = np.sign(vals[i - 1]) if i > 0 else np.sign(vals[j + 1])
        probe_between(lo, hi, outer)

    if segment_run is None:
        # sign changes between consecutive nonzero nodes
        for k in range(G):
            if zero[k] or zero[k + 1]:
                continue
            if np.sign(vals[k]) != np.sign(vals[k + 1]):
                t0 = scipy.optimize.brentq(
                    f, ts[k], ts[k + 1], xtol=1e-13 * max(1.0, span), rtol=8.9e-16
                )
                interior_times.append(t0)
        # touch candidates: interior local minima of |ind|
        av = np.abs(vals)
        for k in range(1, G):
            if zero[k - 1] or zero[k] or zero[k + 1]:
                continue
            if av[k] < TOUCH_SCAN and av[k] <= av[k - 1] and av[k] <= av[k + 1]:
                if np.sign(vals[k - 1]) != np.sign(vals[k]) or np.sign(vals[k]) != np.sign(vals[k + 1]):
                    continue  # already handled as a sign change
                probe_between(ts[k - 1], ts[k + 1], np.sign(vals[k]))

    # clip times at the ends, then merge brentq duplicates from overlapping
    # probe brackets (well below the doubling-compatibility tolerance)
    edge = 1e-9 * max(1.0, span)
    merged = []
    for t in sorted(t for t in interior_times if a + edge < t < b - edge):
        if not merged or t - merged[-1] > 1e-8 * max(1.0, span):
            merged.append(t)
    interior_times = merged

    return ts, vals, segment_run, interior_times


def _detection_compatible(d1, d2, span):
    ts1, _, seg1, int1 = d1
    ts2, _, seg2, int2 = d2
    if (seg1 is None) != (seg2 is None):
        return False
    if len(int1) != len(int2):
        return False
    return all(abs(u - v) <= 1e-7 * max(1.0, span) for u, v in zip(int1, int2))


def detect_crossings(pair, grid=None, max_doublings=3):
    """Locate all crossings of the pair, validated on a doubled grid.

    Returns a CrossingSet; fully-degenerate pairs and partial constant-
    intersection stretches raise (see module docstring).
    """
    G = grid or _default_grid(pair)
    a, b = pair.interval
    span = b - a

    prev = _detect_raw(pair, G)
    level = 0
    while True:
        cur = _detect_raw(pair, G * 2 ** (level + 1))
        if _detection_compatible(prev, cur, span):
            break
        level += 1
        prev = cur
        if level >= max_doublings:
            raise RefinementError(
                f"crossing detection did not stabilize after {max_doublings} grid doublings"
            )
    ts, vals, segment_run, interior_times = cur

    dim_start, basis_start = _intersection_data(pair.leg1, pair.leg2, a, ENDPOINT_DIM_TOL)
    dim_end, basis_end = _intersection_data(pair.leg1, pair.leg2, b, ENDPOINT_DIM_TOL)

    records = []
    if dim_start > 0:
        gram, method = crossing_form(pair, a, basis_start)
        records.append(CrossingRecord(a, dim_start, "start", gram,
                                      inertia(gram, tol=_gram_tol(method)), basis_start, method))
    for t0 in interior_times:
        rec = _record(pair, t0, "interior", DIM_TOL)
        if rec is None:
            raise RefinementError(f"crossing at t={t0:.6g} evaporated during refinement")
        records.append(rec)
    if dim_end > 0:
        gram, method = crossing_form(pair, b, basis_end)
        records.append(CrossingRecord(b, dim_end, "end", gram,
                                      inertia(gram, tol=_gram_tol(method)), basis_end, method))

    segment = None
    if segment_run is not None:
        segment = _certify_segment(pair, ts, vals, records)

    return CrossingSet(records, segment, dim_start, dim_end, len(ts) - 1)


def _certify_segment(pair, ts, vals, records):
    """Validate a whole-interval constant-intersection stretch.

    The stratum dimension is the minimal intersection dimension along the
    run; grid nodes exceeding it become embedded crossing records. On the
    stratum the subspace must be constant and the crossing form must vanish.
    """
    a, b = pair.interval
    G = len(ts) - 1
    probe_idx = np.unique(np.linspace(0, G, 9).astype(int))
    dims = {}
    bases = {}
    for k in probe_idx:
        d, basisk = _intersection_data(pair.leg1, pair.leg2, ts[k], DIM_TOL)
        dims[k] = d
        bases[k] = basisk
    m = min(dims.values())
    if m == pair.space.n:
        raise IdenticallyDegenerateError(
            "the two legs coincide on the whole interval; the index is not defined"
        )
    if m == 0:
        raise RefinementError("segment detection and intersection ranks disagree")

    # dense dimension scan to find embedded jumps
    jump_nodes = []
    blocks = 64
    for lo in range(0, G + 1, blocks):
        hi = min(lo + blocks, G + 1)
        F1 = _orthonormalize_stack(_frames_stack(pair.leg1, ts[lo:hi]))
        F2 = _orthonormalize_stack(_frames_stack(pair.leg2, ts[lo:hi]))
        joint = np.concatenate([F1, -F2], axis=2)
        svals = np.linalg.svd(joint, compute_uv=False)
        dcount = np.sum(svals < DIM_TOL, axis=1)
        for off, d in enumerate(dcount):
            if d > m:
                jump_nodes.append(lo + off)

    known = {rec.t for rec in records}
    max_form = 0.0
    ref_basis = None
    for k in probe_idx:
        if dims[k] > m:
            continue
        basisk = bases[k]
        if ref_basis is None:
            ref_basis = basisk
        else:
            sv = np.linalg.svd(ref_basis.T @ basisk, compute_uv=False)
            if np.min(sv) < 1.0 - SEGMENT_ANGLE_TOL:
                raise DegenerateCrossingError(
                    "intersection subspace drifts along the degenerate stretch"
                )
        gram, method = crossing_form(pair, ts[k], basisk)
        bound = SEGMENT_FORM_TOL if method != "fd" else 1e-5
        max_form = max(max_form, float(np.max(np.abs(gram))) if gram.size else 0.0)
        if gram.size and np.max(np.abs(gram)) > bound:
            raise DegenerateCrossingError(
                f"crossing form does not vanish on the stretch (|gram|={np.max(np.abs(gram)):.2e})"
            )

    for k in jump_nodes:
        t0 = ts[k]
        if any(abs(t0 - t) <= 1e-9 * max(1.0, b - a) for t in known):
            continue
        loc = "start" if k == 0 else ("end" if k == G else "interior")
        rec = _record(pair, t0, loc, DIM_TOL)
        if rec is not None and rec.dim > m:
            records.append(rec)
            known.add(t0)
    records.sort(key=lambda r: r.t)
    return SegmentRecord(float(a), float(b), m, max_form)


# ---------------------------------------------------------------------------
# index assembly
# ---------------------------------------------------------------------------


def _strict_counts(rec):
    return rec.inertia[0], rec.inertia[2]


def _assemble_clm(cs):
    value = 0
    for rec in cs.crossings:
        np_, nm = _strict_counts(rec)
        if rec.location == "start":
            value += np_
        elif rec.location == "end":
            value -= nm
        else:
            value += np_ - nm
    return int(value)


def _assemble_rs(cs):
    # The engine gram Gamma(ell_2, ell_1) is exactly the RS crossing form of
    # the swapped pair, so iota_RS(ell_2, ell_1) sums its signatures with
    # half weight at the endpoints.
    value = 0.0
    for rec in cs.crossings:
        np_, nm = _strict_counts(rec)
        sgn = np_ - nm
        if rec.location in ("start", "end"):
            value += 0.5 * sgn
        else:
            value += sgn
    return value


def _has_bad_interior_degeneracy(cs):
    for rec in cs.crossings:
        if rec.location == "interior" and rec.inertia[1] > 0 and cs.segment is None:
            return True
        if cs.segment is not None and rec.location == "interior":
            # embedded jump: only the moving part may be nonzero; the clean
            # directions sit in the kernel by construction, deeper kernels
            # are genuine degeneracies
            if rec.inertia[1] > cs.segment.dim:
                return True
    return False


def _perturbed_pair(pair, eps):
    from . import _kernels

    M = _kernels.expm(eps * pair.space.J)
    return PairPath(pair.leg1, MappedLeg(pair.leg2, M))


def _resolve(pair, grid, kind):
    """Detect crossings; fall back to the rotation budget on degeneracies."""
    cs = detect_crossings(pair, grid=grid)
    if not _has_bad_interior_degeneracy(cs):
        return cs, None
    for eps in PERTURBATION_BUDGET:
        pert = _perturbed_pair(pair, eps)
        try:
            cs2 = detect_crossings(pert, grid=grid)
        except (DegenerateCrossingError, RefinementError):
            continue
        if cs2.dim_start == cs.dim_start and cs2.dim_end == cs.dim_end \
                and not _has_bad_interior_degeneracy(cs2):
            return cs2, eps
    raise DegenerateCrossingError(
        "degenerate interior crossing not resolved by the rotation budget "
        f"{PERTURBATION_BUDGET}; endpoint intersections would move"
    )


def clm_index(pair, grid=None):
    """iota_CLM(ell_1, ell_2) over the pair's interval; an IndexReport."""
    cs, eps = _resolve(pair, grid, "clm")
    return IndexReport(_assemble_clm(cs), "clm", cs.crossings, cs.segment, eps)


def rs_index(pair, grid=None):
    """iota_RS(ell_2, ell_1); half-integer valued IndexReport.

    The pair order mirrors clm_index: for a pair (L0, ell(t)) this is the
    half-integer index of the moving leg against the reference, related to
    the CLM value by

        iota_CLM(ell_1, ell_2) = iota_RS - (h(b) - h(a)) / 2,

    where h(t) = dim ell_1(t) cap ell_2(t).
    """
    cs, eps = _resolve(pair, grid, "rs")
    return IndexReport(_assemble_rs(cs), "rs", cs.crossings, cs.segment, eps)


def cz_index(psi, grid=None):
    """Conley-Zehnder index iota_CLM(Delta, Gr psi) of a symplectic path."""
    leg = graph_leg(psi)
    pair = pair_against_constant(diagonal_frame(psi.space), leg)
    cs, eps = _resolve(pair, grid, "cz")
    return IndexReport(_assemble_clm(cs), "cz", cs.crossings, cs.segment, eps)


def iota_omega(psi, omega, grid=None):
    """iota_omega(psi) = iota_CLM(Gr(omega Id), Gr psi) for omega = +-1."""
    leg = graph_leg(psi)
    ref = omega_graph_frame(psi.space, omega)
    pair = pair_against_constant(ref, leg)
    cs, eps = _resolve(pair, grid, "iota_omega")
    return IndexReport(_assemble_clm(cs), "iota_omega", cs.crossings, cs.segment, eps,
                       extras={"omega": float(omega)})


def l_maslov_index(L, psi, grid=None):
    """i_L(psi) = iota_CLM(L x L, Gr psi) in the double space."""
    leg = graph_leg(psi)
    pair = pair_against_constant(pair_frame(L, L), leg)
    cs, eps = _resolve(pair, grid, "l_maslov")
    return IndexReport(_assemble_clm(cs), "l_maslov", cs.crossings, cs.segment, eps)


def maslov_pair_index(L0, L, psi, grid=None):
    """iota_CLM(L0, psi(t) L) computed directly in the base space."""
    pair = pair_against_constant(L0, FlowLeg(psi, L))
    return clm_index(pair, grid=grid)


# ---------------------------------------------------------------------------
# triple and Hormander indices
# ---------------------------------------------------------------------------


def _kashiwara_gram(space, qa, qb, qc, rng=None):
    """Gram of the triple form on alpha cap (beta + gamma).

    Vectors v in the domain split as v = b + c with b in beta, c in gamma;
    Q[v] = omega(b, c). The splitting is unique up to beta cap gamma, on
    which the symmetrized gram does not depend; with rng a random shift is
    applied (used for the well-definedness cross-check).
    """
    bc = subspace_sum(qb, qc)
    dim_d, D = intersection(qa, bc)
    if dim_d == 0:
        return np.zeros((0, 0)), D
    sol, *_ = np.linalg.lstsq(np.concatenate([qb, qc], axis=1), D, rcond=None)
    bpart = qb @ sol[:qb.shape[1], :]
    cpart = qc @ sol[qb.shape[1]:, :]
    resid = np.max(np.abs(bpart + cpart - D)) if D.size else 0.0
    if resid > 1e-8:
        raise RefinementError(f"triple-form splitting inconsistent (residual {resid:.2e})")
    if rng is not None:
        dim_k, K = intersection(qb, qc)
        if dim_k > 0:
            shift = K @ rng.standard_normal((dim_k, dim_d))
            bpart = bpart + shift
            cpart = cpart - shift
    G = bpart.T @ space.form.T @ cpart
    return 0.5 * (G + G.T), D


def triple_index(space, alpha, beta, gamma, rng=None):
    """Kashiwara-type triple index iota(alpha, beta, gamma); an IndexReport.

    value = n_+(Q) + dim(alpha cap gamma) - dim(alpha cap beta cap gamma),
    cross-checked through the symplectic reduction by
    eps = (alpha cap beta) + (beta cap gamma), where the same count equals
    the extended coindex n_+ + n_0 of the reduced form.
    """
    qa = orthonormal_columns(np.asarray(alpha, dtype=float))
    qb = orthonormal_columns(np.asarray(beta, dtype=float))
    qc = orthonormal_columns(np.asarray(gamma, dtype=float))

    gram, D = _kashiwara_gram(space, qa, qb, qc)
    npl, nze, nmi = inertia(gram, tol=GRAM_TOL)
    dim_ag, _ = intersection(qa, qc)
    both = intersection(qa, qb)[1]
    dim_abg, _ = intersection(both, qc) if both.shape[1] else (0, both)
    value = npl + dim_ag - dim_abg

    if rng is not None:
        gram2, _ = _kashiwara_gram(space, qa, qb, qc, rng=rng)
        npl2 = inertia(gram2, tol=GRAM_TOL)[0]
        if npl2 != npl:
            raise ConvergenceError("triple form depends on the splitting; tolerances too loose")

    # reduction cross-check
    ab = intersection(qa, qb)[1]
    bc = intersection(qb, qc)[1]
    eps_basis = subspace_sum(ab, bc) if (ab.shape[1] or bc.shape[1]) else np.zeros((space.dim, 0))
    if 2 * eps_basis.shape[1] == space.dim:
        # reduction by a Lagrangian eps collapses to the trivial space
        gram_red = np.zeros((0, 0))
    elif eps_basis.shape[1] > 0:
        red = reduce_by_isotropic(space, eps_basis)
        pa = red.project(qa)
        pb = red.project(qb)
        pc = red.project(qc)
        gram_red, _ = _kashiwara_gram(red.space_red, pa, pb, pc)
    else:
        gram_red = gram
    rp, rz, rm = inertia(gram_red, tol=GRAM_TOL)
    if rp + rz != value:
        raise ConvergenceError(
            f"triple index routes disagree: ambient {value}, reduced coindex {rp + rz}"
        )
    if rz != dim_ag - dim_abg:
        raise ConvergenceError(
            f"reduced kernel {rz} != dim(a^g) - dim(a^b^g) = {dim_ag - dim_abg}"
        )
    return IndexReport(int(value), "triple", [], extras={
        "gram": gram, "inertia": (npl, nze, nmi),
        "dim_alpha_gamma": dim_ag, "dim_triple": dim_abg,
        "reduced_inertia": (rp, rz, rm),
    })


def hormander_index(space, l1, l2, m1, m2, rng=None):
    """s(l1, l2; m1, m2) = iota(l1, l2, m2) - iota(l1, l2, m1).

    Both defining expressions are computed and must agree exactly; it also
    equals iota_CLM(m2, lam) - iota_CLM(m1, lam) for any path lam from l1
    to l2 (checked in the verification suite, not here).
    """
    s1 = triple_index(space, l1, l2, m2, rng=rng).value \
        - triple_index(space, l1, l2, m1, rng=rng).value
    s2 = triple_index(space, l1, m1, m2, rng=rng).value \
        - triple_index(space, l2, m1, m2, rng=rng).value
    if s1 != s2:
        raise ConvergenceError(f"Hormander expressions disagree: {s1} vs {s2}")
    return IndexReport(int(s1), "hormander", [], extras={"expressions": (s1, s2)})


# ---------------------------------------------------------------------------
# plus curves and iteration
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class PlusCurveReport:
    is_plus: bool
    total_multiplicity: int
    clm_value: int
    crossings: list
    transversal_at_end: bool


def plus_curve_report(L0, leg, grid=None):
    """Certify ell(t) as a plus curve w.r.t. L0 and count its crossings.

    Every crossing form must be positive definite; the CLM index then equals
    mult(a) plus the interior multiplicities, which is cross-checked against
    the general assembly. Degenerate (singular) crossing forms raise.
    """
    pair = pair_against_constant(L0, leg)
    cs = detect_crossings(pair, grid=grid)
    is_plus = True
    total = 0
    plus_value = 0
    for rec in cs.crossings:
        total += rec.dim
        if rec.inertia[1] > 0:
            raise DegenerateCrossingError(
                f"singular crossing form at t={rec.t:.6g}; plus-curve count undefined"
            )
        if rec.inertia[0] != rec.dim:
            is_plus = False
        if rec.location == "start":
            plus_value += rec.dim
        elif rec.location == "interior":
            plus_value += rec.dim
    value = _assemble_clm(cs)
    if is_plus and plus_value != value:
        raise ConvergenceError(
            f"plus-curve count {plus_value} disagrees with the CLM assembly {value}"
        )
    return PlusCurveReport(is_plus, total, value, cs.crossings, cs.dim_end == 0)


def iterate_flow(psi, m):
    """The m-fold iteration of a symplectic path starting at t = 0."""
    return IteratedPath(psi, m)
