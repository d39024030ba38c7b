"""Spectral flow of paths of first-order self-adjoint operators.

The operators are A_C = -J0 d/dt - C(t) acting on H^1 paths w: [0,T] -> R^{2n}
with boundary condition (w(0), w(T)) in a Lagrangian L of the double space;
that constraint is exactly what makes the form

    a(w, v) = int_0^T <-J0 w' - C w, v> dt

symmetric, and the assembly rejects non-Lagrangian boundary data.

Discretization is P1 finite elements with one-point (midpoint) quadrature for
both the form and the mass. The quadrature choice matters. With exact (or
2-point Gauss) integration the discrete dispersion of -J0 d/dt folds back to
zero at the grid Nyquist frequency, so every coefficient family drags a
branch of spurious high-frequency eigenvalues through zero and no symmetric
stabilization can prevent it: lifting the folded branch just drags its
negative half through zero instead. Midpoint quadrature gives the monotone
dispersion (2/h) tan(theta/2) with no fold; the only parasitic modes left are
the node-alternating ones, and those lie in the common kernel of (A, M) for
every coefficient, because both the quadrature mass and the quadrature
coefficient term sample them at cell midpoints where they vanish, while the
first-order term telescopes to the Lagrangian boundary pairing. Parasitic
modes are therefore pinned at pencil eigenvalue zero for the whole family
and never enter a strict negative-eigenvalue count.

For a continuous family of finite symmetric pencils the spectral flow with
the endpoint convention (kernel at the start counted, kernel at the end
dropped, after the almost-every-delta shift) is exactly

    spfl = n_-(A(s0) + delta M) - n_-(A(s1) + delta M),

because eigenvalues move continuously and only zero crossings change the
count; Sylvester's law of inertia makes n_- of the pencil equal to the
matrix inertia, so the counts come from banded symmetric eigenvalue
truncation, not from tracking heuristics. The shift by delta * M moves every
pencil eigenvalue by exactly delta and leaves the pinned parasitic kernel at
zero. A value is accepted once three successive mesh doublings agree.
Eigenvalue tracks across the parameter grid are available as diagnostics and
are validated against a Lipschitz jump bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import ConvergenceError, FrameError, PreconditionError, RefinementError
from .flows import _boundary_restriction, _count_negative_banded, _snake_permutation
from .flows import integrate_fundamental
from .indices import clm_index
from .paths import FlowPath, graph_leg, pair_against_constant
from .symplectic import J0_matrix, double_space, is_lagrangian, standard_space

DELTA_BUDGET = (1e-6, 1e-7)
ENDPOINT_CLEARANCE = 1e-9
SYMMETRY_TOL = 1e-12
COUNT_TOL = 1e-11


@dataclass(eq=False)
class OperatorFamily:
    """s -> A_{C_s} = -J0 d/dt - C(s, t) with a fixed boundary Lagrangian L.

    ``coeff(s, t)`` returns the symmetric 2n x 2n coefficient; ``L`` is a
    4n x 2n Lagrangian frame of the double space encoding the boundary
    condition (w(0), w(T)) in L.
    """

    coeff: object
    n: int
    T: float
    L: np.ndarray
    s_interval: tuple = (0.0, 1.0)

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=float)
        dsp = double_space(standard_space(self.n))
        chk = is_lagrangian(dsp, self.L)
        if not chk.ok:
            raise FrameError(
                "boundary frame is not Lagrangian in the double space "
                f"(rank {chk.rank}, isotropy defect {chk.isotropy_defect:.2e}); "
                "the operator would not be self-adjoint"
            )
        a, b = self.s_interval
        for s in (a, 0.5 * (a + b), b):
            for t in np.linspace(0.0, self.T, 3):
                C = np.asarray(self.coeff(s, t), dtype=float)
                if C.shape != (2 * self.n, 2 * self.n):
                    raise FrameError(f"coefficient at (s={s}, t={t}) has shape {C.shape}")
                if not np.allclose(C, C.T, atol=1e-10 * max(1.0, np.max(np.abs(C)))):
                    raise FrameError(f"coefficient at (s={s}, t={t}) is not symmetric")


def _assemble_reduced(coeff_t, n, T, L, N):
    """Sparse boundary-reduced pencil (A, M) on the P1/midpoint space.

    Dof order: L-coordinates of the joint boundary value first, then the
    interior nodes 1..N-1. Raises if the reduced form misses the symmetry
    bound, which certifies the Lagrangian boundary condition.
    """
    d = 2 * n
    J = J0_matrix(n)
    L = np.asarray(L, dtype=float)
    grid = np.linspace(0.0, T, N + 1)
    h = grid[1] - grid[0]
    mids = 0.5 * (grid[:-1] + grid[1:])

    Cmid = np.empty((N, d, d))
    for k, t in enumerate(mids):
        Cmid[k] = np.asarray(coeff_t(t), dtype=float)

    # per-cell blocks of a(w, v) = sum_k h <-J0 Dw - C(mid) Pw, Pv>, written
    # against trial node j and test node i of cell k:
    #   j = k:   +J0/2 - (h/4) C      j = k+1:   -J0/2 - (h/4) C
    # for both i; mass blocks are (h/4) I throughout.
    q = (0.25 * h) * Cmid
    half_J = 0.5 * J
    blocks = np.empty((N, 2 * d, 2 * d))
    blocks[:, :d, :d] = half_J - q
    blocks[:, d:, :d] = half_J - q
    blocks[:, :d, d:] = -half_J - q
    blocks[:, d:, d:] = -half_J - q

    node_idx = np.arange(d)
    cell_dofs = (np.arange(N)[:, None] * d + np.concatenate([node_idx, d + node_idx]))
    rr = np.repeat(cell_dofs, 2 * d, axis=1)
    cc = np.tile(cell_dofs, (1, 2 * d))
    ndof = d * (N + 1)
    A = scipy.sparse.coo_matrix(
        (blocks.ravel(), (rr.ravel(), cc.ravel())), shape=(ndof, ndof)
    ).tocsr()
    eye = np.eye(d)
    mblk = (0.25 * h) * np.block([[eye, eye], [eye, eye]])
    M = scipy.sparse.coo_matrix(
        (np.tile(mblk.ravel(), N), (rr.ravel(), cc.ravel())), shape=(ndof, ndof)
    ).tocsr()

    R = _boundary_restriction(d, N, L)
    AL = (R.T @ A @ R).tocsr()
    ML = (R.T @ M @ R).tocsr()
    defect = float(abs(AL - AL.T).max()) if AL.nnz else 0.0
    scale = float(abs(AL).max()) if AL.nnz else 1.0
    if defect > SYMMETRY_TOL * max(1.0, scale):
        raise FrameError(
            f"reduced operator form is not symmetric (defect {defect:.2e}); "
            "boundary data is inconsistent"
        )
    AL = 0.5 * (AL + AL.T)
    ML = 0.5 * (ML + ML.T)
    return AL, ML


def discretize(coeff_t, n, T, L, N):
    """Dense symmetric pencil (A, M) of A_C on the boundary-reduced P1 space.

    ``coeff_t`` maps t to the symmetric 2n x 2n coefficient. Dof order is
    the 2n boundary L-coordinates followed by the interior nodes, total
    size 2nN. The mass M is positive semidefinite; its kernel is spanned by
    the node-alternating parasitic modes compatible with the boundary
    condition, and those are also in the kernel of A for every coefficient,
    so pencil counts ignore them.
    """
    if N < 8:
        raise PreconditionError(f"need N >= 8 cells, got {N}")
    AL, ML = _assemble_reduced(coeff_t, n, T, L, N)
    return AL.toarray(), ML.toarray()


def _permuted(AL, N, d, head):
    perm = _snake_permutation(d, N, head)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    A = AL.tocoo()
    return scipy.sparse.coo_matrix(
        (A.data, (inv[A.row], inv[A.col])), shape=A.shape
    ).tocsr()


class _BandedPencil:
    """Banded inertia oracle for one operator: counts of pencil eigenvalues."""

    def __init__(self, coeff_t, n, T, L, N):
        AL, ML = _assemble_reduced(coeff_t, n, T, L, N)
        d = 2 * n
        head = np.asarray(L).shape[1]
        self.A = _permuted(AL, N, d, head)
        self.M = _permuted(ML, N, d, head)

    def count_below(self, c):
        """#{pencil eigenvalues < c}, parasitic kernel excluded."""
        return _count_negative_banded(self.A - c * self.M, tol_rel=COUNT_TOL)

    def count_in(self, lo, hi):
        return self.count_below(hi) - self.count_below(lo)


def _zigzag_directions(n, N, L):
    """Basis of c with ((c, (-1)^N c)) in L: the parasitic-mode directions."""
    d = 2 * n
    L = np.asarray(L, dtype=float)
    sigma = -1.0 if N % 2 else 1.0
    K = np.vstack([np.eye(d), sigma * np.eye(d)])
    resid = K - L @ (L.T @ K)
    _, sv, Vt = np.linalg.svd(resid, full_matrices=False)
    keep = sv < 1e-10 * max(1.0, sv[0] if len(sv) else 1.0)
    return Vt[keep].T


def _dense_quotient_eigs(coeff_t, n, T, L, N, delta):
    """Pencil eigenvalues with the parasitic common kernel deflated."""
    A, M = discretize(coeff_t, n, T, L, N)
    d = 2 * n
    L = np.asarray(L, dtype=float)
    cz = _zigzag_directions(n, N, L)
    if cz.shape[1]:
        nz = cz.shape[1]
        Zb = np.zeros((A.shape[0], nz))
        Zb[: L.shape[1]] = L.T @ np.vstack([cz, (-1.0 if N % 2 else 1.0) * cz])
        signs = np.array([(-1.0) ** k for k in range(1, N)])
        Zb[L.shape[1]:] = np.einsum("k,ij->kij", signs, cz).reshape(-1, nz)
        Q, _ = np.linalg.qr(Zb)
        Y = scipy.linalg.null_space(Q.T)
        A = Y.T @ A @ Y
        M = Y.T @ M @ Y
    return scipy.linalg.eigh(A + delta * M, M, eigvals_only=True)


@dataclass(eq=False)
class EigenTrack:
    """Diagnostic eigenvalue bands of a family across the parameter grid."""

    s_grid: np.ndarray
    bands: np.ndarray
    crossings: list
    max_jump: float
    jump_bound: float


@dataclass(eq=False)
class SpectralFlowReport:
    value: int
    delta: float
    n_start: int
    n_end: int
    grid_cells: int
    track: EigenTrack = None

    def __int__(self):
        return self.value


def _endpoint_pencils(fam, N):
    a, b = fam.s_interval
    pa = _BandedPencil(lambda t: fam.coeff(a, t), fam.n, fam.T, fam.L, N)
    pb = _BandedPencil(lambda t: fam.coeff(b, t), fam.n, fam.T, fam.L, N)
    return pa, pb


def _choose_delta(pa, pb):
    eps = ENDPOINT_CLEARANCE
    if pa.count_in(-eps, eps) == 0 and pb.count_in(-eps, eps) == 0:
        return 0.0
    for delta in DELTA_BUDGET:
        if (pa.count_in(-delta - eps, -delta + eps) == 0
                and pb.count_in(-delta - eps, -delta + eps) == 0):
            return delta
    raise PreconditionError(
        "endpoint kernel not removable by the delta budget "
        f"{DELTA_BUDGET}; the family endpoints are too degenerate"
    )


def _lipschitz_estimate(fam, s_grid):
    ts = np.linspace(0.0, fam.T, 9)
    lip = 0.0
    for sa, sb in zip(s_grid[:-1], s_grid[1:]):
        for t in ts:
            dC = np.asarray(fam.coeff(sb, t)) - np.asarray(fam.coeff(sa, t))
            lip = max(lip, float(np.linalg.norm(dC, 2)) / (sb - sa))
    return lip


def _eigen_track(fam, N, delta, s_points, K):
    """Bands of the K eigenvalues nearest zero, with a jump-bound check.

    The mass-weighted coefficient perturbation bounds each pencil
    eigenvalue's movement by max_t |C(s') - C(s)|_2. The K-nearest-zero
    window itself slides as eigenvalues enter and leave it, so the bound is
    checked by nearest-successor matching of the eigenvalues in the inner
    half of the window (the ones whose zero crossings matter); a violation
    means the parameter grid is too coarse and it is refined before giving
    up. Signed crossings come from exact inertia counts per sample, so they
    are consistent with the flow value by construction.
    """
    a, b = fam.s_interval
    max_jump, bound = np.inf, 0.0
    for attempt in range(3):
        s_grid = np.linspace(a, b, s_points * 2**attempt)
        bands = []
        negcounts = []
        for s in s_grid:
            vals = _dense_quotient_eigs(
                lambda t: fam.coeff(s, t), fam.n, fam.T, fam.L, N, delta
            )
            near = vals[np.argsort(np.abs(vals))[:K]]
            bands.append(np.sort(near))
            negcounts.append(int(np.sum(vals < -ENDPOINT_CLEARANCE)))
        bands = np.array(bands)
        lip = _lipschitz_estimate(fam, s_grid)
        ds = s_grid[1] - s_grid[0]
        bound = 1.05 * lip * ds + 1e-6
        max_jump = 0.0
        for j in range(len(s_grid) - 1):
            half = np.median(np.abs(bands[j])) if bands.shape[1] else 0.0
            for u in bands[j][np.abs(bands[j]) <= half]:
                max_jump = max(max_jump, float(np.min(np.abs(bands[j + 1] - u))))
        if max_jump <= bound:
            crossings = []
            mid = 0.5 * (s_grid[:-1] + s_grid[1:])
            for i, jump in enumerate(np.diff(negcounts)):
                crossings.extend([(float(mid[i]), -int(np.sign(jump)))] * abs(int(jump)))
            return EigenTrack(s_grid, bands, crossings, max_jump, bound)
    raise RefinementError(
        f"untrackable spectrum: band jump {max_jump:.3e} exceeds the "
        f"Lipschitz bound {bound:.3e} even on the refined parameter grid"
    )


def spectral_flow(fam, N=48, max_doublings=6, with_tracks=False, s_points=33, K=8):
    """Spectral flow of the operator family, endpoint-kernel convention.

    The value n_-(start) - n_-(end) of the delta-shifted pencil is accepted
    once three successive mesh doublings agree; inertia counts are exact for
    the discrete pencil, and the midpoint-quadrature discretization pins all
    parasitic modes at zero where they never affect the counts.
    ``with_tracks`` additionally samples the parameter grid and attaches the
    ``K`` pencil eigenvalues nearest zero at each sample (diagnostics).
    """
    N = max(N, int(np.ceil(4.0 * fam.T)), 16)
    pa, pb = _endpoint_pencils(fam, N)
    delta = _choose_delta(pa, pb)
    counts = []
    meta = []
    for k in range(max_doublings + 1):
        Nk = N * 2**k
        if k:
            pa, pb = _endpoint_pencils(fam, Nk)
        n0 = pa.count_below(-delta)
        n1 = pb.count_below(-delta)
        counts.append(n0 - n1)
        meta.append((Nk, n0, n1))
        if len(counts) >= 3 and counts[-1] == counts[-2] == counts[-3]:
            Nk, n0, n1 = meta[-1]
            track = None
            if with_tracks:
                track = _eigen_track(fam, min(Nk, 192), delta, s_points, K)
            return SpectralFlowReport(counts[-1], delta, n0, n1, Nk, track)
    raise ConvergenceError(
        f"spectral flow did not stabilize over mesh doublings (counts {counts})"
    )


def constant_family(C_path, n, T, L, s_interval=(0.0, 1.0)):
    """The straight-line family C_s(t) = s * C(t) from the zero operator."""

    def coeff(s, t, _C=C_path):
        return s * np.asarray(_C(t), dtype=float)

    return OperatorFamily(coeff, n, T, L, s_interval)


@dataclass(eq=False)
class ComparisonFlowReport:
    spfl_1: int
    spfl_2: int
    clm_1: int
    clm_2: int
    monotone_flow: bool
    monotone_clm: bool
    formula_holds: bool
    delta: tuple


def comparison_flow(B1, B2, L, N_flow=48, N_path=1024):
    """Monotonicity of the spectral flow under coefficient ordering.

    Preconditions: B1(t) <= B2(t) pointwise (as quadratic forms). Computes
    spfl of the straight-line families of both coefficients, the CLM indices
    iota(L, Gr psi_i) of the induced flows, and checks

        spfl(A_2) <= spfl(A_1),    iota_2 >= iota_1,    -spfl_i = iota_i.
    """
    if B1.dim != B2.dim or B1.interval != B2.interval:
        raise FrameError("coefficient paths must share dimension and interval")
    n = B1.dim // 2
    T = B1.interval[1]
    if abs(B1.interval[0]) > 1e-13 * max(1.0, T):
        raise FrameError("comparison assumes the interval starts at 0")
    for t in np.linspace(0.0, T, 9):
        gap = np.linalg.eigvalsh(B2(t) - B1(t))
        if gap[0] < -1e-9 * max(1.0, abs(gap[-1])):
            raise PreconditionError(
                f"B1 <= B2 fails at t={t:.6g} (min eig of difference {gap[0]:.3e})"
            )

    fam1 = constant_family(B1, n, T, L)
    fam2 = constant_family(B2, n, T, L)
    r1 = spectral_flow(fam1, N=N_flow)
    r2 = spectral_flow(fam2, N=N_flow)

    clms = []
    for B in (B1, B2):
        sol = integrate_fundamental(B, N_path)
        leg = graph_leg(FlowPath(sol))
        clms.append(clm_index(pair_against_constant(L, leg)).value)

    return ComparisonFlowReport(
        r1.value, r2.value, clms[0], clms[1],
        monotone_flow=r2.value <= r1.value,
        monotone_clm=clms[1] >= clms[0],
        formula_holds=(-r1.value == clms[0]) and (-r2.value == clms[1]),
        delta=(r1.delta, r2.delta),
    )


@dataclass(eq=False)
class RelativeMorseReport:
    spfl: int
    morse_start: int
    morse_end: int
    verdict: bool
    delta: float


def relative_morse_check(family, s_interval=(0.0, 1.0), probes=9):
    """-spfl = Morse(end) - Morse(start) for a finite symmetric family.

    ``family`` maps s to a symmetric matrix (an already-discretized
    essentially-positive operator); Morse indices count strictly negative
    eigenvalues. Endpoint kernels are removed by the delta budget.
    """
    a, b = s_interval
    Aa = np.asarray(family(a), dtype=float)
    Ab = np.asarray(family(b), dtype=float)
    for s in np.linspace(a, b, probes):
        As = np.asarray(family(s), dtype=float)
        if not np.allclose(As, As.T, atol=1e-10 * max(1.0, np.max(np.abs(As)))):
            raise FrameError(f"family value at s={s} is not symmetric")

    scale = max(1.0, float(np.max(np.abs(Aa))), float(np.max(np.abs(Ab))))
    delta = 0.0
    va = np.linalg.eigvalsh(Aa)
    vb = np.linalg.eigvalsh(Ab)
    if min(np.min(np.abs(va)), np.min(np.abs(vb))) <= ENDPOINT_CLEARANCE * scale:
        for cand in DELTA_BUDGET:
            d = cand * scale
            if min(np.min(np.abs(va + d)), np.min(np.abs(vb + d))) > ENDPOINT_CLEARANCE * scale:
                delta = d
                break
        else:
            raise PreconditionError("endpoint kernel not removable by the delta budget")

    n_a = int(np.sum(va + delta < 0.0))
    n_b = int(np.sum(vb + delta < 0.0))
    spfl = n_a - n_b
    morse_a = int(np.sum(va < -ENDPOINT_CLEARANCE * scale))
    morse_b = int(np.sum(vb < -ENDPOINT_CLEARANCE * scale))
    return RelativeMorseReport(spfl, morse_a, morse_b, -spfl == morse_b - morse_a, delta)
