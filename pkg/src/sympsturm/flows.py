"""Linear Hamiltonian flows and Morse-Sturm boundary value problems.

The fundamental solution of psi' = X(t) psi is integrated by composing
per-step matrix exponentials of the midpoint generator, which keeps every
sample symplectic to roundoff; a coarse/fine step comparison supplies the
error estimate. For standard coefficient paths B(t) the generator is
X = J0 B, matching the first-order form z' = J0 B(t) z of the Morse-Sturm
system

    -(P u' + Q u)' + Q^T u' + R u = 0,   z = (P u' + Q u, u),

whose Hamiltonian block matrix is

    B(t) = [[P^-1, -P^-1 Q], [-Q^T P^-1, Q^T P^-1 Q - R]].

Boundary conditions Z <= R^n x R^n turn into the Lagrangian

    L_Z = {((p0,q0),(pT,qT)) : (q0,qT) in Z, (p0,-pT) in Z^perp}

of the double space, and the discrete Morse index is the negative-eigenvalue
count of the P1 finite element discretization of the index form, refined
until stable over two mesh doublings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from . import _kernels
from .errors import ConvergenceError, FrameError, RefinementError, UnsupportedBoundaryError
from .symplectic import (
    J0_matrix,
    SymplecticSpace,
    double_space,
    intersection,
    null_space,
    orthonormal_columns,
    standard_space,
)

SYMPLECTIC_DEFECT_TOL = 1e-9


def _matrix_fun(value, dim=None):
    """Normalize a constant matrix / callable into a callable t -> matrix."""
    if callable(value):
        return value, dim
    M = np.asarray(value, dtype=float)
    return (lambda t, _M=M: _M), M.shape[0]


@dataclass(eq=False)
class CoefficientPath:
    """A path of symmetric coefficient matrices B(t) on an interval.

    Represents the quadratic Hamiltonian H(t, z) = (1/2) <B(t) z, z>; the
    induced flow is psi' = J0 B(t) psi in the standard space.
    """

    fun: object
    interval: tuple
    dim: int

    def __post_init__(self):
        a, b = self.interval
        if not b > a:
            raise FrameError("coefficient path needs a nondegenerate interval")
        for t in np.linspace(a, b, 7):
            M = np.asarray(self.fun(t), dtype=float)
            if M.shape != (self.dim, self.dim):
                raise FrameError(f"coefficient matrix at t={t} has shape {M.shape}")
            if not np.allclose(M, M.T, atol=1e-10 * max(1.0, np.max(np.abs(M)))):
                raise FrameError(f"coefficient matrix at t={t} is not symmetric")

    def __call__(self, t):
        return np.asarray(self.fun(t), dtype=float)

    @classmethod
    def constant(cls, B, interval):
        f, dim = _matrix_fun(B)
        return cls(f, tuple(interval), dim)

    @classmethod
    def from_callable(cls, fun, interval, dim):
        return cls(fun, tuple(interval), dim)

    @classmethod
    def from_polynomial(cls, coeffs, interval):
        """B(t) = sum_k coeffs[k] * t^k with symmetric matrix coefficients."""
        mats = [np.asarray(c, dtype=float) for c in coeffs]
        dim = mats[0].shape[0]

        def fun(t, _mats=mats):
            out = np.zeros_like(_mats[0])
            tk = 1.0
            for M in _mats:
                out = out + tk * M
                tk *= t
            return out

        return cls(fun, tuple(interval), dim)

    @classmethod
    def from_samples(cls, ts, mats):
        """Piecewise-linear interpolation through sampled matrices."""
        ts = np.asarray(ts, dtype=float)
        mats = np.asarray(mats, dtype=float)
        if ts.ndim != 1 or len(ts) < 2 or np.any(np.diff(ts) <= 0):
            raise FrameError("sample times must be strictly increasing")
        if mats.shape[0] != len(ts):
            raise FrameError("need one matrix per sample time")

        def fun(t, _ts=ts, _mats=mats):
            k = np.clip(np.searchsorted(_ts, t) - 1, 0, len(_ts) - 2)
            w = (t - _ts[k]) / (_ts[k + 1] - _ts[k])
            w = min(max(w, 0.0), 1.0)
            return (1.0 - w) * _mats[k] + w * _mats[k + 1]

        return cls(fun, (float(ts[0]), float(ts[-1])), mats.shape[1])


@dataclass(eq=False)
class GeneratorPath:
    """A path of generators X(t) in sp(V, omega): psi' = X(t) psi."""

    fun: object
    interval: tuple
    space: SymplecticSpace

    def __call__(self, t):
        return np.asarray(self.fun(t), dtype=float)


def hamiltonian_generator(space, B):
    """Generator X of the Hamiltonian H = (1/2)<B z, z>: X = -form^{-1} B.

    In the standard space this is J0 B (because J0^{-1} = -J0).
    """
    forminv = np.linalg.inv(space.form)

    def fun(t, _B=B, _Fi=forminv):
        return -_Fi @ _B(t)

    return GeneratorPath(fun, B.interval, space)


def coefficient_from_generator(space, gen):
    """Recover B(t) = -form @ X(t) from a generator path (inverse of above)."""

    def fun(t, _g=gen, _F=space.form):
        return -_F @ _g(t)

    return fun


@dataclass(eq=False)
class FundamentalSolution:
    """Samples of psi(t) with psi(a) = Id, plus the generator for reuse.

    Off-grid evaluation composes one midpoint-exponential step from the
    nearest grid node on the left, so values stay exactly symplectic and
    agree with the stored samples at the nodes.
    """

    space: SymplecticSpace
    generator: object
    grid: np.ndarray
    samples: np.ndarray
    error_estimate: float
    symplectic_defect: float

    @property
    def interval(self):
        return (float(self.grid[0]), float(self.grid[-1]))

    @property
    def monodromy(self):
        return self.samples[-1]

    def __call__(self, t):
        a, b = self.interval
        if t < a - 1e-12 * (b - a) or t > b + 1e-12 * (b - a):
            raise ValueError(f"t={t} outside [{a}, {b}]")
        k = int(np.clip(np.searchsorted(self.grid, t, side="right") - 1, 0, len(self.grid) - 2))
        tk = self.grid[k]
        dt = t - tk
        if dt == 0.0:
            return self.samples[k]
        if t >= self.grid[-1]:
            return self.samples[-1]
        step = _kernels.expm(dt * np.asarray(self.generator(tk + 0.5 * dt)))
        return step @ self.samples[k]

    def generator_at(self, t):
        return np.asarray(self.generator(t))

    def frames_at_nodes(self, seed):
        """psi(t_k) @ seed for all grid nodes, batched."""
        return np.einsum("kij,jm->kim", self.samples, seed)


def integrate_fundamental(path, N, space=None, defect_tol=SYMPLECTIC_DEFECT_TOL,
                          error_check=True):
    """Integrate psi' = X(t) psi, psi(a) = Id on an N-cell grid.

    ``path`` is a CoefficientPath (standard space implied, generator J0 B)
    or a GeneratorPath. Each step multiplies by exp(dt * X(t_mid)), so all
    samples are symplectic to roundoff; the relative defect is verified
    against ``defect_tol``. ``error_estimate`` compares against a
    half-resolution run (two-level step-size extrapolation estimate).
    """
    if isinstance(path, CoefficientPath):
        if space is None:
            space = standard_space(path.dim // 2)
        gen = hamiltonian_generator(space, path)
    elif isinstance(path, GeneratorPath):
        space = path.space if space is None else space
        gen = path
    else:
        raise FrameError("path must be a CoefficientPath or GeneratorPath")
    if N < 2:
        raise FrameError("need at least 2 grid cells")

    a, b = gen.interval
    grid = np.linspace(a, b, N + 1)
    samples = _propagate_on_grid(gen, grid)

    defect = _max_symplectic_defect(space, samples)
    if defect > defect_tol:
        raise RefinementError(
            f"symplectic defect {defect:.3e} exceeds {defect_tol:.1e}; "
            "the flow is too ill-conditioned at this resolution"
        )

    err = float("nan")
    if error_check:
        coarse_grid = grid[::2] if N % 2 == 0 else np.linspace(a, b, max(2, N // 2) + 1)
        coarse = _propagate_on_grid(gen, coarse_grid)
        if N % 2 == 0:
            err = float(np.max(np.abs(samples[::2] - coarse))) / 3.0
        else:
            err = float(np.max(np.abs(samples[-1] - coarse[-1]))) / 3.0

    return FundamentalSolution(space, gen, grid, samples, err, defect)


def _propagate_on_grid(gen, grid):
    mids = 0.5 * (grid[:-1] + grid[1:])
    dts = np.diff(grid)
    gens = np.stack([np.asarray(gen(t), dtype=float) for t in mids])
    return _kernels.propagate(gens, dts)


def _max_symplectic_defect(space, samples):
    """Worst relative defect max_k |psi_k^T F psi_k - F| / max(1, |psi_k|^2 |F|).

    The normalization keeps the check meaningful for exponentially growing
    flows, where |psi|^2 * eps of pure roundoff would swamp any absolute
    tolerance long before the integration itself degrades.
    """
    F = space.form
    prods = np.einsum("kji,jl,klm->kim", samples, F, samples)
    raw = np.max(np.abs(prods - F), axis=(1, 2))
    scale = np.maximum(1.0, np.max(np.abs(samples), axis=(1, 2)) ** 2 * np.max(np.abs(F)))
    return float(np.max(raw / scale))


# ---------------------------------------------------------------------------
# Morse-Sturm systems
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class MorseSturmSystem:
    """-(P u' + Q u)' + Q^T u' + R u = 0 on [0, T], u(t) in R^n.

    P(t) symmetric positive definite, R(t) symmetric, Q(t) arbitrary; each
    may be a constant matrix or a callable of t.
    """

    P: object
    Q: object
    R: object
    T: float
    n: int = None

    def __post_init__(self):
        self.P, nP = _matrix_fun(self.P, self.n)
        self.Q, nQ = _matrix_fun(self.Q, self.n)
        self.R, nR = _matrix_fun(self.R, self.n)
        if self.n is None:
            self.n = nP or nQ or nR
        if self.n is None:
            raise FrameError("cannot infer the system dimension; pass n=")
        if not self.T > 0:
            raise FrameError("need T > 0")
        for t in np.linspace(0.0, self.T, 5):
            P = np.asarray(self.P(t), dtype=float)
            R = np.asarray(self.R(t), dtype=float)
            if not np.allclose(P, P.T, atol=1e-10 * max(1.0, np.max(np.abs(P)))):
                raise FrameError(f"P({t}) is not symmetric")
            if not np.allclose(R, R.T, atol=1e-10 * max(1.0, np.max(np.abs(R)))):
                raise FrameError(f"R({t}) is not symmetric")
            try:
                np.linalg.cholesky(P)
            except np.linalg.LinAlgError:
                raise FrameError(f"P({t}) is not positive definite") from None


def morse_sturm_to_hamiltonian(ms):
    """Hamiltonian coefficient path of the first-order form z = (Pu'+Qu, u)."""
    n = ms.n

    def fun(t, _ms=ms):
        P = np.asarray(_ms.P(t), dtype=float)
        Q = np.asarray(_ms.Q(t), dtype=float)
        R = np.asarray(_ms.R(t), dtype=float)
        Pinv = np.linalg.inv(P)
        B = np.empty((2 * n, 2 * n))
        B[:n, :n] = Pinv
        B[:n, n:] = -Pinv @ Q
        B[n:, :n] = B[:n, n:].T
        B[n:, n:] = Q.T @ Pinv @ Q - R
        return 0.5 * (B + B.T)

    return CoefficientPath(fun, (0.0, ms.T), 2 * n)


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """A subspace Z <= R^n x R^n of admissible boundary values (u(0), u(T)).

    ``kind`` is one of dirichlet / neumann / periodic / separated / general;
    separated conditions carry the two factors Z1, Z2 <= R^n.
    """

    kind: str
    n: int
    basis: np.ndarray = None
    z1: np.ndarray = None
    z2: np.ndarray = None

    @classmethod
    def dirichlet(cls, n):
        return cls("dirichlet", n)

    @classmethod
    def neumann(cls, n):
        return cls("neumann", n)

    @classmethod
    def periodic(cls, n):
        return cls("periodic", n)

    @classmethod
    def separated(cls, n, z1, z2):
        z1 = np.asarray(z1, dtype=float).reshape(n, -1)
        z2 = np.asarray(z2, dtype=float).reshape(n, -1)
        return cls("separated", n, z1=z1, z2=z2)

    @classmethod
    def general(cls, n, basis):
        basis = np.asarray(basis, dtype=float).reshape(2 * n, -1)
        return cls("general", n, basis=basis)

    def subspace(self):
        """Orthonormal basis of Z in R^{2n}."""
        n = self.n
        if self.kind == "dirichlet":
            return np.zeros((2 * n, 0))
        if self.kind == "neumann":
            return np.eye(2 * n)
        if self.kind == "periodic":
            return np.vstack([np.eye(n), np.eye(n)]) / np.sqrt(2.0)
        if self.kind == "separated":
            q1 = orthonormal_columns(self.z1)
            q2 = orthonormal_columns(self.z2)
            top = np.vstack([q1, np.zeros((n, q1.shape[1]))])
            bot = np.vstack([np.zeros((n, q2.shape[1])), q2])
            return np.hstack([top, bot])
        if self.kind == "general":
            return orthonormal_columns(self.basis)
        raise UnsupportedBoundaryError(f"unknown boundary kind {self.kind!r}")

    def perp(self):
        """Orthonormal basis of Z^perp in R^{2n}."""
        Z = self.subspace()
        if Z.shape[1] == 0:
            return np.eye(2 * self.n)
        return null_space(Z.T)


def boundary_lagrangian(bc):
    """L_Z = tilde-J0 (Z^perp x Z) as a 4n x 2n frame of the double space.

    Concretely, with coordinates ((p0, q0), (pT, qT)):

        L_Z = {(q0, qT) in Z  and  (p0, -pT) in Z^perp}.

    Dirichlet gives L_D x L_D, Neumann L_N x L_N, periodic the diagonal.
    """
    n = bc.n
    Z = bc.subspace()
    W = bc.perp()
    cols = []
    for j in range(Z.shape[1]):
        z0, zT = Z[:n, j], Z[n:, j]
        col = np.zeros(4 * n)
        col[n:2 * n] = z0
        col[3 * n:] = zT
        cols.append(col)
    for j in range(W.shape[1]):
        u0, uT = W[:n, j], W[n:, j]
        col = np.zeros(4 * n)
        col[:n] = u0
        col[2 * n:3 * n] = -uT
        cols.append(col)
    frame = np.column_stack(cols) if cols else np.zeros((4 * n, 0))
    if frame.shape[1] != 2 * n:
        raise FrameError("boundary subspace produced a non-Lagrangian frame")
    return frame


def c_of_Z(bc):
    """The correction constant in i_Morse = iota^CLM(L_Z, Gr psi) - c(Z).

    Named cases only: Dirichlet n, Neumann 0, periodic n, separated
    dim(Z1^perp ∩ Z2^perp). No general formula exists; anything else raises.
    """
    if bc.kind == "dirichlet":
        return bc.n
    if bc.kind == "neumann":
        return 0
    if bc.kind == "periodic":
        return bc.n
    if bc.kind == "separated":
        p1 = null_space(orthonormal_columns(bc.z1).T) if bc.z1.shape[1] else np.eye(bc.n)
        p2 = null_space(orthonormal_columns(bc.z2).T) if bc.z2.shape[1] else np.eye(bc.n)
        d, _ = intersection(p1, p2)
        return d
    raise UnsupportedBoundaryError(
        f"c(Z) has no formula for kind {bc.kind!r}; use dirichlet/neumann/periodic/separated"
    )


# ---------------------------------------------------------------------------
# discrete Morse index (P1 finite elements)
# ---------------------------------------------------------------------------

_GAUSS2 = ((0.5 - 0.5 / np.sqrt(3.0), 0.5), (0.5 + 0.5 / np.sqrt(3.0), 0.5))


def _assemble_index_form(ms, N):
    """Sparse n(N+1) x n(N+1) matrix of the index form on P1 elements.

    I(xi, eta) = int <P xi' + Q xi, eta'> + <Q^T xi' + R xi, eta> dt,
    integrated with 2-point Gauss per cell.
    """
    n = ms.n
    grid = np.linspace(0.0, ms.T, N + 1)
    ndof = n * (N + 1)
    rows, cols, vals = [], [], []
    blk = np.arange(n)
    for k in range(N):
        h = grid[k + 1] - grid[k]
        cell = np.zeros((2 * n, 2 * n))
        for g, w in _GAUSS2:
            t = grid[k] + g * h
            P = np.asarray(ms.P(t), dtype=float)
            Q = np.asarray(ms.Q(t), dtype=float)
            R = np.asarray(ms.R(t), dtype=float)
            phi = (1.0 - g, g)
            dphi = (-1.0 / h, 1.0 / h)
            for i in range(2):
                for j in range(2):
                    block = (
                        P * dphi[i] * dphi[j]
                        + Q * (phi[i] * dphi[j])
                        + Q.T * (dphi[i] * phi[j])
                        + R * (phi[i] * phi[j])
                    )
                    cell[j * n:(j + 1) * n, i * n:(i + 1) * n] += (w * h) * block.T
        idx = np.concatenate([k * n + blk, (k + 1) * n + blk])
        rr, cc = np.meshgrid(idx, idx, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(cell.ravel())
    A = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ndof, ndof),
    ).tocsr()
    return A


def _boundary_restriction(n, N, Z):
    """Sparse map from (boundary coords, interior nodes) to all node dofs."""
    k = Z.shape[1]
    ndof = n * (N + 1)
    nred = k + n * (N - 1)
    rows, cols, vals = [], [], []
    for j in range(k):
        for i in range(n):
            if Z[i, j] != 0.0:
                rows.append(i)
                cols.append(j)
                vals.append(Z[i, j])
            if Z[n + i, j] != 0.0:
                rows.append(n * N + i)
                cols.append(j)
                vals.append(Z[n + i, j])
    for node in range(1, N):
        for i in range(n):
            rows.append(node * n + i)
            cols.append(k + (node - 1) * n + i)
            vals.append(1.0)
    return scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(ndof, nred)).tocsr()


def _snake_permutation(n_or_sizes, N, head):
    """Orderings that keep endpoint-coupled dof blocks inside a narrow band.

    Returns an index permutation putting the ``head`` boundary coords first,
    then interior nodes in the order 1, N-1, 2, N-2, ... so that periodic
    couplings stay near the diagonal.
    """
    n = n_or_sizes
    order = [np.arange(head)]
    lo, hi = 1, N - 1
    base = head
    # interior node `node` occupies base + (node-1)*n .. +n
    while lo <= hi:
        order.append(head + (lo - 1) * n + np.arange(n))
        if hi != lo:
            order.append(head + (hi - 1) * n + np.arange(n))
        lo += 1
        hi -= 1
    return np.concatenate(order)


def _count_negative_banded(A, tol_rel=1e-9):
    """Number of eigenvalues < -tol of a (permuted, banded) sparse symmetric matrix."""
    A = A.tocoo()
    m = A.shape[0]
    if m == 0:
        return 0
    bw = int(np.max(np.abs(A.row - A.col))) if A.nnz else 0
    band = np.zeros((bw + 1, m))
    mask = A.row >= A.col
    band[A.row[mask] - A.col[mask], A.col[mask]] += A.data[mask]
    scale = float(np.max(np.abs(band))) or 1.0
    tol = tol_rel * scale
    bound = scale * (2 * bw + 2)
    vals = scipy.linalg.eigvals_banded(
        band, lower=True, select="v", select_range=(-bound, -tol)
    )
    return int(len(vals))


def morse_count_at(ms, bc, N):
    """Negative-eigenvalue count of the index form on the N-cell P1 space."""
    A = _assemble_index_form(ms, N)
    Z = bc.subspace()
    C = _boundary_restriction(ms.n, N, Z)
    AZ = (C.T @ A @ C).tocoo()
    perm = _snake_permutation(ms.n, N, Z.shape[1])
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    AP = scipy.sparse.coo_matrix(
        (AZ.data, (inv[AZ.row], inv[AZ.col])), shape=AZ.shape
    ).tocsr()
    return _count_negative_banded(AP)


def discrete_morse_index(ms, bc, N=48, max_doublings=7):
    """Morse index of the Morse-Sturm system, stable over two mesh doublings.

    The P1 spaces are nested under doubling, so counts are nondecreasing and
    converge to the true index; the first count repeated three times in a
    row is returned. Raises ConvergenceError if the budget is exhausted.
    """
    counts = [morse_count_at(ms, bc, N)]
    for k in range(1, max_doublings + 1):
        counts.append(morse_count_at(ms, bc, N * 2**k))
        if len(counts) >= 3 and counts[-1] == counts[-2] == counts[-3]:
            return counts[-1]
    raise ConvergenceError(
        f"Morse count did not stabilize (counts {counts} at base N={N})"
    )
