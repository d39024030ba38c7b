"""Symplectic vector spaces, Lagrangian frames and the linear algebra on them.

Conventions
-----------
A symplectic space is (R^{2n}, omega) with omega(x, y) = <form @ x, y> for an
antisymmetric invertible ``form`` matrix. The standard space uses

    form = J0 = [[0, -Id], [Id, 0]]

in (p, q) coordinates, so omega((p1,q1),(p2,q2)) = <p1,q2> - <q1,p2> and in
particular omega((1,0),(0,1)) = 1 for n = 1. The compatible complex structure
J comes from the polar decomposition of ``form`` (J = J0 itself in the
standard case).

Subspaces are represented by frames: 2n x k matrices whose columns span the
subspace. Lagrangian frames have k = n, full column rank and isotropic span.
All rank decisions use a relative SVD threshold (RANK_TOL times the largest
singular value); inertia counts use an absolute eigenvalue threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import FrameError, TransversalityError

RANK_TOL = 1e-8
INERTIA_TOL = 1e-10


class SymplecticSpace:
    """A finite-dimensional real symplectic vector space.

    Parameters
    ----------
    form : (2n, 2n) array
        Antisymmetric invertible matrix of the symplectic form under
        omega(x, y) = <form @ x, y>.
    """

    def __init__(self, form):
        form = np.asarray(form, dtype=float)
        if form.ndim != 2 or form.shape[0] != form.shape[1]:
            raise FrameError("symplectic form must be a square matrix")
        if form.shape[0] == 0 or form.shape[0] % 2 != 0:
            raise FrameError("symplectic form must have positive even dimension")
        if np.max(np.abs(form + form.T)) > 1e-12 * max(1.0, np.max(np.abs(form))):
            raise FrameError("symplectic form must be antisymmetric")
        # Invertibility check; also feeds the polar decomposition below.
        sv = np.linalg.svd(form, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0]:
            raise FrameError("symplectic form is numerically singular")
        self.form = form
        self.dim = form.shape[0]
        self.n = self.dim // 2
        self._J = None

    @property
    def J(self):
        """Compatible complex structure: J^2 = -Id, omega(x,y) = <J x, y>_P.

        Computed once from the polar decomposition form = J @ H with H
        symmetric positive definite; for the standard space J equals J0.
        """
        if self._J is None:
            # H = (form^T form)^{1/2} commutes with the antisymmetric form,
            # so J = form @ H^{-1} is orthogonal with J^2 = -Id.
            h = scipy.linalg.sqrtm(self.form.T @ self.form).real
            self._J = self.form @ np.linalg.inv(h)
        return self._J

    def omega(self, x, y):
        """Evaluate the form on two vectors (or batched columns)."""
        return np.asarray(x).T @ self.form.T @ np.asarray(y)

    def pairing(self, X, Y):
        """Gram matrix of omega between the columns of X and of Y."""
        return np.asarray(X).T @ self.form.T @ np.asarray(Y)

    def check_vectors(self, X):
        if np.asarray(X).shape[0] != self.dim:
            raise FrameError(
                f"frame has {np.asarray(X).shape[0]} rows, space dimension is {self.dim}"
            )

    def same_as(self, other):
        return self.dim == other.dim and np.allclose(self.form, other.form)

    def __repr__(self):
        return f"SymplecticSpace(dim={self.dim})"


def standard_space(n):
    """Standard symplectic R^{2n} in (p, q) coordinates."""
    if not isinstance(n, (int, np.integer)) or n <= 0:
        raise FrameError("n must be a positive integer")
    return SymplecticSpace(J0_matrix(n))


def J0_matrix(n):
    """The block matrix [[0, -Id], [Id, 0]] of size 2n."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def double_space(space):
    """(V x V, (-omega) x omega), the home of graph Lagrangians."""
    d = space.dim
    form = np.zeros((2 * d, 2 * d))
    form[:d, :d] = -space.form
    form[d:, d:] = space.form
    return SymplecticSpace(form)


# ---------------------------------------------------------------------------
# rank-revealing subspace linear algebra (Euclidean inner product throughout)
# ---------------------------------------------------------------------------


def orthonormal_columns(A, tol=RANK_TOL):
    """Orthonormal basis of the column space of A (rank-revealing SVD)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] == 0:
        return A.reshape(A.shape[0], 0)
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[0], 0))
    r = int(np.sum(s > tol * s[0]))
    return u[:, :r]


def null_space(A, tol=RANK_TOL):
    """Orthonormal basis of the kernel of A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] == 0:
        return np.zeros((0, 0))
    u, s, vt = np.linalg.svd(A)
    smax = s[0] if s.size else 0.0
    r = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return vt[r:].T


def subspace_rank(A, tol=RANK_TOL):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0


def subspace_sum(A, B, tol=RANK_TOL):
    """Orthonormal basis of span(A) + span(B)."""
    return orthonormal_columns(np.hstack([np.atleast_2d(A), np.atleast_2d(B)]), tol)


def intersection(L1, L2, tol=RANK_TOL):
    """Intersection of two column spans.

    Returns ``(dim, basis)`` with an orthonormal (2n, dim) basis. Frames need
    not be orthonormal; the computation solves L1 a = L2 b via the kernel of
    [L1 | -L2].
    """
    L1 = np.atleast_2d(np.asarray(L1, dtype=float))
    L2 = np.atleast_2d(np.asarray(L2, dtype=float))
    if L1.shape[0] != L2.shape[0]:
        raise FrameError("frames live in spaces of different dimension")
    k1, k2 = L1.shape[1], L2.shape[1]
    if k1 == 0 or k2 == 0:
        return 0, np.zeros((L1.shape[0], 0))
    # Normalize columns so the SVD threshold is meaningful for ill-scaled input.
    Q1 = orthonormal_columns(L1, tol)
    Q2 = orthonormal_columns(L2, tol)
    if Q1.shape[1] == 0 or Q2.shape[1] == 0:
        return 0, np.zeros((L1.shape[0], 0))
    ker = null_space(np.hstack([Q1, -Q2]), tol)
    if ker.shape[1] == 0:
        return 0, np.zeros((L1.shape[0], 0))
    vecs = Q1 @ ker[: Q1.shape[1]]
    basis = orthonormal_columns(vecs, tol)
    return basis.shape[1], basis


def intersect_three(A, B, C, tol=RANK_TOL):
    """dim and basis of span(A) ∩ span(B) ∩ span(C)."""
    d, AB = intersection(A, B, tol)
    if d == 0:
        return 0, AB
    return intersection(AB, C, tol)


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LagrangianFrame:
    """A Lagrangian subspace as a 2n x n frame with its parent space."""

    space: SymplecticSpace
    matrix: np.ndarray

    def orthonormalized(self):
        return LagrangianFrame(self.space, orthonormal_columns(self.matrix))

    @property
    def n(self):
        return self.space.n


@dataclass(frozen=True, eq=False)
class IsotropicSubspace:
    """An isotropic subspace as a 2n x k frame (k <= n) with its parent space."""

    space: SymplecticSpace
    matrix: np.ndarray

    @property
    def k(self):
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """A symmetric form on a subspace, as a gram matrix over a stored basis."""

    gram: np.ndarray
    basis: np.ndarray

    def inertia(self, tol=INERTIA_TOL):
        return inertia(self.gram, tol)

    @property
    def dim(self):
        return self.gram.shape[0]


@dataclass(frozen=True)
class LagrangianCheck:
    ok: bool
    rank: int
    isotropy_defect: float


def is_lagrangian(space, matrix, tol=RANK_TOL):
    """Check the Lagrangian frame contract; returns diagnostics, never raises.

    ``ok`` requires shape (2n, n), full column rank at the relative SVD
    threshold and isotropy defect max|omega(col_i, col_j)| <= tol * scale.
    """
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    if M.shape[0] != space.dim or M.shape[1] != space.n:
        return LagrangianCheck(False, min(M.shape), float("nan"))
    rank = subspace_rank(M, tol)
    scale = max(1.0, float(np.max(np.abs(M))) ** 2 * float(np.max(np.abs(space.form))))
    defect = float(np.max(np.abs(space.pairing(M, M)))) if M.size else 0.0
    ok = rank == space.n and defect <= tol * scale
    return LagrangianCheck(ok, rank, defect)


def lagrangian_frame(space, matrix, tol=RANK_TOL):
    """Validate and wrap a Lagrangian frame, raising FrameError when invalid."""
    space.check_vectors(matrix)
    chk = is_lagrangian(space, matrix, tol)
    if not chk.ok:
        raise FrameError(
            f"not a Lagrangian frame: rank={chk.rank} (need {space.n}), "
            f"isotropy defect={chk.isotropy_defect:.3e}"
        )
    return LagrangianFrame(space, np.asarray(matrix, dtype=float))


def isotropic_subspace(space, matrix, tol=RANK_TOL):
    """Validate and wrap an isotropic frame (k <= n, full rank, isotropic)."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    space.check_vectors(M)
    k = M.shape[1]
    if k > space.n:
        raise FrameError(f"isotropic subspace dimension {k} exceeds n = {space.n}")
    if subspace_rank(M, tol) != k:
        raise FrameError("isotropic frame has linearly dependent columns")
    defect = float(np.max(np.abs(space.pairing(M, M)))) if M.size else 0.0
    scale = max(1.0, float(np.max(np.abs(M))) ** 2 * float(np.max(np.abs(space.form))))
    if defect > tol * scale:
        raise FrameError(f"subspace is not isotropic (defect {defect:.3e})")
    return IsotropicSubspace(space, M)


def horizontal_frame(n):
    """L_D = R^n x {0}: the Dirichlet / horizontal Lagrangian."""
    return np.vstack([np.eye(n), np.zeros((n, n))])


def vertical_frame(n):
    """L_N = {0} x R^n: the Neumann / vertical Lagrangian."""
    return np.vstack([np.zeros((n, n)), np.eye(n)])


def inertia(gram, tol=INERTIA_TOL):
    """(n_plus, n_zero, n_minus) of a symmetric matrix.

    Eigenvalues above +tol, within [-tol, +tol] and below -tol respectively;
    the input is symmetrized before the eigenvalue solve.
    """
    G = np.atleast_2d(np.asarray(gram, dtype=float))
    if G.shape[0] == 0:
        return (0, 0, 0)
    w = np.linalg.eigvalsh(0.5 * (G + G.T))
    n_plus = int(np.sum(w > tol))
    n_minus = int(np.sum(w < -tol))
    return (n_plus, G.shape[0] - n_plus - n_minus, n_minus)


def chart_form(space, L0, L1, L, tol=RANK_TOL):
    """The chart form Q(L0, L1; L) = omega(., T .) on L0, where L = graph(T).

    (L0, L1) must be a Lagrangian decomposition of the space and L must be
    transversal to L1, so that L = {v + T v : v in L0} for a unique linear
    T : L0 -> L1. The gram matrix is expressed in the basis given by the
    columns of L0; its kernel is L ∩ L0.
    """
    L0 = np.atleast_2d(np.asarray(L0, dtype=float))
    L1 = np.atleast_2d(np.asarray(L1, dtype=float))
    L = np.atleast_2d(np.asarray(L, dtype=float))
    for M in (L0, L1, L):
        space.check_vectors(M)
    n = space.n
    pair = np.hstack([L0, L1])
    sv = np.linalg.svd(pair, compute_uv=False)
    if sv[-1] <= tol * sv[0]:
        raise TransversalityError("(L0, L1) is not a Lagrangian decomposition")
    coeff = np.linalg.solve(pair, L)
    A, B = coeff[:n], coeff[n:]
    svA = np.linalg.svd(A, compute_uv=False)
    if svA[-1] <= tol * svA[0]:
        raise TransversalityError("L is not transversal to L1")
    T = B @ np.linalg.inv(A)
    gram = space.pairing(L0, L1 @ T)
    sym_defect = float(np.max(np.abs(gram - gram.T)))
    scale = max(1.0, float(np.max(np.abs(gram))))
    if sym_defect > 1e-6 * scale:
        raise FrameError(f"chart form is not symmetric (defect {sym_defect:.3e}); check inputs")
    return QuadraticForm(0.5 * (gram + gram.T), L0.copy())


def graph_lagrangian(space, M, tol=1e-8):
    """Frame [Id; M] of the graph of a symplectic map, in the double space.

    ``M`` must be symplectic for ``space`` (M^T form M = form); the result is
    Lagrangian in double_space(space).
    """
    M = np.asarray(M, dtype=float)
    d = space.dim
    if M.shape != (d, d):
        raise FrameError("graph_lagrangian expects a 2n x 2n matrix")
    defect = np.max(np.abs(M.T @ space.form @ M - space.form))
    if defect > tol * max(1.0, np.max(np.abs(M)) ** 2):
        raise FrameError(f"matrix is not symplectic (defect {defect:.3e})")
    return np.vstack([np.eye(d), M])


@dataclass(frozen=True, eq=False)
class Reduction:
    """Symplectic reduction data for an isotropic subspace I.

    V_I = I^omega ∩ I^perp (Euclidean perp), with orthonormal basis ``W``;
    ``space_red`` carries the restricted form W^T form W.
    """

    space: SymplecticSpace
    iso: np.ndarray
    W: np.ndarray
    space_red: SymplecticSpace

    def project(self, X, tol=RANK_TOL):
        """pi(X) = ((X + I) ∩ I^omega)/I in V_I coordinates."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        _, meet = intersection(X, self._omega_perp, tol)
        coords = self.W.T @ meet
        return orthonormal_columns(coords, tol)

    @property
    def _omega_perp(self):
        return self._operp

    def __post_init__(self):
        # omega-orthogonal of I: kernel of (form @ I)^T acting on vectors.
        operp = null_space((self.space.form @ self.iso).T)
        object.__setattr__(self, "_operp", operp)


def reduce_by_isotropic(space, iso, tol=RANK_TOL):
    """Build the symplectic reduction by an isotropic subspace."""
    I = np.atleast_2d(np.asarray(iso, dtype=float))
    isotropic_subspace(space, I, tol)  # validates
    operp = null_space((space.form @ I).T, tol)
    perp = null_space(I.T, tol)
    _, W = intersection(operp, perp, tol)
    k = I.shape[1]
    if W.shape[1] != space.dim - 2 * k:
        raise FrameError("reduction produced a space of unexpected dimension")
    form_red = W.T @ space.form @ W
    return Reduction(space, I, W, SymplecticSpace(form_red))


def symplectic_reduction(space, X, iso, tol=RANK_TOL):
    """Project a frame X into the reduced space V_I = I^omega ∩ I^perp.

    Returns ``(reduction, frame)`` where ``frame`` holds V_I coordinates of
    pi(X) = ((X + I) ∩ I^omega)/I. For Lagrangian X the result is Lagrangian
    in the reduced space, of dimension n - dim I.
    """
    red = reduce_by_isotropic(space, iso, tol)
    return red, red.project(X, tol)


# ---------------------------------------------------------------------------
# random elements and Darboux coordinates
# ---------------------------------------------------------------------------


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_unitary(n, rng):
    """Haar-ish unitary via QR of a complex Ginibre matrix with phase fix."""
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    Q = Q * (d / np.abs(d))
    return Q


def random_lagrangian(space, seed=None, tol=RANK_TOL):
    """A uniformly distributed Lagrangian frame (orthonormal columns).

    For the standard space the unitary group acts transitively on Lagrangians
    through orthosymplectic matrices [[A, -B], [B, A]]; a Haar unitary
    A + iB applied to the horizontal Lagrangian gives the frame [A; B].
    General spaces are reached through a Darboux basis.
    """
    rng = _as_rng(seed)
    n = space.n
    U = random_unitary(n, rng)
    frame_std = np.vstack([U.real, U.imag])
    if np.allclose(space.form, J0_matrix(n)):
        return frame_std
    Phi = darboux_basis(space, tol)
    return orthonormal_columns(Phi @ frame_std, tol)


def random_isotropic(space, k, seed=None):
    """A random isotropic subspace of dimension k (first k Lagrangian columns)."""
    L = random_lagrangian(space, seed)
    return L[:, :k]


def random_symmetric(n, rng, scale=1.0):
    A = rng.standard_normal((n, n))
    return scale * 0.5 * (A + A.T)


def random_symplectic_matrix(space, seed=None, scale=0.7):
    """exp(X) for a random X in sp(V, omega) (so the result is symplectic)."""
    rng = _as_rng(seed)
    S = random_symmetric(space.dim, rng, scale)
    X = np.linalg.solve(space.form, S)
    return scipy.linalg.expm(X)


def darboux_basis(space, tol=RANK_TOL):
    """Columns (e_1..e_n, f_1..f_n) with omega(e_i, f_j) = delta_ij.

    The returned Phi maps the standard space symplectically onto ``space``:
    Phi^T form Phi = J0.
    """
    n = space.n
    remaining = np.eye(space.dim)
    es, fs = [], []
    for _ in range(n):
        # Pick the best-paired direction pair in the leftover subspace.
        G = space.pairing(remaining, remaining)
        i, j = np.unravel_index(np.argmax(np.abs(G)), G.shape)
        if abs(G[i, j]) <= tol:
            raise FrameError("form is degenerate on the residual subspace")
        e = remaining[:, i]
        f = remaining[:, j] / G[i, j]
        es.append(e)
        fs.append(f)
        # Symplectic projection of the leftover vectors off span{e, f}.
        we = space.pairing(remaining, e.reshape(-1, 1)).ravel()
        wf = space.pairing(remaining, f.reshape(-1, 1)).ravel()
        remaining = remaining - np.outer(e, wf) + np.outer(f, we)
        remaining = orthonormal_columns(remaining, tol)
    Phi = np.column_stack(es + fs)
    defect = np.max(np.abs(Phi.T @ space.form @ Phi - J0_matrix(n)))
    if defect > 1e-8 * max(1.0, np.max(np.abs(Phi)) ** 2 * np.max(np.abs(space.form))):
        raise FrameError(f"Darboux construction failed (defect {defect:.3e})")
    return Phi
