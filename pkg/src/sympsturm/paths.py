"""Paths of symplectic matrices and of Lagrangian subspaces.

A SymplecticPath wraps value/generator evaluation on an interval; the
generator X(t) = psi'(t) psi(t)^{-1} is what crossing forms consume, so
the algebra below (products, inverses, constant conjugation, graphs in the
double space, periodic iteration, reparametrization) tracks generators
through each construction:

    (phi psi)'(phi psi)^{-1} = X_phi + phi X_psi phi^{-1}
    (psi^{-1})' (psi^{-1})^{-1} = -psi^{-1} X_psi psi
    Gr psi = diag(Id, psi) Delta  with generator diag(0, X_psi).

A LagrangianPath is a frame-valued path; flow-driven legs remember the
driving SymplecticPath, which makes their crossing forms exact. Legs
without a generator fall back to finite differences in the engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import FrameError
from .flows import FundamentalSolution
from .symplectic import (
    SymplecticSpace,
    double_space,
    lagrangian_frame,
    standard_space,
)


class SymplecticPath:
    """Base class: value(t) is symplectic, generator(t) = psi' psi^{-1}."""

    space: SymplecticSpace
    interval: tuple

    def value(self, t):
        raise NotImplementedError

    def generator(self, t):
        raise NotImplementedError

    def restricted(self, a, b):
        return RestrictedPath(self, (a, b))

    def endpoint(self):
        return self.value(self.interval[1])

    def suggested_grid(self):
        """Detection grid hint (cells), or None for the engine default."""
        return None


@dataclass(eq=False)
class FlowPath(SymplecticPath):
    """Adapter around a FundamentalSolution."""

    sol: FundamentalSolution

    def __post_init__(self):
        self.space = self.sol.space
        self.interval = self.sol.interval

    def value(self, t):
        return self.sol(t)

    def generator(self, t):
        return self.sol.generator_at(t)

    def suggested_grid(self):
        return len(self.sol.grid) - 1


@dataclass(eq=False)
class ClosedFormPath(SymplecticPath):
    """Explicit value and generator callables."""

    space: SymplecticSpace
    interval: tuple
    value_fun: object
    generator_fun: object

    def value(self, t):
        return np.asarray(self.value_fun(t), dtype=float)

    def generator(self, t):
        return np.asarray(self.generator_fun(t), dtype=float)


def rotation_path(n, interval):
    """t -> e^{t J0}, the flow of B = Id; closed-form cos/sin blocks."""
    space = standard_space(n)
    J = space.J

    def val(t, _n=n, _J=J):
        return np.cos(t) * np.eye(2 * _n) + np.sin(t) * _J

    return ClosedFormPath(space, tuple(interval), val, lambda t: J)


def constant_symplectic_path(space, M, interval):
    M = np.asarray(M, dtype=float)
    Z = np.zeros_like(M)
    return ClosedFormPath(space, tuple(interval), lambda t: M, lambda t: Z)


@dataclass(eq=False)
class ProductPath(SymplecticPath):
    """t -> left(t) @ right(t)."""

    left: SymplecticPath
    right: SymplecticPath

    def __post_init__(self):
        if self.left.interval != self.right.interval:
            raise FrameError("product factors must share the interval")
        self.space = self.left.space
        self.interval = self.left.interval

    def value(self, t):
        return self.left.value(t) @ self.right.value(t)

    def generator(self, t):
        L = self.left.value(t)
        return self.left.generator(t) + L @ self.right.generator(t) @ np.linalg.inv(L)

    def suggested_grid(self):
        hints = [g for g in (self.left.suggested_grid(), self.right.suggested_grid()) if g]
        return max(hints) if hints else None


@dataclass(eq=False)
class InversePath(SymplecticPath):
    inner: SymplecticPath

    def __post_init__(self):
        self.space = self.inner.space
        self.interval = self.inner.interval

    def value(self, t):
        return np.linalg.inv(self.inner.value(t))

    def generator(self, t):
        Vi = self.value(t)
        return -Vi @ self.inner.generator(t) @ np.linalg.inv(Vi)


@dataclass(eq=False)
class GraphFlowPath(SymplecticPath):
    """t -> diag(Id, psi(t)) in the double space (-omega) x omega.

    Applying it to the diagonal frame gives the graph path Gr psi(t).
    """

    inner: SymplecticPath

    def __post_init__(self):
        self.space = double_space(self.inner.space)
        self.interval = self.inner.interval
        self._d = self.inner.space.dim

    def value(self, t):
        d = self._d
        out = np.zeros((2 * d, 2 * d))
        out[:d, :d] = np.eye(d)
        out[d:, d:] = self.inner.value(t)
        return out

    def generator(self, t):
        d = self._d
        out = np.zeros((2 * d, 2 * d))
        out[d:, d:] = self.inner.generator(t)
        return out

    def suggested_grid(self):
        return self.inner.suggested_grid()


@dataclass(eq=False)
class IteratedPath(SymplecticPath):
    """Periodic extension psi(t - kT) psi(T)^k on [0, mT]."""

    inner: SymplecticPath
    m: int

    def __post_init__(self):
        a, b = self.inner.interval
        if abs(a) > 1e-14 * max(1.0, abs(b)):
            raise FrameError("iteration assumes the inner path starts at t = 0")
        if self.m < 1:
            raise FrameError("need m >= 1")
        self.space = self.inner.space
        self.interval = (0.0, self.m * b)
        self._T = b
        P = self.inner.value(b)
        self._powers = [np.eye(P.shape[0])]
        for _ in range(self.m):
            self._powers.append(P @ self._powers[-1])

    def _split(self, t):
        k = int(np.floor(t / self._T + 1e-13))
        k = min(max(k, 0), self.m - 1)
        return t - k * self._T, k

    def value(self, t):
        tau, k = self._split(t)
        return self.inner.value(tau) @ self._powers[k]

    def generator(self, t):
        tau, _ = self._split(t)
        return self.inner.generator(tau)

    def suggested_grid(self):
        g = self.inner.suggested_grid()
        return None if g is None else self.m * g


@dataclass(eq=False)
class ReparametrizedPath(SymplecticPath):
    """t -> inner(phi(t)) for an increasing C^1 bijection phi onto the interval."""

    inner: SymplecticPath
    phi: object
    dphi: object
    interval: tuple

    def __post_init__(self):
        self.space = self.inner.space

    def value(self, t):
        return self.inner.value(self.phi(t))

    def generator(self, t):
        return self.dphi(t) * self.inner.generator(self.phi(t))


@dataclass(eq=False)
class RestrictedPath(SymplecticPath):
    inner: SymplecticPath
    interval: tuple

    def suggested_grid(self):
        return self.inner.suggested_grid()

    def __post_init__(self):
        a0, b0 = self.inner.interval
        a, b = self.interval
        pad = 1e-12 * max(1.0, abs(b0 - a0))
        if a < a0 - pad or b > b0 + pad or not b > a:
            raise FrameError(f"restriction [{a}, {b}] leaves [{a0}, {b0}]")
        self.space = self.inner.space

    def value(self, t):
        return self.inner.value(t)

    def generator(self, t):
        return self.inner.generator(t)


# ---------------------------------------------------------------------------
# Lagrangian-valued paths
# ---------------------------------------------------------------------------


class LagrangianPath:
    """A path of Lagrangian frames; subclasses decide how frames arise."""

    space: SymplecticSpace
    interval: tuple

    def frame(self, t):
        raise NotImplementedError

    def generator(self, t):
        """Driving sp(V) generator if the leg moves by a flow, else None."""
        return None

    def suggested_grid(self):
        return None

    def restricted(self, a, b):
        raise NotImplementedError


@dataclass(eq=False)
class ConstantLeg(LagrangianPath):
    space: SymplecticSpace
    seed: np.ndarray
    interval: tuple

    def __post_init__(self):
        self.seed = lagrangian_frame(self.space, self.seed).matrix

    def frame(self, t):
        return self.seed

    def generator(self, t):
        return np.zeros((self.space.dim, self.space.dim))

    def restricted(self, a, b):
        return ConstantLeg(self.space, self.seed, (a, b))


@dataclass(eq=False)
class FlowLeg(LagrangianPath):
    """t -> path(t) @ seed, driven by a SymplecticPath."""

    path: SymplecticPath
    seed: np.ndarray

    def __post_init__(self):
        self.space = self.path.space
        self.interval = self.path.interval
        self.seed = lagrangian_frame(self.space, self.seed).matrix

    def frame(self, t):
        return self.path.value(t) @ self.seed

    def generator(self, t):
        return self.path.generator(t)

    def suggested_grid(self):
        return self.path.suggested_grid()

    def restricted(self, a, b):
        return FlowLeg(self.path.restricted(a, b), self.seed)


@dataclass(eq=False)
class SampledLeg(LagrangianPath):
    """Frame samples joined by interpolation of the spanned subspaces.

    Interpolation acts on orthonormalized frames through a QR retraction;
    there is no generator, so crossing forms fall back to finite
    differences. Samples must be dense enough that consecutive frames stay
    within the injectivity of the retraction (checked loosely).
    """

    space: SymplecticSpace
    ts: np.ndarray
    frames: list

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=float)
        if self.ts.ndim != 1 or len(self.ts) < 2 or np.any(np.diff(self.ts) <= 0):
            raise FrameError("sample times must be strictly increasing")
        if len(self.frames) != len(self.ts):
            raise FrameError("need one frame per sample time")
        self.frames = [
            lagrangian_frame(self.space, F).orthonormalized().matrix for F in self.frames
        ]
        self.interval = (float(self.ts[0]), float(self.ts[-1]))

    def suggested_grid(self):
        return max(len(self.ts) - 1, 64)

    def frame(self, t):
        k = int(np.clip(np.searchsorted(self.ts, t) - 1, 0, len(self.ts) - 2))
        w = (t - self.ts[k]) / (self.ts[k + 1] - self.ts[k])
        w = min(max(w, 0.0), 1.0)
        A, B = self.frames[k], self.frames[k + 1]
        # align B's basis with A's before blending (polar alignment)
        M = A.T @ B
        U, _, Vt = np.linalg.svd(M)
        Bal = B @ (U @ Vt).T
        blend = (1.0 - w) * A + w * Bal
        Q, R = np.linalg.qr(blend)
        if np.min(np.abs(np.diag(R))) < 1e-10:
            raise FrameError("sampled frames too far apart to interpolate")
        return Q

    def restricted(self, a, b):
        keep = (self.ts >= a - 1e-12) & (self.ts <= b + 1e-12)
        ts = self.ts[keep]
        frames = [F for F, k in zip(self.frames, keep) if k]
        if len(ts) == 0 or ts[0] > a + 1e-12:
            ts = np.concatenate([[a], ts])
            frames = [self.frame(a)] + frames
        if ts[-1] < b - 1e-12:
            ts = np.concatenate([ts, [b]])
            frames = frames + [self.frame(b)]
        return SampledLeg(self.space, ts, frames)


def graph_leg(psi):
    """Gr psi(t) as a flow leg of the double space (seed = diagonal)."""
    d = psi.space.dim
    delta = np.vstack([np.eye(d), np.eye(d)])
    return FlowLeg(GraphFlowPath(psi), delta)


def diagonal_frame(space):
    d = space.dim
    return np.vstack([np.eye(d), np.eye(d)])


def omega_graph_frame(space, omega):
    """Graph of omega * Id (omega = +-1) as a double-space frame."""
    if omega not in (1.0, -1.0, 1, -1):
        raise FrameError("only real omega = +1 or -1 is supported")
    d = space.dim
    return np.vstack([np.eye(d), float(omega) * np.eye(d)])


def pair_frame(L1, L2):
    """L1 x L2 as a frame of the double space (block diagonal stacking)."""
    L1 = np.asarray(L1, dtype=float)
    L2 = np.asarray(L2, dtype=float)
    top = np.hstack([L1, np.zeros((L1.shape[0], L2.shape[1]))])
    bot = np.hstack([np.zeros((L2.shape[0], L1.shape[1])), L2])
    return np.vstack([top, bot])


@dataclass(eq=False)
class PairPath:
    """Two Lagrangian legs over a common interval, ready for the engine."""

    leg1: LagrangianPath
    leg2: LagrangianPath

    def __post_init__(self):
        if not self.leg1.space.same_as(self.leg2.space):
            raise FrameError("legs live in different symplectic spaces")
        a1, b1 = self.leg1.interval
        a2, b2 = self.leg2.interval
        if abs(a1 - a2) > 1e-12 * max(1.0, abs(b1)) or abs(b1 - b2) > 1e-12 * max(1.0, abs(b1)):
            raise FrameError("legs must share the parameter interval")
        self.space = self.leg1.space
        self.interval = self.leg1.interval

    def restricted(self, a, b):
        return PairPath(self.leg1.restricted(a, b), self.leg2.restricted(a, b))


def pair_against_constant(reference, leg):
    """PairPath with a constant first leg (the usual iota(L0, ell(t)) setup)."""
    ref = ConstantLeg(leg.space, reference, leg.interval)
    return PairPath(ref, leg)
