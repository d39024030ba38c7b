"""Pure numpy/scipy implementations of the propagation kernels.

These mirror the compiled routines in ``_fast.pyx`` exactly; the test suite
checks both backends agree to roundoff on random generator batches.
"""

import numpy as np
import scipy.linalg

IMPLEMENTATION = "python"


def expm(a):
    """Matrix exponential of a single square matrix."""
    return scipy.linalg.expm(np.asarray(a, dtype=float))


def propagate(gens, dts):
    """Compose per-step exponentials of generator matrices.

    Parameters
    ----------
    gens : (N, m, m) array
        Generator matrix of each step (already evaluated at the step's
        midpoint).
    dts : (N,) array
        Step sizes.

    Returns
    -------
    (N+1, m, m) array
        Cumulative products ``psi_k``, with ``psi_0 = I`` and
        ``psi_{k+1} = expm(dts[k] * gens[k]) @ psi_k``.
    """
    gens = np.asarray(gens, dtype=float)
    dts = np.asarray(dts, dtype=float)
    n_steps, m, _ = gens.shape
    out = np.empty((n_steps + 1, m, m))
    out[0] = np.eye(m)
    for k in range(n_steps):
        out[k + 1] = scipy.linalg.expm(dts[k] * gens[k]) @ out[k]
    return out
