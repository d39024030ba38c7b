"""Seeded randomized suites driving the executable theorems end to end.

Each suite maps (trials, seed) to a list of TheoremReports. Instance
generation is deterministic in (seed, trial), so runs are reproducible,
failures can be replayed by trial index, and parallel execution returns
exactly the serial output. The same suites back the command-line
``verify`` subcommand and the acceptance tests.
"""

from __future__ import annotations

from functools import partial

import numpy as np

from . import theorems as thm
from .flows import (
    BoundaryCondition,
    CoefficientPath,
    MorseSturmSystem,
    boundary_lagrangian,
    c_of_Z,
    discrete_morse_index,
    integrate_fundamental,
    morse_sturm_to_hamiltonian,
)
from .indices import clm_index
from .paths import (
    ClosedFormPath,
    FlowLeg,
    FlowPath,
    ReparametrizedPath,
    graph_leg,
    pair_against_constant,
    rotation_path,
)
from .spectral import constant_family, spectral_flow
from .symplectic import (
    double_space,
    random_lagrangian,
    random_symmetric,
    random_symplectic_matrix,
    standard_space,
)
from .theorems import TheoremReport

__all__ = ["SUITES", "run_suite", "summarize"]

FLOW_CELLS = 384


def _rng(seed, trial):
    return np.random.default_rng([int(seed), int(trial)])


def _poly_coefficient(rng, dim, T, scale=0.8, degree=2):
    coeffs = [random_symmetric(dim, rng, scale / (k + 1.0)) for k in range(degree + 1)]
    return CoefficientPath.from_polynomial(coeffs, (0.0, T))


def _psd_coefficient(rng, dim, T, floor=0.2, scale=0.7):
    """W(t)^T W(t) + floor * Id with W affine in t; positive definite on [0, T]."""
    W0 = rng.standard_normal((dim, dim)) * scale
    W1 = rng.standard_normal((dim, dim)) * (scale / max(T, 1.0))

    def fun(t):
        W = W0 + t * W1
        return W.T @ W + floor * np.eye(dim)

    return CoefficientPath.from_callable(fun, (0.0, T), dim)


def _random_flow(rng, n, T, scale=0.8, cells=FLOW_CELLS):
    path = _poly_coefficient(rng, 2 * n, T, scale)
    return FlowPath(integrate_fundamental(path, cells))


def _plus_flow(rng, n, T, cells=FLOW_CELLS):
    path = _psd_coefficient(rng, 2 * n, T)
    return FlowPath(integrate_fundamental(path, cells))


# ---------------------------------------------------------------------------
# single trials (module level so process pools can pickle them)
# ---------------------------------------------------------------------------


def alternation_trial(trial, seed, n_max=3):
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    T = float(rng.uniform(0.4, 2.5))
    psi = _random_flow(rng, n, T)
    leg = FlowLeg(psi, random_lagrangian(sp, rng))
    mu1 = random_lagrangian(sp, rng)
    mu2 = random_lagrangian(sp, rng)
    return thm.alternation_bound(leg, mu1, mu2)


def zeros_trial(trial, seed, n_max=2):
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    T = float(rng.uniform(0.8, 3.0))
    psi = _plus_flow(rng, n, T)
    leg = FlowLeg(psi, random_lagrangian(sp, rng))
    mu1 = random_lagrangian(sp, rng)
    mu2 = random_lagrangian(sp, rng)
    a = float(rng.uniform(0.0, 0.3 * T))
    b = float(rng.uniform(0.6 * T, T))
    return thm.zeros_theorem(leg, mu1, mu2, subinterval=(a, b))


def nonoscillation_trial(trial, seed, n_max=2):
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    T = float(rng.uniform(1.0, 4.0))
    B = _psd_coefficient(rng, n, T, floor=0.3)
    if trial % 3 == 0:
        A = np.zeros((n, n))
    else:
        V0 = rng.standard_normal((n, n)) * 0.6
        V1 = rng.standard_normal((n, n)) * (0.3 / T)

        def A(t, _V0=V0, _V1=V1):
            V = _V0 + t * _V1
            return -(V.T @ V)

    return thm.nonoscillation(A, B, T, random_lagrangian(sp, rng))


def comparison_trial(trial, seed, n_max=2):
    """Hypothesis-filtered draw; failed hypotheses come back as skips."""
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    T = float(rng.uniform(0.1, 0.8))
    psi = _plus_flow(rng, n, T)
    L1 = random_lagrangian(sp, rng)
    L2 = random_lagrangian(sp, rng)
    L3 = random_lagrangian(sp, rng)
    return thm.comparison_principle(L1, L2, L3, psi)


def iteration_trial(trial, seed, n_max=2):
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    T = float(rng.uniform(0.3, 2.0))
    psi = _random_flow(rng, n, T)
    m = 2 + trial % 4
    return thm.iteration_bounds(psi, m)


def cz_maslov_trial(trial, seed, n_max=2):
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    T = float(rng.uniform(0.4, 2.5))
    psi = _random_flow(rng, n, T)
    L = random_lagrangian(sp, rng)
    return thm.cz_maslov_bound(L, L, psi)


def oscillation_trial(trial, seed, n_max=2):
    """Potential dominating the harmonic reference; the bound must hold."""
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    omega = float(rng.uniform(0.6, 1.6))
    T = float(rng.uniform(1.0, 3.0)) * 2.0 * np.pi / omega
    W = rng.standard_normal((n, n)) * 0.5

    def V(t, _W=W, _om=omega, _T=T):
        bump = np.sin(np.pi * t / _T) ** 2
        return _om**2 * np.eye(n) + bump * (_W.T @ _W)

    return thm.oscillation_bound(V, omega, T)


def index_theorem_trial(trial, seed, n_max=2, cells=48):
    """Discrete Morse index == iota(L_Z, Gr psi) - c(Z) on a random system."""
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    T = float(rng.uniform(0.5, 5.0))
    W = rng.standard_normal((n, n))
    P = W.T @ W + 0.4 * np.eye(n)
    Q0 = rng.standard_normal((n, n)) * 0.4
    Q1 = rng.standard_normal((n, n)) * (0.2 / T)
    R0 = random_symmetric(n, rng, 0.8)
    R1 = random_symmetric(n, rng, 0.5 / T)
    R2 = random_symmetric(n, rng, 0.3 / T**2)
    ms = MorseSturmSystem(
        P=P,
        Q=lambda t, _a=Q0, _b=Q1: _a + t * _b,
        R=lambda t, _a=R0, _b=R1, _c=R2: _a + t * _b + t * t * _c,
        T=T, n=n,
    )
    bc_name = ("dirichlet", "neumann", "periodic")[trial % 3]
    bc = getattr(BoundaryCondition, bc_name)(n)
    morse = discrete_morse_index(ms, bc, N=cells)
    sol = integrate_fundamental(morse_sturm_to_hamiltonian(ms), 1024)
    leg = graph_leg(FlowPath(sol))
    clm = clm_index(pair_against_constant(boundary_lagrangian(bc), leg)).value
    c = c_of_Z(bc)
    return TheoremReport(
        theorem="index_theorem",
        instance={"n": n, "T": T, "bc": bc_name},
        left=morse,
        right=clm - c,
        verdict=morse == clm - c,
        diagnostics={"clm": clm, "c": c},
    )


def ordered_comparison_trial(trial, seed, n_max=2, cells=48):
    """Pointwise-ordered potentials give ordered CLM and ordered Morse counts."""
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    T = float(rng.uniform(0.8, 4.0))
    R2_0 = random_symmetric(n, rng, 0.8)
    R2_1 = random_symmetric(n, rng, 0.4 / T)
    D = rng.standard_normal((n, n)) * 0.7
    D = D.T @ D

    def R_small(t, _a=R2_0, _b=R2_1):
        return _a + t * _b

    def R_large(t, _d=D):
        return R_small(t) + _d

    bc = BoundaryCondition.dirichlet(n)
    values = {}
    for tag, R in (("larger", R_large), ("smaller", R_small)):
        ms = MorseSturmSystem(P=np.eye(n), Q=np.zeros((n, n)), R=R, T=T, n=n)
        morse = discrete_morse_index(ms, bc, N=cells)
        sol = integrate_fundamental(morse_sturm_to_hamiltonian(ms), 1024)
        leg = graph_leg(FlowPath(sol))
        clm = clm_index(pair_against_constant(boundary_lagrangian(bc), leg)).value
        values[tag] = (morse, clm)
    (m1, c1), (m2, c2) = values["larger"], values["smaller"]
    return TheoremReport(
        theorem="ordered_comparison",
        instance={"n": n, "T": T},
        left=(m1, c1),
        right=(m2, c2),
        verdict=m1 <= m2 and c1 <= c2,
        diagnostics={"morse_pair": (m1, m2), "clm_pair": (c1, c2)},
    )


def spectral_agreement_trial(trial, seed, n_max=2):
    """-spfl of the straight-line family equals iota(L, Gr psi) of the flow."""
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    T = float(rng.uniform(0.5, 2.0))
    C = _poly_coefficient(rng, 2 * n, T, scale=0.9, degree=1)
    dsp = double_space(standard_space(n))
    L = random_lagrangian(dsp, rng)
    fam = constant_family(C, n, T, L)
    flow_value = spectral_flow(fam).value
    sol = integrate_fundamental(C, 1024)
    clm = clm_index(pair_against_constant(L, graph_leg(FlowPath(sol)))).value
    return TheoremReport(
        theorem="spectral_agreement",
        instance={"n": n, "T": T},
        left=-flow_value,
        right=clm,
        verdict=-flow_value == clm,
        diagnostics={"spfl": flow_value},
    )


def _axiom_report(name, n, left, right):
    return TheoremReport(
        theorem=name,
        instance={"n": n},
        left=left,
        right=right,
        verdict=left == right,
    )


def clm_reparametrization_trial(trial, seed, n_max=3):
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    T = float(rng.uniform(0.5, 2.5))
    psi = _random_flow(rng, n, T)
    L = random_lagrangian(sp, rng)
    ref = random_lagrangian(sp, rng)
    alpha = float(rng.uniform(0.5, 2.0))
    scale = np.expm1(alpha)

    def phi(t, _T=T, _a=alpha, _s=scale):
        return _T * np.expm1(_a * t / _T) / _s

    def dphi(t, _T=T, _a=alpha, _s=scale):
        return _a * np.exp(_a * t / _T) / _s

    warped = ReparametrizedPath(psi, phi, dphi, (0.0, T))
    base = clm_index(pair_against_constant(ref, FlowLeg(psi, L))).value
    rep = clm_index(pair_against_constant(ref, FlowLeg(warped, L))).value
    return _axiom_report("clm_reparametrization", n, rep, base)


def clm_additivity_trial(trial, seed, n_max=3):
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    T = float(rng.uniform(0.5, 2.5))
    psi = _random_flow(rng, n, T)
    L = random_lagrangian(sp, rng)
    ref = random_lagrangian(sp, rng)
    c = float(rng.uniform(0.25 * T, 0.75 * T))
    leg = FlowLeg(psi, L)
    whole = clm_index(pair_against_constant(ref, leg)).value
    first = clm_index(pair_against_constant(ref, leg.restricted(0.0, c))).value
    second = clm_index(pair_against_constant(ref, leg.restricted(c, T))).value
    return _axiom_report("clm_additivity", n, whole, first + second)


def clm_invariance_trial(trial, seed, n_max=3):
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    T = float(rng.uniform(0.5, 2.5))
    psi = _random_flow(rng, n, T)
    L = random_lagrangian(sp, rng)
    ref = random_lagrangian(sp, rng)
    g = random_symplectic_matrix(sp, rng)
    ginv = np.linalg.inv(g)
    conj = ClosedFormPath(
        sp, (0.0, T),
        lambda t: g @ psi.value(t) @ ginv,
        lambda t: g @ psi.generator(t) @ ginv,
    )
    base = clm_index(pair_against_constant(ref, FlowLeg(psi, L))).value
    moved = clm_index(pair_against_constant(g @ ref, FlowLeg(conj, g @ L))).value
    return _axiom_report("clm_invariance", n, moved, base)


def clm_rs_trial(trial, seed, n_max=3):
    """iota_CLM(l1, l2) = iota_RS - (h(b) - h(a)) / 2 on flow-driven pairs."""
    from .indices import rs_index
    from .symplectic import intersection

    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    T = float(rng.uniform(0.4, 2.2))
    psi = _random_flow(rng, n, T)
    L = random_lagrangian(sp, rng)
    ref = random_lagrangian(sp, rng)
    pair = pair_against_constant(ref, FlowLeg(psi, L))
    clm = clm_index(pair).value
    rs = rs_index(pair).value
    ha = intersection(ref, L)[0]
    hb = intersection(ref, psi.value(T) @ L)[0]
    return _axiom_report("clm_rs", n, float(clm), rs - 0.5 * (hb - ha))


def clm_loop_trial(trial, seed, n_max=3):
    """The index of a closed Lagrangian loop is reference-independent."""
    rng = _rng(seed, trial)
    n = 1 + trial % n_max
    sp = standard_space(n)
    k = 1 + trial % 2
    g = random_symplectic_matrix(sp, rng)
    ginv = np.linalg.inv(g)
    rot = rotation_path(n, (0.0, k * np.pi))
    loop = ClosedFormPath(
        sp, (0.0, k * np.pi),
        lambda t: g @ rot.value(t) @ ginv,
        lambda t: g @ rot.generator(t) @ ginv,
    )
    L = random_lagrangian(sp, rng)
    leg = FlowLeg(loop, g @ L)
    mu1 = random_lagrangian(sp, rng)
    mu2 = random_lagrangian(sp, rng)
    v1 = clm_index(pair_against_constant(mu1, leg)).value
    v2 = clm_index(pair_against_constant(mu2, leg)).value
    return _axiom_report("clm_loop", n, v1, v2)


def focal_trial(trial, seed, n_max=2):
    from .applications import FocalSetup, conjugate_focal_comparison

    rng = _rng(seed, trial)
    n = max(2, min(int(n_max), 3))
    G = np.diag(np.where(rng.random(n) < 0.5, -1.0, 1.0))
    p = int(rng.integers(0, n + 1))
    tau = np.eye(n)[:, :p]
    M = rng.standard_normal((n, n))
    S = np.linalg.solve(G, 0.5 * (M + M.T))
    R = np.linalg.solve(G, random_symmetric(n, rng, 0.9))
    T = float(rng.uniform(0.5, 3.5))
    setup = FocalSetup(G, tau, S)
    return conjugate_focal_comparison(setup, R, (0.0, T))


SUITES = {
    "alternation": alternation_trial,
    "zeros": zeros_trial,
    "nonoscillation": nonoscillation_trial,
    "comparison": comparison_trial,
    "iteration": iteration_trial,
    "cz-maslov": cz_maslov_trial,
    "oscillation": oscillation_trial,
    "index-theorem": index_theorem_trial,
    "ordered-comparison": ordered_comparison_trial,
    "spectral-agreement": spectral_agreement_trial,
    "clm-reparametrization": clm_reparametrization_trial,
    "clm-additivity": clm_additivity_trial,
    "clm-invariance": clm_invariance_trial,
    "clm-loop": clm_loop_trial,
    "clm-rs": clm_rs_trial,
    "focal": focal_trial,
}


def run_suite(name, trials, seed, n_max=None, jobs=1):
    """Run a named suite; with jobs > 1 trials run in a process pool."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    fun = SUITES[name]
    kwargs = {} if n_max is None else {"n_max": n_max}
    worker = partial(fun, seed=seed, **kwargs)
    if jobs <= 1 or trials <= 1:
        reports = [worker(trial) for trial in range(trials)]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(worker, range(trials)))
    for trial, rep in enumerate(reports):
        rep.instance["trial"] = trial
    return reports


def summarize(reports):
    """Aggregate counts for the one-line summary of a suite run."""
    passes = sum(1 for r in reports if r.verdict and not r.skipped)
    skips = sum(1 for r in reports if r.skipped)
    failures = sum(1 for r in reports if not r.verdict and not r.skipped)
    return {
        "theorem": reports[0].theorem if reports else "",
        "trials": len(reports),
        "passes": passes,
        "skips": skips,
        "failures": failures,
    }
