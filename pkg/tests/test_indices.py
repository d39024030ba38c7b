"""Intersection indices against hand-derived oracles."""

import numpy as np
import pytest

from sympsturm.errors import IdenticallyDegenerateError
from sympsturm.flows import CoefficientPath, integrate_fundamental
from sympsturm.indices import (
    clm_index,
    cz_index,
    detect_crossings,
    hormander_index,
    iota_omega,
    iterate_flow,
    l_maslov_index,
    maslov_pair_index,
    plus_curve_report,
    rs_index,
    triple_index,
)
from sympsturm.paths import (
    ClosedFormPath,
    FlowLeg,
    FlowPath,
    constant_symplectic_path,
    pair_against_constant,
    rotation_path,
)
from sympsturm.symplectic import (
    horizontal_frame,
    intersection,
    random_lagrangian,
    random_symmetric,
    standard_space,
    vertical_frame,
)


def rotation_pair(n, T):
    psi = rotation_path(n, (0.0, T))
    L = horizontal_frame(n)
    return pair_against_constant(L, FlowLeg(psi, L))


def random_flow_path(rng, n, T, cells=384):
    coeffs = [random_symmetric(2 * n, rng, 0.9 / (k + 1)) for k in range(3)]
    return FlowPath(integrate_fundamental(CoefficientPath.from_polynomial(coeffs, (0.0, T)), cells))


# ---------------------------------------------------------------------------
# CLM and RS on the rotation oracle
# ---------------------------------------------------------------------------


def test_clm_rotation_values():
    assert clm_index(rotation_pair(1, np.pi)).value == 1
    assert clm_index(rotation_pair(1, 2 * np.pi)).value == 2
    # each crossing of the n = 2 rotation has multiplicity 2
    assert clm_index(rotation_pair(2, 2 * np.pi)).value == 4


def test_clm_constant_transversal_pair_is_zero():
    sp = standard_space(1)
    psi = constant_symplectic_path(sp, np.eye(2), (0.0, 1.0))
    pair = pair_against_constant(horizontal_frame(1), FlowLeg(psi, vertical_frame(1)))
    rep = clm_index(pair)
    assert rep.value == 0
    assert rep.crossings == []


def test_rs_rotation_values():
    # endpoint crossings carry half weight: 1/2 at 0 plus 1/2 at pi
    assert rs_index(rotation_pair(1, np.pi)).value == 1.0
    assert rs_index(rotation_pair(1, 0.5 * np.pi)).value == 0.5
    assert rs_index(rotation_pair(1, 2 * np.pi)).value == 2.0


def test_clm_rs_relation_on_random_flows():
    # iota_CLM(l1, l2) = iota_RS - (h(b) - h(a)) / 2 with h the crossing dims
    for trial in range(8):
        rng = np.random.default_rng([23, trial])
        n = 1 + trial % 3
        sp = standard_space(n)
        T = float(rng.uniform(0.4, 2.0))
        psi = random_flow_path(rng, n, T)
        ref, L = random_lagrangian(sp, rng), random_lagrangian(sp, rng)
        pair = pair_against_constant(ref, FlowLeg(psi, L))
        clm = clm_index(pair).value
        rs = rs_index(pair).value
        ha = intersection(ref, L)[0]
        hb = intersection(ref, psi.value(T) @ L)[0]
        assert clm == rs - 0.5 * (hb - ha)


# ---------------------------------------------------------------------------
# Conley-Zehnder and omega-indices
# ---------------------------------------------------------------------------


def test_cz_rotation_values():
    # Gr(e^{tJ0}) meets the diagonal exactly at t in 2 pi Z, multiplicity 2n
    assert cz_index(rotation_path(1, (0.0, np.pi))).value == 2
    assert cz_index(rotation_path(1, (0.0, 2 * np.pi))).value == 2
    assert cz_index(rotation_path(1, (0.0, 4 * np.pi))).value == 4


def test_cz_of_identity_path_raises():
    sp = standard_space(1)
    with pytest.raises(IdenticallyDegenerateError):
        cz_index(constant_symplectic_path(sp, np.eye(2), (0.0, 1.0)))


def test_iota_minus_one_rotation():
    # -1 enters the spectrum of e^{tJ0} only at odd multiples of pi
    assert iota_omega(rotation_path(1, (0.0, np.pi)), -1).value == 0
    assert iota_omega(rotation_path(1, (0.0, 2 * np.pi)), -1).value == 2


def test_bott_splitting_for_the_rotation():
    psi = rotation_path(1, (0.0, np.pi))
    doubled = iterate_flow(psi, 2)
    assert cz_index(doubled).value == \
        cz_index(psi).value + iota_omega(psi, -1).value


def test_l_maslov_identity_and_value():
    psi = rotation_path(1, (0.0, 2 * np.pi))
    L = horizontal_frame(1)
    double = l_maslov_index(L, psi).value
    direct = maslov_pair_index(L, L, psi).value
    assert double == direct == 2


def test_iterate_flow_knots_and_endpoint():
    rng = np.random.default_rng(3)
    psi = random_flow_path(rng, 1, 1.2)
    it = iterate_flow(psi, 3)
    assert it.interval == (0.0, pytest.approx(3.6))
    P = psi.value(1.2)
    np.testing.assert_allclose(it.value(3.6), P @ P @ P, atol=1e-9)
    # continuity at the first knot
    np.testing.assert_allclose(it.value(1.2 - 1e-9), it.value(1.2 + 1e-9), atol=1e-6)
    one = iterate_flow(psi, 1)
    np.testing.assert_allclose(one.value(0.7), psi.value(0.7), atol=1e-12)


# ---------------------------------------------------------------------------
# crossing detection corner cases
# ---------------------------------------------------------------------------


def lens_pair(delta, t0=0.4, half_width=1.0):
    """L_D against e^{phi(t) J} L_D with phi = pi + (t - t0)^2 - delta.

    For delta > 0 this has twin simple crossings at t0 -+ sqrt(delta) with
    opposite crossing-form signs; for delta = 0 a quadratic tangency.
    """
    sp = standard_space(1)
    J = sp.J

    def val(t):
        phi = np.pi + (t - t0) ** 2 - delta
        return np.cos(phi) * np.eye(2) + np.sin(phi) * J

    def gen(t):
        return 2.0 * (t - t0) * J

    psi = ClosedFormPath(sp, (t0 - half_width, t0 + half_width), val, gen)
    return pair_against_constant(horizontal_frame(1), FlowLeg(psi, horizontal_frame(1)))


def test_twin_crossings_resolved_inside_one_cell():
    # the twins sit 2e-4 apart, far below the default grid spacing
    pair = lens_pair(1e-8)
    cs = detect_crossings(pair)
    times = sorted(rec.t for rec in cs.crossings)
    assert len(times) == 2
    np.testing.assert_allclose(times, [0.4 - 1e-4, 0.4 + 1e-4], atol=1e-7)
    assert clm_index(pair).value == 0


def test_tangential_touch_contributes_zero():
    rep = clm_index(lens_pair(0.0))
    assert rep.value == 0


def test_plus_curve_report_rotation():
    psi = rotation_path(1, (0.0, np.pi))
    rep = plus_curve_report(horizontal_frame(1), FlowLeg(psi, horizontal_frame(1)))
    assert rep.is_plus
    assert rep.total_multiplicity == 2
    assert rep.clm_value == 1
    assert not rep.transversal_at_end


# ---------------------------------------------------------------------------
# triple and Hormander indices
# ---------------------------------------------------------------------------


def line(theta):
    return np.array([[np.cos(theta)], [np.sin(theta)]])


def triple_sign_oracle(a, b, c):
    """n = 1 closed form for pairwise distinct lines at angles a, b, c."""
    return 1 if np.sin(c - a) * np.sin(a - b) * np.sin(c - b) > 0 else 0


def test_triple_index_line_oracle():
    sp = standard_space(1)
    assert triple_index(sp, line(0.0), line(np.pi / 4), line(np.pi / 2)).value == 0
    assert triple_index(sp, line(0.0), line(2.0), line(1.2)).value == 1
    rng = np.random.default_rng(17)
    checked = 0
    while checked < 200:
        a, b, c = rng.uniform(0.0, np.pi, size=3)
        gaps = [abs(np.sin(x - y)) for x, y in ((a, b), (b, c), (a, c))]
        if min(gaps) < 1e-3:
            continue
        got = triple_index(sp, line(a), line(b), line(c), rng=rng).value
        assert got == triple_sign_oracle(a, b, c), (a, b, c)
        checked += 1


def test_triple_index_degenerate_configurations():
    sp = standard_space(1)
    alpha, beta = line(0.3), line(1.4)
    assert triple_index(sp, alpha, beta, alpha).value == 1
    assert triple_index(sp, alpha, beta, beta).value == 0
    assert triple_index(sp, alpha, alpha, alpha).value == 0


def test_triple_index_bound_and_cyclic_coindex():
    for trial in range(30):
        rng = np.random.default_rng([31, trial])
        n = 1 + trial % 3
        sp = standard_space(n)
        A, B, C = (random_lagrangian(sp, rng) for _ in range(3))
        rep = triple_index(sp, A, B, C, rng=rng)
        dim_ab = intersection(A, B)[0]
        dim_bc = intersection(B, C)[0]
        assert rep.value <= n - dim_ab - dim_bc + rep.extras["dim_triple"]
        assert rep.value >= 0
        # the coindex of the Kashiwara form is cyclically invariant
        cyc = triple_index(sp, B, C, A, rng=rng)
        assert rep.extras["inertia"][0] == cyc.extras["inertia"][0]


def test_hormander_basic_properties():
    rng = np.random.default_rng(8)
    sp = standard_space(2)
    l1, l2, m1, m2 = (random_lagrangian(sp, rng) for _ in range(4))
    assert hormander_index(sp, l1, l2, m1, m1).value == 0
    s = hormander_index(sp, l1, l2, m1, m2).value
    assert hormander_index(sp, l1, l2, m2, m1).value == -s


def test_hormander_equals_clm_difference():
    for trial in range(6):
        rng = np.random.default_rng([41, trial])
        n = 1 + trial % 2
        sp = standard_space(n)
        T = float(rng.uniform(0.5, 1.8))
        psi = random_flow_path(rng, n, T)
        L = random_lagrangian(sp, rng)
        leg = FlowLeg(psi, L)
        m1, m2 = random_lagrangian(sp, rng), random_lagrangian(sp, rng)
        diff = clm_index(pair_against_constant(m2, leg)).value \
            - clm_index(pair_against_constant(m1, leg)).value
        s = hormander_index(sp, L, psi.value(T) @ L, m1, m2).value
        assert s == diff
