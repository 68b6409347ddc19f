import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import G3_10_095, ROOTS_001_025
from oracles import cardano_real_roots, eig2

from dasa import (
    ExceptionalPointError,
    HamiltonianMatrix,
    InvalidParameterError,
    RootSelectionError,
    SingularParameterError,
    SitePotential,
    TwoLevelParams,
    UnsupportedRegimeError,
    build_hamiltonian_2,
    build_hamiltonian_3,
    classify_split,
    eigenstructure_general,
    eigenvalues_closed_form,
    eigenvectors_closed_form,
    gamma1_roots,
)
from dasa.hamiltonian import constraint_residual, overlap_index

finite = st.floats(-20, 20, allow_nan=False)
delta_omegas = st.floats(0.5, 10).flatmap(lambda x: st.sampled_from([x, -x]))
neg_gamma2 = st.floats(-2.0, -0.05)


# ---------------------------------------------------------------- types


@given(finite, finite, finite, finite)
def test_derived_fields_follow_sites(w1, g1, w2, g2):
    p = TwoLevelParams.from_values(w1, g1, w2, g2)
    assert p.delta_omega == w1 - w2
    assert p.sigma_omega == w1 + w2
    assert p.delta_gamma == g1 - g2
    assert p.sigma_gamma == g1 + g2


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf, "x"])
def test_site_potential_rejects_non_finite(bad):
    with pytest.raises(InvalidParameterError):
        SitePotential(0.0, bad)


def test_hamiltonian_matrix_enforces_couplings():
    with pytest.raises(InvalidParameterError):
        HamiltonianMatrix(np.array([[0, 2], [1, 0]]))
    with pytest.raises(InvalidParameterError):
        HamiltonianMatrix(np.array([[0, 1, 1], [1, 0, 1], [0, 1, 0]]))
    with pytest.raises(InvalidParameterError):
        HamiltonianMatrix(np.eye(4))


def test_hamiltonian_matrix_is_read_only():
    h = build_hamiltonian_2(TwoLevelParams.from_values(0, 0, 0, 0))
    with pytest.raises(ValueError):
        h.entries[0, 0] = 1


# ---------------------------------------------------------------- construction


def test_build_gain_loss_pair():
    h = build_hamiltonian_2(TwoLevelParams.from_values(0, 1, 0, -1))
    np.testing.assert_array_equal(h.entries, [[1j, 1], [1, -1j]])


def test_build_hermitian_zero_is_sigma_x():
    h = build_hamiltonian_2(TwoLevelParams.from_values(0, 0, 0, 0))
    np.testing.assert_array_equal(h.entries, [[0, 1], [1, 0]])


def test_build_first_reference_segment():
    g1 = gamma1_roots(10, -0.95).roots[0].gamma1
    h = build_hamiltonian_2(TwoLevelParams.from_values(0, g1, -10, -0.95))
    np.testing.assert_allclose(h.entries, [[0.0092344792398j, 1], [1, -10 - 0.95j]], atol=1e-12)


def test_sigma_decomposition_matches_matrix(h1_params):
    p = h1_params
    sx = np.array([[0, 1], [1, 0]])
    sz = np.diag([1, -1])
    via_pauli = sx + (1j * p.delta_gamma + p.delta_omega) / 2 * sz + (1j * p.sigma_gamma + p.sigma_omega) / 2 * np.eye(2)
    np.testing.assert_allclose(build_hamiltonian_2(p).entries, via_pauli, atol=1e-15)


def test_build_three_level_chain(h1_params):
    h = build_hamiltonian_3(h1_params, 15.0)
    assert h.dim == 3
    assert h.entries[1, 1] == 15
    assert h.entries[0, 2] == h.entries[2, 0] == 0
    assert h.entries[0, 0] == 1j * G3_10_095
    assert h.entries[2, 2] == -10 - 0.95j


# ---------------------------------------------------------------- gamma1 roots


def test_single_real_root_far_detuned():
    rs = gamma1_roots(10, -0.95)
    assert len(rs.roots) == 1
    assert rs.roots[0].valid
    assert rs.roots[0].gamma1 == pytest.approx(G3_10_095, abs=1e-15)
    assert rs.roots[0].residual <= 1e-9


def test_three_real_roots_near_resonance():
    rs = gamma1_roots(-0.01, -0.25)
    np.testing.assert_allclose([r.gamma1 for r in rs.roots], ROOTS_001_025, rtol=1e-12)
    assert all(r.valid for r in rs.roots)
    assert rs.select("largest").gamma1 == pytest.approx(3.99, rel=0.01)


def test_sign_of_detuning_is_irrelevant():
    assert gamma1_roots(0.01, -0.25).roots == gamma1_roots(-0.01, -0.25).roots


@settings(max_examples=200, deadline=None)
@given(delta_omegas, st.floats(-5, 5).filter(lambda g: abs(g) > 1e-3))
def test_detuning_sign_symmetry_property(dw, g2):
    assert gamma1_roots(dw, g2).roots == gamma1_roots(-dw, g2).roots


@pytest.mark.parametrize("dw,g2", [(0, -0.5), (1, 0)])
def test_unsupported_regimes(dw, g2):
    with pytest.raises(UnsupportedRegimeError):
        gamma1_roots(dw, g2)


@settings(max_examples=300, deadline=None)
@given(delta_omegas, st.floats(-5, 5).filter(lambda g: abs(g) > 1e-3))
def test_roots_back_substitute(dw, g2):
    rs = gamma1_roots(dw, g2)
    assert rs.roots, "a real cubic always has a real root"
    for r in rs.roots:
        assert abs(constraint_residual(r.gamma1, dw, g2)) <= 1e-9 * max(1, dw * dw)
        assert r.residual == abs(constraint_residual(r.gamma1, dw, g2))
    assert [r.gamma1 for r in rs.roots] == sorted(r.gamma1 for r in rs.roots)


def test_roots_match_cardano(rng):
    for _ in range(500):
        dw = rng.uniform(0.5, 10)
        g2 = rng.uniform(-2, -0.05)
        ours = [r.gamma1 for r in gamma1_roots(dw, g2).roots]
        ref = cardano_real_roots(dw, g2)
        assert len(ours) == len(ref)
        np.testing.assert_allclose(ours, ref, rtol=1e-7, atol=1e-9)


def test_near_degenerate_pair_resolved():
    # the two small roots sit 0.005 apart
    small = [r.gamma1 for r in gamma1_roots(0.01, -0.25).roots[:2]]
    assert small[1] - small[0] == pytest.approx(0.0051640757, rel=1e-6)


def test_vanishing_sigma_gamma_flagged_invalid():
    # as delta_omega -> 0 the small pair collapses onto gamma1 = -gamma2
    rs = gamma1_roots(1e-9, -0.25)
    assert [r.valid for r in rs.roots] == [False, False, True]
    assert all(abs(r.sigma_gamma) <= 1e-9 for r in rs.roots[:2])
    assert rs.select("largest").gamma1 == pytest.approx(4.0)
    with pytest.raises(RootSelectionError):
        rs.select("decay")


def test_root_selection_policies():
    rs = gamma1_roots(-0.01, -0.25)
    assert rs.select("largest").gamma1 == pytest.approx(ROOTS_001_025[2])
    assert rs.select("smallest").gamma1 == pytest.approx(ROOTS_001_025[0])
    assert rs.select("amplify").gamma1 == pytest.approx(ROOTS_001_025[2])
    assert rs.select("decay").gamma1 == pytest.approx(ROOTS_001_025[0])
    with pytest.raises(RootSelectionError):
        gamma1_roots(10, 0.95).select("decay")
    with pytest.raises(ValueError):
        rs.select("nope")


# ---------------------------------------------------------------- eigenvalues / vectors


def test_closed_form_eigenvalues_first_segment(h1_params):
    lam1, lam2 = eigenvalues_closed_form(h1_params)
    assert lam1 == pytest.approx(-10.098159201586607 - 0.94076552076019708j, abs=1e-12)
    assert lam2.imag == 0.0
    assert lam2.real == pytest.approx(0.098159201586606713, abs=1e-12)


def test_closed_form_matches_quadratic_formula(h1_params, h2_params):
    for p in (h1_params, h2_params):
        ref = eig2(p.site1.value, p.site2.value)
        ours = sorted(eigenvalues_closed_form(p), key=lambda z: (z.real, z.imag))
        np.testing.assert_allclose(ours, ref, atol=1e-12)


def test_swapping_onsite_frequencies_swaps_real_parts(h1_params):
    p = h1_params
    q = TwoLevelParams.from_values(p.omega2, p.gamma1, p.omega1, p.gamma2)
    a1, a2 = eigenvalues_closed_form(p)
    b1, b2 = eigenvalues_closed_form(q)
    assert (a1.real, a2.real) == pytest.approx((b2.real, b1.real))


@given(finite, st.floats(-3, 3), st.floats(-3, 3))
def test_swapping_gammas_swaps_real_parts(w, g1, g2):
    if abs(g1 + g2) < 1e-6:
        return
    p = TwoLevelParams.from_values(w, g1, w - 3.0, g2)
    q = TwoLevelParams.from_values(w, g2, w - 3.0, g1)
    a1, a2 = eigenvalues_closed_form(p)
    b1, b2 = eigenvalues_closed_form(q)
    assert a1.real == b2.real and a2.real == b1.real


def test_equal_frequencies_give_equal_real_parts():
    p = TwoLevelParams.from_values(2.5, 0.3, 2.5, -0.7)
    l1, l2 = eigenvalues_closed_form(p)
    assert l1.real == pytest.approx(2.5) and l2.real == pytest.approx(2.5)


def test_closed_form_singular():
    with pytest.raises(SingularParameterError):
        eigenvalues_closed_form(TwoLevelParams.from_values(0, 0.5, 1, -0.5))
    with pytest.raises(SingularParameterError):
        eigenvectors_closed_form(TwoLevelParams.from_values(0, 0.0, 1, -0.5))


def test_closed_form_eigenvectors(h1_params):
    v1, v2 = eigenvectors_closed_form(h1_params)
    raw = np.array([-0.0981592 + 0.0092345j, 1])
    np.testing.assert_allclose(v1, raw / np.linalg.norm(raw), atol=1e-6)
    h = build_hamiltonian_2(h1_params).entries
    lam1, lam2 = eigenvalues_closed_form(h1_params)
    for v, lam in ((v1, lam1), (v2, lam2)):
        assert np.linalg.norm(v) == pytest.approx(1)
        assert np.linalg.norm(h @ v - lam * v) <= 1e-10 * np.linalg.norm(h, 2)
    assert abs(np.vdot(v1, v2)) > 1e-3


# ---------------------------------------------------------------- general eigensolver


def test_sigma_x_eigenstructure():
    es = eigenstructure_general(np.array([[0, 1], [1, 0]]))
    np.testing.assert_allclose(es.eigenvalues, [-1, 1], atol=1e-14)
    for v, ref in zip(es.right_vectors, ([1, -1], [1, 1])):
        ref = np.array(ref) / np.sqrt(2)
        assert abs(abs(np.vdot(ref, v)) - 1) < 1e-12


def test_exceptional_point_rejected():
    # PT-symmetric dimer at gamma = coupling: both eigenvalues zero
    with pytest.raises(ExceptionalPointError):
        eigenstructure_general(np.array([[1j, 1], [1, -1j]]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=15, allow_nan=False, allow_infinity=False), min_size=3, max_size=3))
def test_biorthogonality_and_trace(diag):
    h = np.array([[diag[0], 1, 0], [1, diag[1], 1], [0, 1, diag[2]]])
    try:
        es = eigenstructure_general(h)
    except ExceptionalPointError:
        return
    np.testing.assert_allclose(es.left_vectors @ es.right_vectors.T, np.eye(3), atol=1e-10)
    assert abs(es.eigenvalues.sum() - np.trace(h)) <= 1e-12 * max(1, np.abs(h).max())
    assert list(es.eigenvalues.real) == sorted(es.eigenvalues.real)


def test_valid_root_gives_one_real_eigenvalue(h1_params):
    es = eigenstructure_general(build_hamiltonian_2(h1_params))
    assert sum(abs(x.imag) <= 1e-9 for x in es.eigenvalues) == 1
    np.testing.assert_allclose(es.eigenvalues, sorted(eigenvalues_closed_form(h1_params), key=lambda z: z.real), atol=1e-12)


def test_trace_invariance(rng):
    for _ in range(200):
        dw, g2 = rng.uniform(0.5, 10), rng.uniform(-2, -0.05)
        for r in gamma1_roots(dw, g2).valid_roots:
            w1 = rng.uniform(-5, 5)
            p = TwoLevelParams.from_values(w1, r.gamma1, w1 - dw, g2)
            lam = sum(eigenvalues_closed_form(p))
            assert abs(lam - complex(p.sigma_omega, p.sigma_gamma)) <= 1e-12 * max(1, abs(lam))


def test_three_level_loss_hits_initial_ground_state(h1_params):
    es = eigenstructure_general(build_hamiltonian_3(h1_params, 15.0))
    k = overlap_index(es, [0, 0, 1])
    assert k == int(np.argmin(es.eigenvalues.imag))


# ---------------------------------------------------------------- classification


def test_classify_decay(h1_params):
    rep = classify_split(eigenstructure_general(build_hamiltonian_2(h1_params)))
    # ascending real part: the complex eigenvalue (Re ~ -10.1) comes first
    assert (rep.in_class, rep.real_index, rep.complex_index, rep.mode) == (True, 1, 0, "decay")
    assert rep.rate == pytest.approx(h1_params.sigma_gamma)


def test_classify_amplify(h2_params):
    rep = classify_split(eigenstructure_general(build_hamiltonian_2(h2_params)))
    assert rep.mode == "amplify"
    assert rep.rate == pytest.approx(3.7499715553263107)


def test_classify_hermitian_not_in_class():
    assert not classify_split(eigenstructure_general(np.array([[0, 1], [1, 0]]))).in_class
