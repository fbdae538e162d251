import math

import numpy as np
import pytest
from conftest import SQ2, W_CANON, brute_partial_transpose_a, random_density, random_hermitian

from witnesskit import opalg
from witnesskit.opalg import I2, PAULIS, SX, SY, SZ, kron, partial_trace, partial_transpose
from witnesskit.states import upb_rho_be


def test_kron_examples():
    assert np.array_equal(kron(SX, SX), np.fliplr(np.eye(4)))
    assert np.array_equal(kron(I2, I2), np.eye(4))
    assert np.array_equal(kron(SZ, SZ), np.diag([1, -1, -1, 1]))


def test_kron_is_a_major():
    e = np.eye(3)
    v = np.kron(e[1], np.eye(2)[1])
    assert np.flatnonzero(v).tolist() == [1 * 2 + 1]


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 2), (3, 3)])
def test_partial_transpose_matches_brute_force(dims, rng):
    m = random_hermitian(dims[0] * dims[1], rng)
    assert np.allclose(partial_transpose(m, dims), brute_partial_transpose_a(m, *dims), atol=0)


def test_partial_transpose_max_entangled_spectrum():
    psi = np.array([0, SQ2, SQ2, 0])
    w = np.linalg.eigvalsh(partial_transpose(np.outer(psi, psi), (2, 2)))
    assert np.allclose(w, [-0.5, 0.5, 0.5, 0.5], atol=1e-12)


def test_partial_transpose_diagonal_unchanged():
    d = np.diag([1.0, 2, 3, 4, 5, 6])
    assert np.array_equal(partial_transpose(d, (2, 3)), d)
    assert np.array_equal(partial_transpose(d, (2, 3), "B"), d)


def test_partial_transpose_phi_expansion():
    a, b = 0.6, -0.8
    phi = np.array([a, 0, 0, b])
    expected = np.zeros((4, 4))
    expected[0, 0], expected[3, 3] = a * a, b * b
    expected[1, 2] = expected[2, 1] = a * b
    assert np.allclose(partial_transpose(np.outer(phi, phi), (2, 2)), expected, atol=1e-15)


def test_partial_transpose_rejects_bad_dims():
    with pytest.raises(ValueError):
        partial_transpose(np.eye(4), (2, 3))
    with pytest.raises(ValueError):
        partial_transpose(np.eye(4), (2, 2), "C")


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 3)])
def test_partial_transpose_involution_trace_hermiticity(dims, rng):
    for _ in range(100):
        m = random_hermitian(dims[0] * dims[1], rng)
        t = partial_transpose(m, dims)
        assert np.array_equal(partial_transpose(t, dims), m)
        assert abs(np.trace(t) - np.trace(m)) < 1e-12
        assert opalg.is_hermitian(t)
        m2 = random_hermitian(dims[0] * dims[1], rng)
        assert np.allclose(partial_transpose(2 * m - 3j * m2, dims),
                           2 * t - 3j * partial_transpose(m2, dims), atol=1e-12)


def test_partial_trace_examples():
    e00 = np.zeros((4, 4))
    e00[0, 0] = 1
    assert np.allclose(partial_trace(e00, (2, 2), "A"), np.diag([1, 0]))
    assert np.allclose(partial_trace(np.eye(4) / 4, (2, 2), "B"), np.eye(2) / 2)


def test_partial_trace_rho_be_brute_force():
    rho = upb_rho_be().rho
    red = np.zeros((3, 3), dtype=complex)
    for i in range(3):
        for k in range(3):
            for j in range(3):
                red[i, k] += rho[i * 3 + j, k * 3 + j]
    # the Tiles state is not locally maximally mixed
    assert not np.allclose(red, np.eye(3) / 3, atol=1e-3)
    assert np.allclose(partial_trace(rho, (3, 3), "A"), red, atol=1e-15)
    assert abs(np.trace(red) - 1) < 1e-12
    # hand-evaluated: (3 * 1 - Tr_B sum_i |psi_i><psi_i|) / 4
    hand = (3 * np.eye(3) - (np.diag([1, 0, 1]) + 0.5 * np.array([[1, -1, 0], [-1, 1, 0], [0, 0, 0]])
                         + 0.5 * np.array([[0, 0, 0], [0, 1, -1], [0, -1, 1]]) + np.ones((3, 3)) / 3)) / 4
    assert np.allclose(red, hand, atol=1e-15)


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 3)])
def test_partial_trace_preserves_trace_and_commutes_with_pt(dims, rng):
    m = random_density(dims[0] * dims[1], rng)
    for keep in "AB":
        assert abs(np.trace(partial_trace(m, dims, keep)) - 1) < 1e-12
    # Tr_B of the A-transposed operator is the transposed A-marginal
    assert np.allclose(partial_trace(partial_transpose(m, dims), dims, "A"),
                       partial_trace(m, dims, "A").T, atol=1e-12)
    assert np.allclose(partial_trace(partial_transpose(m, dims), dims, "B"),
                       partial_trace(m, dims, "B"), atol=1e-12)


def test_herm_eig_examples():
    w, _ = opalg.herm_eig(W_CANON)
    assert np.allclose(w, [-0.5, 0.5, 0.5, 0.5], atol=1e-12)
    w, _ = opalg.herm_eig(np.eye(4))
    assert np.allclose(w, 1)


@pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 1.0])
def test_herm_eig_min_eigenvalue_noisy_target(p):
    psi = np.array([0, SQ2, SQ2, 0])
    rho = p * np.outer(psi, psi) + (1 - p) * np.eye(4) / 4
    w, _ = opalg.herm_eig(partial_transpose(rho, (2, 2)))
    assert abs(w[0] - ((1 - p) / 4 - p / 2)) < 1e-12


def test_herm_eig_reconstruction(rng):
    for d in (2, 4, 6, 9):
        m = random_hermitian(d, rng)
        w, v = opalg.herm_eig(m)
        assert np.all(np.diff(w) >= 0)
        assert np.allclose(m @ v, v * w, atol=1e-10)
        assert np.allclose(v.conj().T @ v, np.eye(d), atol=1e-10)
        assert np.allclose((v * w) @ v.conj().T, m, atol=1e-10)


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        opalg.herm_eig(np.array([[0, 1], [0, 0]]))


def test_min_eigvec_degenerate_is_canonical(rng):
    m = np.diag([-1.0, -1.0, 2.0])
    u = opalg.random_unitary(3, rng)
    _, v = opalg.min_eigvec(u @ m @ u.conj().T)
    _, v2 = opalg.min_eigvec(u @ m @ u.conj().T + 1e-14 * random_hermitian(3, rng))
    assert np.allclose(v, v2, atol=1e-8)
    first = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
    assert abs(first.imag) < 1e-12 and first.real > 0


def test_schmidt_examples():
    a, b = 0.8, 0.6
    v = np.array([0, a, b, 0])
    sf = opalg.schmidt(v, (2, 2))
    assert np.allclose(sf.coefficients, [a, b])
    assert np.allclose(sf.vector(), v, atol=1e-10)
    sf = opalg.schmidt(np.array([1, 0, 0, 0]), (2, 2))
    assert sf.rank == 1 and np.isclose(sf.coefficients[0], 1)
    ghz = np.zeros(9)
    ghz[[0, 4, 8]] = 1 / math.sqrt(3)
    assert np.allclose(opalg.schmidt(ghz, (3, 3)).coefficients, [1 / math.sqrt(3)] * 3)


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 3)])
def test_schmidt_invariants(dims, rng):
    v = opalg.random_ket(dims[0] * dims[1], rng)
    sf = opalg.schmidt(v, dims)
    assert abs(np.sum(sf.coefficients**2) - 1) < 1e-12
    assert np.allclose(sf.vector(), v, atol=1e-10)
    u, w = opalg.random_unitary(dims[0], rng), opalg.random_unitary(dims[1], rng)
    sf2 = opalg.schmidt(np.kron(u, w) @ v, dims)
    assert np.allclose(sf2.coefficients, sf.coefficients, atol=1e-10)


def test_hs_norm_and_inner(rng):
    assert opalg.hs_norm(np.eye(4) / 4 - np.eye(4) / 4) == 0
    assert math.isclose(opalg.hs_norm(SZ / 2), SQ2, rel_tol=1e-15)
    a, b = random_hermitian(3, rng) + 1j * random_hermitian(3, rng), random_hermitian(3, rng)
    assert abs(opalg.hs_norm(a) ** 2 - opalg.hs_inner(a, a)) < 1e-12
    assert abs(opalg.hs_inner(a, b) - np.conj(opalg.hs_inner(b, a))) < 1e-12
    with pytest.raises(ValueError):
        opalg.hs_inner(np.eye(2), np.eye(3))


@pytest.mark.parametrize("p", [0.2, 0.6, 1.0])
def test_hs_inner_witness_state(p):
    a = b = SQ2
    psi = np.array([0, a, b, 0])
    rho = p * np.outer(psi, psi) + (1 - p) * np.eye(4) / 4
    brute = sum(W_CANON[i, j].conjugate() * rho[i, j] for i in range(4) for j in range(4))
    assert abs(opalg.hs_inner(W_CANON, rho) - brute) < 1e-14
    assert abs(brute - ((1 - p) / 4 - p * a * b)) < 1e-12


@pytest.mark.parametrize("alpha,beta", [(0.6, 0.8), (SQ2, -SQ2), (0.28, -0.96)])
def test_pauli_expand_phi(alpha, beta):
    phi = np.array([alpha, 0, 0, beta])
    lam = opalg.pauli_expand(partial_transpose(np.outer(phi, phi), (2, 2)))
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 0.25
    expected[1, 1] = expected[2, 2] = alpha * beta / 2
    expected[0, 3] = expected[3, 0] = (alpha**2 - beta**2) / 4
    assert np.allclose(lam, expected, atol=1e-15)


def test_pauli_expand_identity_and_witness():
    lam = opalg.pauli_expand(np.eye(4))
    assert lam[0, 0] == 1 and np.count_nonzero(lam) == 1
    lam = opalg.pauli_expand(W_CANON)
    brute = np.array([[np.trace(W_CANON @ np.kron(si, sj)).real / 4 for sj in PAULIS] for si in PAULIS])
    assert np.allclose(lam, brute, atol=1e-15)
    assert np.isclose(lam[1, 1], -0.25) and np.isclose(lam[2, 2], -0.25)
    assert lam[0, 3] == 0 and lam[3, 0] == 0
    with pytest.raises(ValueError):
        opalg.pauli_expand(np.eye(9))


def test_pauli_round_trip(rng):
    for _ in range(50):
        m = random_hermitian(4, rng)
        lam = opalg.pauli_expand(m)
        assert lam.dtype.kind == "f"
        assert np.allclose(opalg.pauli_reconstruct(lam), m, atol=1e-12)
        assert np.isclose(lam[0, 0], np.trace(m).real / 4)


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 3)])
def test_generalized_expand_round_trip(dims, rng):
    m = random_hermitian(dims[0] * dims[1], rng)
    c = opalg.generalized_expand(m, dims)
    assert c.shape == (dims[0] ** 2, dims[1] ** 2)
    assert np.allclose(opalg.generalized_reconstruct(c, dims), m, atol=1e-12)
    ga, gb = opalg.gellmann_basis(dims[0]), opalg.gellmann_basis(dims[1])
    brute = np.array([[np.trace(np.kron(x, y) @ m).real for y in gb] for x in ga])
    assert np.allclose(c, brute, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_gellmann_orthonormal(d):
    g = opalg.gellmann_basis(d)
    gram = np.einsum("aij,bji->ab", g, g)
    assert np.allclose(gram, np.eye(d * d), atol=1e-14)
    assert all(opalg.is_hermitian(x) for x in g)
    assert np.allclose([np.trace(x) for x in g[1:]], 0)
