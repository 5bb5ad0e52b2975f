import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fro, quadrature_conditional, random_density, random_hermitian, random_unitary
from tqme.operators import (
    DimensionMismatch,
    NotADensityMatrix,
    SpectralDecomposition,
    anticommutator,
    canonical_correlation,
    canonical_state,
    commutator,
    conditional_operator,
    density_matrix,
    fix_phases,
    hermitian,
    log_weight_factor,
    log_weight_matrix,
    nonlinear_part,
    operator_log,
    spectral_decompose,
    von_neumann_entropy,
)
from tqme.two_level import SIGMA

I2 = np.eye(2)
S1, S2, S3 = SIGMA


# --- commutators ----------------------------------------------------------


def test_commutator_self_vanishes(rng):
    A = random_hermitian(rng, 4)
    assert np.allclose(commutator(A, A), 0.0)


def test_pauli_commutator():
    assert np.allclose(commutator(S1, S2), 2j * S3)


def test_oscillator_qh_pattern():
    # N=1, hbar = m = omega = 1: Q = sigma1/sqrt2, H = diag(1/2, 3/2)
    Q = S1 / math.sqrt(2)
    H = np.diag([0.5, 1.5])
    QH = commutator(Q, H)
    expected = math.sqrt(0.5) * np.array([[0, 1], [-1, 0]])
    assert np.allclose(QH, expected)


def test_anticommutator_examples(rng):
    B = random_hermitian(rng, 3)
    assert np.allclose(anticommutator(np.eye(3), B), 2 * B)
    assert np.allclose(anticommutator(S1, S1), 2 * I2)
    assert np.allclose(anticommutator(S1, S2), 0.0)


def test_anticommutator_hermitian(rng):
    A, B = random_hermitian(rng, 5), random_hermitian(rng, 5)
    C = anticommutator(A, B)
    assert np.allclose(C, C.conj().T, atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        commutator(np.eye(2), np.eye(3))
    with pytest.raises(DimensionMismatch):
        anticommutator(np.eye(2), np.ones((2, 3)))


# --- validation -----------------------------------------------------------


def test_hermitian_rejects():
    with pytest.raises(ValueError):
        hermitian(np.array([[0, 1], [0, 0]]))


@pytest.mark.parametrize(
    "rho",
    [
        np.array([[0.5, 0.1], [0.2, 0.5]]),
        np.diag([0.7, 0.4]),
        np.diag([1.1, -0.1]),
    ],
)
def test_density_matrix_rejects(rho):
    with pytest.raises(NotADensityMatrix):
        density_matrix(rho)


def test_density_matrix_accepts(rng):
    rho = random_density(rng, 4)
    assert np.array_equal(density_matrix(rho), rho)


# --- spectral decomposition -----------------------------------------------


def test_decompose_diagonal():
    sd = spectral_decompose(np.diag([0.3, 0.7]))
    assert np.allclose(sd.eigenvalues, [0.7, 0.3])
    assert np.allclose(np.abs(sd.eigenvectors), [[0, 1], [1, 0]])


def test_decompose_maximally_mixed():
    sd = spectral_decompose(np.eye(4) / 4)
    assert np.allclose(sd.eigenvalues, 0.25)


def test_decompose_two_level_analytic():
    sd = spectral_decompose(0.5 * (I2 + 0.5 * S1))
    assert np.allclose(sd.eigenvalues, [0.75, 0.25])
    v_plus = np.array([1, 1]) / math.sqrt(2)
    v_minus = np.array([1, -1]) / math.sqrt(2)
    assert abs(abs(np.vdot(v_plus, sd.eigenvectors[:, 0])) - 1) < 1e-12
    assert abs(abs(np.vdot(v_minus, sd.eigenvectors[:, 1])) - 1) < 1e-12


@pytest.mark.parametrize("d", [2, 3, 5, 8])
def test_decompose_invariants(rng, d):
    rho = random_density(rng, d)
    sd = spectral_decompose(rho)
    V = sd.eigenvectors
    assert np.all(np.diff(sd.eigenvalues) <= 0)
    assert np.allclose(V.conj().T @ V, np.eye(d), atol=1e-10)
    assert abs(sd.eigenvalues.sum() - 1) < 1e-10
    assert fro(sd.reconstruct() - rho) < 1e-9
    lead = V[np.argmax(np.abs(V), axis=0), np.arange(d)]
    assert np.allclose(lead.imag, 0) and np.all(lead.real > 0)


def test_decompose_gauge_is_deterministic(rng):
    rho = random_density(rng, 5)
    U = np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, 5)))
    a = spectral_decompose(rho)
    # same matrix, different eigensolver phase choices after an explicit re-phasing
    b = SpectralDecomposition(a.eigenvalues, fix_phases(a.eigenvectors @ U))
    assert np.allclose(a.eigenvectors, b.eigenvectors, atol=1e-14)


def test_decompose_ties_ordered():
    sd = spectral_decompose(np.diag([0.25, 0.5, 0.25]))
    assert np.allclose(sd.eigenvalues, [0.5, 0.25, 0.25])
    again = spectral_decompose(np.diag([0.25, 0.5, 0.25]))
    assert np.array_equal(sd.eigenvectors, again.eigenvectors)


# --- logarithmic mean -----------------------------------------------------


def test_log_weight_examples():
    assert log_weight_factor(0.5, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert log_weight_factor(0.5, 0.25) == pytest.approx(0.25 / math.log(2), rel=1e-14)
    assert log_weight_factor(0.25 / math.log(2), 0) == 0.0
    assert log_weight_factor(0.3, 0.0) == 0.0
    assert log_weight_factor(0.0, 0.0) == 0.0


@pytest.mark.parametrize("eps", [1e-3, 1e-6, 1e-9, 1e-11, 1e-14])
def test_log_weight_near_degenerate_accurate(eps):
    mp.mp.dps = 40
    p = 0.3
    q = p * (1 + eps)
    exact = float((mp.mpf(q) - mp.mpf(p)) / (mp.log(mp.mpf(q)) - mp.log(mp.mpf(p))))
    assert log_weight_factor(q, p) == pytest.approx(exact, rel=1e-14)
    assert log_weight_matrix(np.array([q, p]))[0, 1] == pytest.approx(exact, rel=1e-14)


def test_log_weight_matrix_matches_scalar(rng):
    p = np.array([0.5, 0.3, 0.3 + 1e-12, 0.1 - 1e-12, 0.0])
    W = log_weight_matrix(p)
    for m in range(5):
        for n in range(5):
            assert W[m, n] == pytest.approx(log_weight_factor(p[m], p[n]), rel=1e-13, abs=1e-300)


prob = st.floats(min_value=1e-12, max_value=1.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(prob, prob)
def test_log_weight_inequality_chain(a, b):
    L = log_weight_factor(a, b)
    arith = 0.5 * (a + b)
    assert 0.0 <= L <= arith * (1 + 1e-15)
    assert arith <= 1.0
    if abs(a - b) > 1e-6 * max(a, b):
        assert L < arith


def test_log_weight_inequality_grid():
    grid = np.linspace(0.01, 1.0, 100)
    for a in grid:
        for b in grid:
            L = log_weight_factor(a, b)
            assert 0.0 <= L <= 0.5 * (a + b) * (1 + 1e-15)
            assert 0.5 * (a + b) <= 1.0


# --- conditional operator -------------------------------------------------


def test_conditional_commuting_case():
    p = np.array([0.5, 0.3, 0.2])
    rho = np.diag(p)
    A = np.diag([1.0, -2.0, 0.5])
    Ar = conditional_operator(A, spectral_decompose(rho))
    assert np.allclose(Ar, A @ rho, atol=1e-14)


def test_conditional_maximally_mixed(rng):
    A = random_hermitian(rng, 4)
    Ar = conditional_operator(A, spectral_decompose(np.eye(4) / 4))
    assert np.allclose(Ar, A / 4, atol=1e-14)


@pytest.mark.parametrize("d", [2, 3, 4, 6])
def test_conditional_matches_quadrature(rng, d):
    A = random_hermitian(rng, d)
    rho = random_density(rng, d)
    Ar = conditional_operator(A, spectral_decompose(rho))
    assert fro(Ar - quadrature_conditional(A, rho)) < 1e-8


def test_conditional_properties(rng):
    A, B = random_hermitian(rng, 5), random_hermitian(rng, 5)
    rho = random_density(rng, 5)
    sd = spectral_decompose(rho)
    Ar = conditional_operator(A, sd)
    assert np.allclose(Ar, Ar.conj().T, atol=1e-12)
    assert abs(np.trace(Ar) - np.trace(A @ rho)) < 1e-12
    lin = conditional_operator(2.5 * A + B, sd) - (2.5 * Ar + conditional_operator(B, sd))
    assert fro(lin) < 1e-12


def test_conditional_dimension_mismatch(rng):
    sd = spectral_decompose(random_density(rng, 3))
    with pytest.raises(DimensionMismatch):
        conditional_operator(np.eye(2), sd)
    with pytest.raises(DimensionMismatch):
        nonlinear_part(np.eye(4), sd)


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
def test_ln_commutator_identity(rng, d):
    for _ in range(20):
        A = random_hermitian(rng, d)
        rho = random_density(rng, d)
        sd = spectral_decompose(rho)
        lhs = commutator(A, rho)
        rhs = commutator(conditional_operator(A, sd), operator_log(sd))
        assert fro(lhs - rhs) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=2**32 - 1))
def test_ln_commutator_identity_property(d, seed):
    rng = np.random.default_rng(seed)
    A = random_hermitian(rng, d)
    sd = spectral_decompose(random_density(rng, d))
    rhs = commutator(conditional_operator(A, sd), operator_log(sd))
    assert fro(commutator(A, sd.reconstruct()) - rhs) < 1e-9


# --- nonlinear part -------------------------------------------------------


def test_nonlinear_part_commuting_vanishes():
    sd = spectral_decompose(np.diag([0.6, 0.3, 0.1]))
    assert np.allclose(nonlinear_part(np.diag([1.0, 2.0, 3.0]), sd), 0.0, atol=1e-15)


def test_nonlinear_part_quadrature(rng):
    A = random_hermitian(rng, 3)
    rho = random_density(rng, 3)
    expected = 2 * quadrature_conditional(A, rho) - anticommutator(A, rho)
    got = nonlinear_part(A, spectral_decompose(rho))
    assert fro(got - expected) < 1e-8


@pytest.mark.parametrize("d", [2, 4, 6])
def test_nonlinear_part_traceless(rng, d):
    A = random_hermitian(rng, d)
    sd = spectral_decompose(random_density(rng, d))
    assert abs(np.trace(nonlinear_part(A, sd))) < 1e-12


# --- operator log ---------------------------------------------------------


def test_operator_log_canonical():
    H = np.diag([0.0, 1.0, 2.5])
    kT = 0.7
    rho = canonical_state(H, kT)
    Z = np.sum(np.exp(-np.diag(H) / kT))
    assert np.allclose(operator_log(spectral_decompose(rho)), -H / kT - math.log(Z) * np.eye(3), atol=1e-12)


def test_operator_log_mixed():
    L = operator_log(spectral_decompose(np.eye(2) / 2))
    assert np.allclose(L, -math.log(2) * np.eye(2))


def test_operator_log_floor():
    sd = spectral_decompose(np.diag([1.0, 0.0]))
    L = operator_log(sd, floor=1e-30)
    assert L[1, 1].real == pytest.approx(math.log(1e-30))
    assert L[0, 0].real == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        operator_log(sd, floor=0.0)


# --- canonical correlation ------------------------------------------------


def test_canonical_correlation_identity_gives_average(rng):
    A = random_hermitian(rng, 4)
    rho = random_density(rng, 4)
    sd = spectral_decompose(rho)
    assert canonical_correlation(A, np.eye(4), sd) == pytest.approx(np.trace(A @ rho).real, abs=1e-12)


def test_canonical_correlation_sigma3():
    sd = spectral_decompose(np.eye(2) / 2)
    assert canonical_correlation(S3, S3, sd) == pytest.approx(1.0, abs=1e-14)


def test_canonical_correlation_quadrature_symmetry_positivity(rng):
    A, B = random_hermitian(rng, 4), random_hermitian(rng, 4)
    rho = random_density(rng, 4)
    sd = spectral_decompose(rho)
    oracle = np.trace(quadrature_conditional(A, rho) @ B).real
    assert canonical_correlation(A, B, sd) == pytest.approx(oracle, abs=1e-8)
    assert canonical_correlation(A, B, sd) == pytest.approx(canonical_correlation(B, A, sd), abs=1e-12)
    assert canonical_correlation(A, A, sd) >= 0.0


# --- misc -----------------------------------------------------------------


def test_entropy_values():
    assert von_neumann_entropy(spectral_decompose(np.eye(4) / 4)) == pytest.approx(math.log(4))
    assert von_neumann_entropy(spectral_decompose(np.diag([1.0, 0.0]))) == 0.0


def test_canonical_state_rotated_hamiltonian(rng):
    U = random_unitary(rng, 3)
    H = U @ np.diag([0.0, 1.0, 2.0]) @ U.conj().T
    rho = canonical_state(H, 1.0)
    w = np.exp(-np.array([0.0, 1.0, 2.0]))
    assert np.allclose(np.sort(np.linalg.eigvalsh(rho)), np.sort(w / w.sum()))
    assert np.allclose(commutator(H, rho), 0.0, atol=1e-12)
