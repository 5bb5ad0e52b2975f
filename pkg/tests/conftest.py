import numpy as np
import pytest
from scipy.linalg import expm, logm


def random_hermitian(rng, d, scale=1.0):
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (G + G.conj().T)


def random_density(rng, d, rank=None):
    """Wishart-distributed density matrix, full rank unless ``rank`` is given."""
    k = d if rank is None else rank
    G = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = G @ G.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_unitary(rng, d):
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diagonal(R) / np.abs(np.diagonal(R)))


def quadrature_conditional(A, rho, n=64):
    """int_0^1 rho^lam A rho^(1-lam) dlam by Gauss-Legendre, powers via expm(lam logm rho)."""
    x, w = np.polynomial.legendre.leggauss(n)
    lam = 0.5 * (x + 1.0)
    w = 0.5 * w
    L = logm(rho)
    out = np.zeros_like(A, dtype=complex)
    for lk, wk in zip(lam, w):
        out += wk * expm(lk * L) @ A @ expm((1.0 - lk) * L)
    return out


def fro(A):
    return float(np.linalg.norm(A))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
