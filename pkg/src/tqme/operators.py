"""Hermitian operator algebra and the conditional operator ``A_rho``.

Operators are plain complex ``numpy`` arrays. A density matrix is decomposed
once into a :class:`SpectralDecomposition`; everything that depends
nonlinearly on the state (``A_rho``, ``ln rho``, canonical correlations) is
evaluated in that eigenbasis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10
EIGENVALUE_FLOOR = 1e-30
DEGENERATE_LOG_GAP = 1e-8


class DimensionMismatch(ValueError):
    pass


class NotADensityMatrix(ValueError):
    pass


class EigensolverFailure(RuntimeError):
    pass


def _check_pair(A, B):
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"operator shapes {A.shape} and {B.shape} are incompatible")
    return A, B


def dagger(A):
    return np.conj(np.transpose(A))


def is_hermitian(A, tol=HERMITIAN_TOL):
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and np.allclose(A, dagger(A), rtol=0.0, atol=tol)


def hermitian(A, tol=HERMITIAN_TOL):
    """Return ``A`` as a complex array, raising if it is not self-adjoint."""
    A = np.asarray(A, dtype=complex)
    if not is_hermitian(A, tol):
        raise ValueError("operator is not Hermitian")
    return A


def density_matrix(rho, tol=TRACE_TOL, positivity_tol=POSITIVITY_TOL):
    """Validate ``rho`` as a density matrix and return it as a complex array.

    Raises
    ------
    NotADensityMatrix
        If ``rho`` is not Hermitian, not of unit trace, or has an eigenvalue
        below ``-positivity_tol``.
    """
    rho = np.asarray(rho, dtype=complex)
    if not is_hermitian(rho, HERMITIAN_TOL):
        raise NotADensityMatrix("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise NotADensityMatrix(f"trace is {tr!r}, expected 1")
    lowest = np.linalg.eigvalsh(rho)[0]
    if lowest < -positivity_tol:
        raise NotADensityMatrix(f"negative eigenvalue {lowest:.3e}")
    return rho


def commutator(A, B):
    A, B = _check_pair(A, B)
    return A @ B - B @ A


def anticommutator(A, B):
    A, B = _check_pair(A, B)
    return A @ B + B @ A


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues ``p`` (descending) and eigenvector columns of a density matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ dagger(V)

    def to_eigenbasis(self, A):
        """Matrix elements ``<pi_m|A|pi_n>``."""
        V = self.eigenvectors
        return dagger(V) @ A @ V

    def from_eigenbasis(self, A):
        V = self.eigenvectors
        return V @ A @ dagger(V)

    def function(self, f):
        """Apply a scalar function to the eigenvalues, ``f(rho)``."""
        V = self.eigenvectors
        return (V * f(self.eigenvalues)) @ dagger(V)


def fix_phases(V):
    """Rotate each column so that its largest-magnitude entry is real positive."""
    V = np.array(V, dtype=complex)
    idx = np.argmax(np.abs(V), axis=0)
    lead = V[idx, np.arange(V.shape[1])]
    return V * (np.abs(lead) / lead)


def _ordering_key(p, V, k):
    col = V[:, k]
    return (-p[k],) + tuple(x for z in col for x in (z.real, z.imag))


def spectral_decompose(rho):
    """Eigen-decompose a Hermitian matrix with a deterministic gauge.

    Eigenvalues are returned in descending order (exact ties broken by the
    first differing eigenvector component), and every eigenvector is rotated
    so its largest-magnitude entry is real and positive.
    """
    rho = np.asarray(rho, dtype=complex)
    try:
        p, V = np.linalg.eigh(rho)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(f"eigh failed: {exc}") from exc
    if not np.all(np.isfinite(p)):
        raise EigensolverFailure("eigensolver returned non-finite eigenvalues")
    V = fix_phases(V)
    if np.all(np.diff(p) > 0):
        order = np.arange(p.shape[0])[::-1]
    else:
        order = sorted(range(p.shape[0]), key=lambda k: _ordering_key(p, V, k))
    return SpectralDecomposition(p[order].copy(), V[:, order].copy())


def eigh_descending(rho):
    """Unsorted-gauge decomposition for internal stepping: descending ``p``, raw ``eigh`` vectors."""
    p, V = np.linalg.eigh(rho)
    return SpectralDecomposition(p[::-1].copy(), V[:, ::-1].copy())


def log_weight_factor(p_m, p_n):
    """Logarithmic mean ``(p_m - p_n) / (ln p_m - ln p_n)`` with its limits.

    Equal arguments give ``p_m``; a vanishing (or negative round-off)
    argument gives 0.
    """
    p_m = max(float(p_m), 0.0)
    p_n = max(float(p_n), 0.0)
    if p_m == 0.0 or p_n == 0.0:
        return 0.0
    if abs(p_m - p_n) < p_n:
        delta = math.log1p((p_m - p_n) / p_n)
    else:
        delta = math.log(p_m) - math.log(p_n)
    if abs(delta) < DEGENERATE_LOG_GAP:
        return 0.5 * (p_m + p_n) * (1.0 - delta * delta / 12.0)
    return (p_m - p_n) / delta


def log_weight_matrix(p):
    """Matrix of ``log_weight_factor(p[m], p[n])`` over all index pairs."""
    return kernels.log_mean_matrix(np.ascontiguousarray(p, dtype=float))


def conditional_operator(A, sd):
    """``A_rho = int_0^1 rho^lam A rho^(1-lam) dlam`` evaluated in the eigenbasis of rho."""
    A = np.asarray(A)
    if A.shape != (sd.dim, sd.dim):
        raise DimensionMismatch(f"operator shape {A.shape} does not match state dimension {sd.dim}")
    W = log_weight_matrix(sd.eigenvalues)
    return sd.from_eigenbasis(W * sd.to_eigenbasis(A))


def nonlinear_part(A, sd):
    """``A'_rho = 2 A_rho - (A rho + rho A)``, the part of ``A_rho`` not linear in rho."""
    A = np.asarray(A)
    if A.shape != (sd.dim, sd.dim):
        raise DimensionMismatch(f"operator shape {A.shape} does not match state dimension {sd.dim}")
    p = sd.eigenvalues
    W = 2.0 * log_weight_matrix(p) - (p[:, None] + p[None, :])
    return sd.from_eigenbasis(W * sd.to_eigenbasis(A))


def operator_log(sd, floor=EIGENVALUE_FLOOR):
    """``ln rho`` with eigenvalues clamped to ``max(p, floor)``."""
    if floor <= 0:
        raise ValueError("floor must be positive")
    return sd.function(lambda p: np.log(np.maximum(p, floor)))


def canonical_correlation(A, B, sd):
    """Kubo canonical correlation ``<<A;B>> = tr(A_rho B)``."""
    A, B = _check_pair(A, B)
    if A.shape != (sd.dim, sd.dim):
        raise DimensionMismatch(f"operator shape {A.shape} does not match state dimension {sd.dim}")
    W = log_weight_matrix(sd.eigenvalues)
    At = sd.to_eigenbasis(A)
    Bt = sd.to_eigenbasis(B)
    # tr(A_rho B) = sum_mn W_mn At_mn Bt_nm
    return float(np.real(np.sum(W * At * Bt.T)))


def von_neumann_entropy(sd):
    p = np.clip(sd.eigenvalues, 0.0, None)
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def canonical_state(H, kT):
    """Normalized ``exp(-H/kT)``."""
    H = hermitian(H)
    e, U = np.linalg.eigh(H)
    w = np.exp(-(e - e[0]) / kT)
    w /= w.sum()
    rho = (U * w) @ dagger(U)
    return 0.5 * (rho + dagger(rho))
