"""Thermodynamic bookkeeping: free energy, entropy production, energy exchange, overlaps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .master import bracket_coefficients
from .operators import (
    EIGENVALUE_FLOOR,
    canonical_correlation,
    commutator,
    operator_log,
    spectral_decompose,
)


@dataclass(frozen=True)
class EntropyReport:
    system_entropy_rate: float
    bath_entropy_rate: float
    total_rate: float
    canonical_form_rate: float


def free_energy_operator(H, sd, kT, floor=EIGENVALUE_FLOOR):
    """Helmholtz free-energy operator ``F = H + kT ln rho``."""
    if kT <= 0:
        raise ValueError("kT must be positive")
    return np.asarray(H, dtype=complex) + kT * operator_log(sd, floor)


def environment_energy_rate(sd, spec, bath):
    """``dH_e/dt`` of a heat bath; equals ``-tr(H R)`` for the thermodynamic ``R``."""
    c_S, c_H = bracket_coefficients(bath)
    rho = sd.reconstruct()
    rate = 0.0
    for Q, QH, w in zip(spec.couplings, spec.qh_commutators, spec.weights):
        # <<X;X>> of the anti-Hermitian X = [Q,H] is minus that of iX
        corr = -canonical_correlation(1j * QH, 1j * QH, sd)
        mean = np.trace(commutator(Q, QH) @ rho).real
        rate += w * (-c_S * corr + c_H * mean)
    return float(rate)


def entropy_rate(sd, spec, bath, R, floor=EIGENVALUE_FLOOR):
    """Entropy production along the thermodynamic equation, by two routes.

    ``total_rate`` is ``-tr(ln rho R) + (dH_e/dt) / kT``; ``canonical_form_rate``
    is ``sum_j M_j / kT**2 <<i[Q_j, F]; i[Q_j, F]>>``. The reversible part of
    ``d rho/dt`` does not contribute to the first term, so only ``R`` is passed.
    """
    lnrho = operator_log(sd, floor)
    system = float(-np.trace(lnrho @ R).real)
    bath_rate = environment_energy_rate(sd, spec, bath) / bath.kT
    F = free_energy_operator(spec.H, sd, bath.kT, floor)
    M = bath.strength
    canonical = 0.0
    for Q, w in zip(spec.couplings, spec.weights):
        X = 1j * commutator(Q, F)
        canonical += w * M / bath.kT**2 * canonical_correlation(X, X, sd)
    return EntropyReport(system, bath_rate, system + bath_rate, canonical)


def energy_basis(H):
    """Eigenvectors of ``H`` in ascending energy order."""
    _, U = np.linalg.eigh(np.asarray(H, dtype=complex))
    return U


def overlaps(sd, H, count=None):
    """``|<j|pi_j>|``: j-th lowest energy eigenstate against j-th most probable eigenvector."""
    U = energy_basis(H)
    d = U.shape[1]
    count = d if count is None else count
    if count > min(d, sd.dim):
        raise IndexError(f"requested {count} overlaps but only {min(d, sd.dim)} states exist")
    V = sd.eigenvectors
    return np.abs(np.einsum("ij,ij->j", np.conj(U[:, :count]), V[:, :count]))


def overlap_series(snapshots, H, count=3):
    """Overlap time series from stored snapshots (density matrices or decompositions)."""
    rows = []
    for snap in snapshots:
        sd = snap if hasattr(snap, "eigenvectors") else spectral_decompose(snap)
        rows.append(overlaps(sd, H, count))
    rows = np.array(rows).reshape(len(rows), count)
    return {f"overlap_{j}": rows[:, j] for j in range(count)}
