"""Two-level system in the Bloch-vector representation.

Observables are written ``O(alpha, a) = (alpha I + a . sigma) / 2``, a density
matrix is ``O(1, m)``. The Hamiltonian is ``O(0, hbar omega q3)`` and the bath
couples through ``O(0, q1)`` and ``O(0, q2)`` (plus ``O(0, q3)`` if isotropic),
each with bracket strength ``gamma0 kT / (hbar omega)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .master import BathState, SystemSpec

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
IDENTITY = np.eye(2, dtype=complex)
Q3 = np.array([0.0, 0.0, 1.0])

MU_SERIES_BELOW = 0.3
MU_SERIES_TERMS = 40


@dataclass(frozen=True)
class TwoLevelParams:
    """Level splitting ``omega``, emission rate ``gamma0`` and bath ``kT``.

    ``isotropic`` adds the ``q3`` coupling; ``q3_weight`` scales its strength
    (large values give transverse relaxation much faster than longitudinal).
    """

    omega: float = 1.0
    gamma0: float = 0.1
    kT: float = 0.5
    isotropic: bool = False
    hbar: float = 1.0
    q3_weight: float = 1.0

    def __post_init__(self):
        if self.omega <= 0 or self.kT <= 0 or self.hbar <= 0:
            raise ValueError("omega, kT and hbar must be positive")
        if self.gamma0 < 0 or self.q3_weight < 0:
            raise ValueError("gamma0 and q3_weight must be non-negative")

    @property
    def x(self):
        """``hbar omega / (2 kT)``."""
        return self.hbar * self.omega / (2.0 * self.kT)

    def relaxation_matrix(self):
        """``R`` of the Bloch equation: ``(1 + q3 q3)/2``, or ``1`` if isotropic."""
        w = np.array([1.0, 1.0, self.q3_weight if self.isotropic else 0.0])
        # sum_j w_j (1 - q_j q_j) / 2
        return 0.5 * (np.sum(w) * np.eye(3) - np.diag(w))


def pauli_compose(alpha, a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (alpha * IDENTITY + np.einsum("i,ijk->jk", a.astype(complex), SIGMA))


def pauli_decompose(A):
    """Inverse of :func:`pauli_compose`: ``alpha = tr A``, ``a_i = tr(A sigma_i)``."""
    A = np.asarray(A, dtype=complex)
    alpha = np.trace(A).real
    a = np.real(np.einsum("jk,ikj->i", A, SIGMA))
    return float(alpha), a


def pauli_function(f, alpha, a):
    """``f(O(alpha, a))`` as ``(alpha', a')`` through the two eigenvalues."""
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return 2.0 * f(alpha / 2.0), np.zeros(3)
    f_plus = f((alpha + norm) / 2.0)
    f_minus = f((alpha - norm) / 2.0)
    return f_plus + f_minus, (f_plus - f_minus) * a / norm


_K = np.arange(MU_SERIES_TERMS)
_T_COEF = 1.0 / (2.0 * _K + 3.0)
_S_COEF = 1.0 / (2.0 * _K + 1.0)


def _mu_series(x):
    """``mu = T(x) / S(x)`` with ``x = m**2``; free of cancellation for small ``m``."""
    powers = x[..., None] ** _K
    return (powers @ _T_COEF) / (powers @ _S_COEF)


def _mu_array(m):
    m = np.asarray(m, dtype=float)
    small = m < MU_SERIES_BELOW
    ms = np.where(small, 0.5, m)
    with np.errstate(divide="ignore"):
        direct = 1.0 / (ms * ms) - 1.0 / (ms * np.arctanh(ms))
    return np.where(small, _mu_series(np.where(small, m * m, 0.0)), direct)


def mu(m):
    """``mu(m) = 1/m**2 - 1/(m artanh m)`` on ``0 <= m < 1``.

    The two singular terms cancel at small ``m``. Below ``MU_SERIES_BELOW`` the
    equivalent ratio ``sum x**k/(2k+3) / sum x**k/(2k+1)``, ``x = m**2``, is
    summed instead.
    """
    arr = np.asarray(m, dtype=float)
    if np.any(arr < 0) or np.any(arr >= 1):
        raise ValueError("mu(m) is defined for 0 <= m < 1")
    out = _mu_array(arr)
    return float(out) if out.ndim == 0 else out


def mu_derivative(m):
    m = float(m)
    if m < 0 or m >= 1:
        raise ValueError("mu(m) is defined for 0 <= m < 1")
    if m < MU_SERIES_BELOW:
        x = m * m
        powers = x ** _K
        dpowers = np.concatenate(([0.0], _K[1:] * x ** (_K[1:] - 1)))
        T, S = powers @ _T_COEF, powers @ _S_COEF
        dT, dS = dpowers @ _T_COEF, dpowers @ _S_COEF
        return float(2.0 * m * (dT * S - T * dS) / (S * S))
    at = math.atanh(m)
    return -2.0 / m**3 + (at + m / (1.0 - m * m)) / (m * at) ** 2


def two_level_spec(p):
    """Operator form of the two-level model, for the generic master-equation code."""
    H = pauli_compose(0.0, p.hbar * p.omega * Q3)
    axes = 3 if p.isotropic else 2
    couplings = [pauli_compose(0.0, np.eye(3)[j]) for j in range(axes)]
    return SystemSpec(H, couplings, hbar=p.hbar, weights=[1.0, 1.0, p.q3_weight][:axes])


def two_level_bath(p):
    return BathState(kT=p.kT, coupling=p.gamma0, model="emission", hbar=p.hbar, omega=p.omega)


def _precession(m, omega):
    return omega * np.cross(Q3, m)


def bloch_rhs_batch(M, p):
    """:func:`bloch_rhs` for an ``(n, 3)`` array of Bloch vectors."""
    M = np.asarray(M, dtype=float)
    m2 = np.einsum("ij,ij->i", M, M)
    norm = np.sqrt(m2)
    # mu -> 1 on the sphere itself
    mu_m = np.ones_like(norm)
    inside = norm < 1.0
    mu_m[inside] = _mu_array(norm[inside])
    R = p.relaxation_matrix()
    nonlinear = 0.5 * mu_m[:, None] * (m2[:, None] * Q3 + M * M[:, 2:3])
    return (p.omega * np.cross(Q3, M) - p.gamma0 / p.x * (M @ R.T)
            - p.gamma0 * Q3 + p.gamma0 * nonlinear)


def bloch_rhs(m, p):
    """Nonlinear Bloch equation ``dm/dt``."""
    m = np.asarray(m, dtype=float)
    if np.linalg.norm(m) > 1.0 + 1e-12:
        raise ValueError(f"Bloch vector outside the sphere: |m| = {np.linalg.norm(m)}")
    return bloch_rhs_batch(m[None, :], p)[0]


def bloch_equilibrium(p):
    return -Q3 * math.tanh(p.x)


def bloch_rhs_lindblad(m, p):
    """Linear Bloch equation with ``x -> tanh x``; stationary at :func:`bloch_equilibrium`."""
    m = np.asarray(m, dtype=float)
    R = p.relaxation_matrix()
    return _precession(m, p.omega) - p.gamma0 / math.tanh(p.x) * (R @ m) - p.gamma0 * Q3


def bloch_rhs_linear(m, p):
    """Linear Bloch equation without the replacement (nonlinear term dropped)."""
    m = np.asarray(m, dtype=float)
    R = p.relaxation_matrix()
    return _precession(m, p.omega) - p.gamma0 / p.x * (R @ m) - p.gamma0 * Q3


def bloch_linearized_matrix(p):
    """Jacobian of :func:`bloch_rhs` at the equilibrium Bloch vector."""
    s = math.tanh(p.x)
    q3q3 = np.outer(Q3, Q3)
    precession = p.omega * np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return (precession - p.gamma0 / p.x * p.relaxation_matrix()
            - p.gamma0 * 0.5 * s * mu(s) * (np.eye(3) + 3.0 * q3q3)
            - p.gamma0 * s * s * mu_derivative(s) * q3q3)


def nonlinear_part_closed_form(m, a):
    """Closed form of ``A'_rho`` for ``rho = O(1, m)``, ``A = O(0, a)``."""
    m = np.asarray(m, dtype=float)
    a = np.asarray(a, dtype=float)
    norm = float(np.linalg.norm(m))
    vec = (norm * norm * np.eye(3) - np.outer(m, m)) @ a
    return pauli_compose(0.0, -mu(norm) * vec)


def integrate_bloch(m0, p, dt, t_end, rhs=bloch_rhs_batch, record_stride=1):
    """RK4 integration of one or many Bloch vectors; returns ``(times, m)``.

    ``m0`` may be a single vector or an ``(n, 3)`` batch; the result has shape
    ``(n_records, 3)`` or ``(n_records, n, 3)`` accordingly.
    """
    m = np.asarray(m0, dtype=float)
    single = m.ndim == 1
    m = np.atleast_2d(m).copy()
    n_steps = int(round(t_end / dt))
    times, out = [], []
    for step in range(n_steps + 1):
        if step % record_stride == 0 or step == n_steps:
            times.append(step * dt)
            out.append(m.copy())
        if step == n_steps:
            break
        k1 = rhs(m, p)
        k2 = rhs(m + 0.5 * dt * k1, p)
        k3 = rhs(m + 0.5 * dt * k2, p)
        k4 = rhs(m + dt * k3, p)
        m = m + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = np.array(out)
    return np.array(times), (out[:, 0, :] if single else out)


def bloch_rhs_lindblad_batch(M, p):
    M = np.asarray(M, dtype=float)
    R = p.relaxation_matrix()
    return p.omega * np.cross(Q3, M) - p.gamma0 / math.tanh(p.x) * (M @ R.T) - p.gamma0 * Q3


def bloch_vector(rho):
    return pauli_decompose(rho)[1]


def density_from_bloch(m):
    return pauli_compose(1.0, m)


DEFAULT_M0 = (0.8, 0.0, -0.3)


def relaxation_experiment(p, m0=DEFAULT_M0, equation="thermodynamic", solver=None):
    """Relaxation of a two-level system from Bloch vector ``m0`` towards equilibrium.

    ``equation`` is ``"thermodynamic"`` or ``"linearized"`` (integrated as a
    2x2 master equation with ``solver.method``) or ``"lindblad_bloch"`` (the
    linear Bloch equation with the ``tanh`` replacement, integrated as a
    vector). Every trajectory carries ``m1``, ``m2``, ``m3`` and ``m_norm``.
    """
    from .solvers import SolverConfig, Trajectory, evolve

    solver = SolverConfig(t_end=50.0 / max(p.gamma0, 1e-12)) if solver is None else solver
    m0 = np.asarray(m0, dtype=float)
    if equation == "lindblad_bloch":
        times, ms = integrate_bloch(m0, p, solver.dt, solver.t_end, bloch_rhs_lindblad_batch, solver.record_stride)
        series = {
            "energy": 0.5 * p.hbar * p.omega * ms[:, 2],
            "ground_population": 0.5 * (1.0 - ms[:, 2]),
        }
        traj = Trajectory(times, series, meta={"equation": equation, "method": "bloch_vector"})
    elif equation in ("thermodynamic", "linearized"):
        obs = {f"m{j + 1}": SIGMA[j] for j in range(3)}
        traj = evolve(density_from_bloch(m0), two_level_spec(p), two_level_bath(p), solver,
                      equation=equation, observables=obs, overlap_count=2)
    else:
        raise ValueError(f"equation {equation!r} is not available for the two-level system")
    for j in range(3):
        traj.series.setdefault(f"m{j + 1}", ms[:, j] if equation == "lindblad_bloch" else None)
    traj.series["m_norm"] = np.sqrt(sum(traj.series[f"m{j + 1}"] ** 2 for j in range(3)))
    traj.meta.update({"experiment": "two_level_relax", "params": p})
    return traj
