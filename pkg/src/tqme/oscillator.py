"""Damped harmonic oscillator in a truncated energy basis ``|0>, ..., |N>``."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .master import BathState, SystemSpec
from .operators import canonical_state, commutator
from .solvers import SolverConfig, evolve


class OverdampedUnsupported(ValueError):
    pass


@dataclass(frozen=True)
class OscillatorParams:
    """Truncation ``N``, mass, frequency, friction ``zeta`` and the two temperatures.

    Defaults are the low-temperature quench: ``kT0 = 1.5 hbar omega``,
    ``kTe = 0.5 hbar omega``, ``zeta / m = omega / 10``, ``N = 9``.
    """

    N: int = 9
    mass: float = 1.0
    omega: float = 1.0
    zeta: float = 0.1
    kT0: float = 1.5
    kTe: float = 0.5
    hbar: float = 1.0

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError("N must be at least 1")
        if self.mass <= 0 or self.omega <= 0 or self.hbar <= 0:
            raise ValueError("mass, omega and hbar must be positive")
        if self.zeta < 0:
            raise ValueError("zeta must be non-negative")
        if self.kT0 <= 0 or self.kTe <= 0:
            raise ValueError("temperatures must be positive")

    @property
    def dim(self):
        return int(self.N) + 1


class OscillatorOperators(NamedTuple):
    H: np.ndarray
    Q: np.ndarray
    QH: np.ndarray
    P: np.ndarray
    P2: np.ndarray


def build_operators(p):
    """Truncated ``H``, ``Q``, ``[Q, H]``, ``P = (m / i hbar)[Q, H]`` and ``P @ P``."""
    n = np.arange(p.dim)
    H = np.diag(p.hbar * p.omega * (n + 0.5)).astype(complex)
    off = np.sqrt(n[1:].astype(float))
    Q = math.sqrt(p.hbar / (2.0 * p.mass * p.omega)) * (np.diag(off, 1) + np.diag(off, -1)).astype(complex)
    QH = commutator(Q, H)
    P = (p.mass / (1j * p.hbar)) * QH
    P = 0.5 * (P + P.conj().T)
    return OscillatorOperators(H, Q, QH, P, P @ P)


def oscillator_spec(p, ops=None):
    ops = build_operators(p) if ops is None else ops
    return SystemSpec(ops.H, [ops.Q], hbar=p.hbar, momentum=ops.P, mass=p.mass)


def oscillator_bath(p, kT=None):
    return BathState(kT=p.kTe if kT is None else kT, coupling=p.zeta, model="friction", hbar=p.hbar, omega=p.omega)


def initial_state(p, ops=None):
    """Canonical state at ``kT0`` on the truncated basis, renormalized."""
    ops = build_operators(p) if ops is None else ops
    return canonical_state(ops.H, p.kT0)


def equilibrium_p2(p, kT=None):
    """Exact ``<P**2>`` of the (untruncated) oscillator in equilibrium at ``kT``."""
    kT = p.kTe if kT is None else kT
    x = p.hbar * p.omega / (2.0 * kT)
    return 0.5 * p.hbar * p.omega * p.mass / math.tanh(x)


def cl_moment_solution(t, p, p2_0):
    """Closed-form ``<P**2>_t`` of the Caldeira-Leggett equation (underdamped).

    Valid for an initial state whose eigenvectors are energy eigenstates.
    """
    g = p.zeta / p.mass
    disc = 4.0 * p.omega**2 - g * g
    if disc <= 0:
        raise OverdampedUnsupported("closed form requires 4 omega^2 > (zeta/m)^2")
    W = math.sqrt(disc)
    t = np.asarray(t, dtype=float)
    base = p.mass * p.kTe
    bracket = 4.0 * p.omega**2 - g * g * np.cos(W * t) - g * W * np.sin(W * t)
    out = base + (p2_0 - base) / disc * np.exp(-g * t) * bracket
    return float(out) if out.ndim == 0 else out


def cl_moment_ode_rhs(y, p):
    """First-order form of the third-order ODE for ``<P**2>``: ``y = (u, u', u'')``."""
    g = p.zeta / p.mass
    w2 = p.omega**2
    u, du, d2u = y
    d3u = (4.0 * w2 * p.kTe * p.zeta - 3.0 * g * d2u - (4.0 * w2 + 2.0 * g * g) * du - 4.0 * w2 * g * u)
    return np.array([du, d2u, d3u])


def cl_moment_initial(p, p2_0):
    """Initial ``(u, u', u'')`` for a state diagonal in the energy basis."""
    g = p.zeta / p.mass
    gap = p2_0 - p.mass * p.kTe
    return np.array([p2_0, -2.0 * g * gap, 4.0 * g * g * gap])


def truncation_error_p2(p):
    """Relative error of the truncated initial ``<P**2>`` against the exact value at ``kT0``."""
    ops = build_operators(p)
    rho0 = initial_state(p, ops)
    trunc = np.trace(ops.P2 @ rho0).real
    exact = equilibrium_p2(p, p.kT0)
    return (trunc - exact) / exact


def quench_experiment(p, equation="thermodynamic", solver=None, overlap_count=3):
    """Relaxation after quenching the bath from ``kT0`` to ``kTe``.

    ``equation`` is ``"thermodynamic"``, ``"linearized"`` or ``"caldeira_leggett"``
    (the last two coincide for this system). Records ``p2`` in addition to the
    standard :func:`~tqme.solvers.evolve` series.
    """
    solver = SolverConfig(t_end=80.0) if solver is None else solver
    ops = build_operators(p)
    spec = oscillator_spec(p, ops)
    traj = evolve(initial_state(p, ops), spec, oscillator_bath(p), solver, equation=equation,
                  observables={"p2": ops.P2}, overlap_count=overlap_count)
    traj.meta.update({"experiment": "oscillator_quench", "params": p})
    return traj


def with_friction(p, factor):
    return replace(p, zeta=p.zeta * factor)
