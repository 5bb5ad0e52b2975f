"""Right-hand sides of the thermodynamic, linearized and Caldeira-Leggett equations.

Units: ``k_B = 1`` throughout (temperatures are energies ``kT``); ``hbar`` is
carried by :class:`SystemSpec`. Each builder returns :class:`RhsParts`, the
reversible part ``(i/hbar)[rho, H]`` and the traceless dissipative part ``R``
separately, because the eigensystem solver consumes ``R`` alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kernels
from .operators import (
    DimensionMismatch,
    SpectralDecomposition,
    anticommutator,
    commutator,
    hermitian,
    spectral_decompose,
)

EQUATIONS = ("thermodynamic", "linearized", "caldeira_leggett")
BATH_MODELS = ("constant", "friction", "emission")


@dataclass(frozen=True)
class BathState:
    """Heat bath seen by the quantum system.

    ``coupling`` is interpreted according to ``model``:

    - ``"constant"``: the bracket strength ``M`` itself,
    - ``"friction"``: the friction coefficient ``zeta``, ``M = zeta kT / hbar**2``,
    - ``"emission"``: the spontaneous emission rate ``gamma0``,
      ``M = gamma0 kT / (hbar omega)``.

    With a finite ``heat_capacity`` the bath has entropy
    ``C ln(H_e / E_ref)`` and temperature ``kT = H_e / C``.
    """

    kT: float
    coupling: float
    model: str = "constant"
    hbar: float = 1.0
    omega: float = 1.0
    heat_capacity: float = math.inf

    def __post_init__(self):
        if not self.kT > 0:
            raise ValueError("bath temperature must be positive")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")
        if self.model not in BATH_MODELS:
            raise ValueError(f"unknown bath model {self.model!r}")
        if not self.heat_capacity > 0:
            raise ValueError("heat capacity must be positive")

    @property
    def strength(self):
        """Bracket strength ``M(T_e)``."""
        if self.model == "friction":
            return self.coupling * self.kT / self.hbar**2
        if self.model == "emission":
            return self.coupling * self.kT / (self.hbar * self.omega)
        return self.coupling

    @property
    def energy(self):
        if math.isinf(self.heat_capacity):
            return math.inf
        return self.heat_capacity * self.kT

    def with_energy(self, energy):
        """Bath after its energy changed to ``energy`` (finite heat capacity only)."""
        if math.isinf(self.heat_capacity):
            return self
        return replace(self, kT=energy / self.heat_capacity)

    def entropy(self, e_ref=None):
        if math.isinf(self.heat_capacity):
            raise ValueError("an infinite bath has no finite entropy")
        e_ref = self.hbar * self.omega if e_ref is None else e_ref
        return self.heat_capacity * math.log(self.energy / e_ref)


def bracket_coefficients(bath):
    """Return ``(c_S, c_H) = ({H_e, S_e}, {H_e, H_e})``; ``kT * c_S == c_H``."""
    M = bath.strength
    return M / bath.kT, M


@dataclass(frozen=True)
class SystemSpec:
    """Hamiltonian, coupling operators and constants of a quantum system.

    ``weights`` scales each coupling's bracket strength (default 1 each).
    ``momentum`` and ``mass`` are only needed by the Caldeira-Leggett builder.
    """

    H: np.ndarray
    couplings: Sequence[np.ndarray]
    hbar: float = 1.0
    weights: Optional[Sequence[float]] = None
    momentum: Optional[np.ndarray] = None
    mass: Optional[float] = None
    _QH: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        H = hermitian(self.H)
        Qs = tuple(hermitian(Q) for Q in self.couplings)
        for Q in Qs:
            if Q.shape != H.shape:
                raise DimensionMismatch("coupling operator and Hamiltonian dimensions differ")
        w = tuple(float(x) for x in self.weights) if self.weights is not None else (1.0,) * len(Qs)
        if len(w) != len(Qs):
            raise ValueError("one weight per coupling operator is required")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "couplings", Qs)
        object.__setattr__(self, "weights", w)
        if self.momentum is not None:
            object.__setattr__(self, "momentum", hermitian(self.momentum))
        object.__setattr__(self, "_QH", tuple(commutator(Q, H) for Q in Qs))

    @property
    def dim(self):
        return self.H.shape[0]

    @property
    def qh_commutators(self):
        """Cached ``[Q_j, H]`` (anti-Hermitian)."""
        return self._QH


class RhsParts(NamedTuple):
    reversible: np.ndarray
    dissipative: np.ndarray

    @property
    def total(self):
        return self.reversible + self.dissipative


def reversible_part(rho, spec):
    return (1j / spec.hbar) * commutator(rho, spec.H)


def _check_state(rho, spec):
    if rho.shape != spec.H.shape:
        raise DimensionMismatch(f"state shape {rho.shape} does not match system dimension {spec.dim}")


def dissipator_thermodynamic_eigenbasis(sd, spec, bath):
    """``<pi_m|R|pi_n>`` of the thermodynamic dissipator, built in the eigenbasis of rho."""
    if sd.dim != spec.dim:
        raise DimensionMismatch(f"state dimension {sd.dim} does not match system dimension {spec.dim}")
    c_S, c_H = bracket_coefficients(bath)
    V = sd.eigenvectors
    Vh = V.conj().T
    Qt = np.array([Vh @ Q @ V for Q in spec.couplings])
    QHt = np.array([Vh @ QH @ V for QH in spec.qh_commutators])
    return kernels.thermo_dissipator(Qt, QHt, np.asarray(spec.weights), sd.eigenvalues, c_S, c_H)


def dissipator_thermodynamic(sd, spec, bath):
    """Traceless dissipative part ``R`` of the nonlinear thermodynamic equation.

    ``R = -sum_j w_j (c_S [Q_j, [Q_j, H]_rho] + c_H [Q_j, [Q_j, rho]])``.
    """
    return sd.from_eigenbasis(dissipator_thermodynamic_eigenbasis(sd, spec, bath))


def dissipator_linearized(rho, spec, bath):
    """``R`` with ``[Q, H]_rho`` replaced by ``{[Q, H], rho} / 2``."""
    rho = np.asarray(rho, dtype=complex)
    _check_state(rho, spec)
    c_S, c_H = bracket_coefficients(bath)
    R = np.zeros_like(rho)
    for Q, QH, w in zip(spec.couplings, spec.qh_commutators, spec.weights):
        R -= w * (0.5 * c_S * commutator(Q, anticommutator(QH, rho)) + c_H * commutator(Q, commutator(Q, rho)))
    return R


def dissipator_caldeira_leggett(rho, spec, bath):
    """Caldeira-Leggett dissipator for a particle coupled through its position.

    ``spec.couplings[0]`` is the position ``Q``; ``bath`` must use the
    ``"friction"`` model so that ``bath.coupling`` is ``zeta``.
    """
    rho = np.asarray(rho, dtype=complex)
    _check_state(rho, spec)
    if spec.momentum is None or spec.mass is None:
        raise ValueError("the Caldeira-Leggett equation needs momentum and mass in the system spec")
    if bath.model != "friction":
        raise ValueError("the Caldeira-Leggett equation needs a friction-model bath")
    Q = spec.couplings[0]
    zeta = bath.coupling * spec.weights[0]
    hbar = spec.hbar
    return (-(1j / hbar) * (zeta / (2.0 * spec.mass)) * commutator(Q, anticommutator(spec.momentum, rho))
            - (zeta * bath.kT / hbar**2) * commutator(Q, commutator(Q, rho)))


def _as_sd(state):
    if isinstance(state, SpectralDecomposition):
        return state
    return spectral_decompose(state)


def _as_rho(state):
    if isinstance(state, SpectralDecomposition):
        return state.reconstruct()
    return np.asarray(state, dtype=complex)


def rhs_thermodynamic(state, spec, bath):
    """Nonlinear thermodynamic master equation; ``state`` is rho or its decomposition."""
    sd = _as_sd(state)
    rho = sd.reconstruct()
    return RhsParts(reversible_part(rho, spec), dissipator_thermodynamic(sd, spec, bath))


def rhs_linearized(state, spec, bath):
    rho = _as_rho(state)
    return RhsParts(reversible_part(rho, spec), dissipator_linearized(rho, spec, bath))


def rhs_caldeira_leggett(state, spec, bath):
    rho = _as_rho(state)
    return RhsParts(reversible_part(rho, spec), dissipator_caldeira_leggett(rho, spec, bath))


def dissipator_eigenbasis(equation, sd, spec, bath):
    """``<pi_m|R|pi_n>`` for any equation."""
    if equation == "thermodynamic":
        return dissipator_thermodynamic_eigenbasis(sd, spec, bath)
    return sd.to_eigenbasis(dissipator_from_sd(equation, sd, spec, bath))


_DISSIPATORS = {
    "thermodynamic": lambda sd, spec, bath: dissipator_thermodynamic(sd, spec, bath),
    "linearized": lambda sd, spec, bath: dissipator_linearized(sd.reconstruct(), spec, bath),
    "caldeira_leggett": lambda sd, spec, bath: dissipator_caldeira_leggett(sd.reconstruct(), spec, bath),
}

_RHS = {
    "thermodynamic": rhs_thermodynamic,
    "linearized": rhs_linearized,
    "caldeira_leggett": rhs_caldeira_leggett,
}


def get_rhs(equation):
    try:
        return _RHS[equation]
    except KeyError:
        raise ValueError(f"unknown equation {equation!r}; expected one of {EQUATIONS}") from None


def dissipator_from_sd(equation, sd, spec, bath):
    """``R`` for any equation, evaluated from a (possibly unsorted) decomposition."""
    try:
        fn = _DISSIPATORS[equation]
    except KeyError:
        raise ValueError(f"unknown equation {equation!r}; expected one of {EQUATIONS}") from None
    return fn(sd, spec, bath)
