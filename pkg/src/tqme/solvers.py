"""Fixed-step RK4 integration of master equations.

Two independent routes are provided:

* ``direct``: RK4 on the density matrix itself, followed by re-Hermitization
  and trace renormalization.
* ``eigensystem``: RK4 on the eigenvalues ``p_n`` and eigenvectors ``pi_n`` of
  the density matrix,

      dp_n/dt    = <pi_n|R|pi_n>
      dpi_n/dt   = -(i/hbar) H pi_n + sum_{m != n} pi_m <pi_m|R|pi_n> / (p_n - p_m)

  followed by modified Gram-Schmidt and renormalization of ``sum p_n``.
  This route needs no diagonalization; a step whose eigenvalue gap drops below
  ``gap_floor`` is redone with the direct route and the state re-decomposed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .diagnostics import entropy_rate, overlaps
from .master import EQUATIONS, dissipator_eigenbasis, dissipator_from_sd, reversible_part
from .operators import (
    SpectralDecomposition,
    dagger,
    eigh_descending,
    operator_log,
    spectral_decompose,
    von_neumann_entropy,
)

log = logging.getLogger(__name__)

METHODS = ("direct", "eigensystem")
DEFAULT_DT = 2.0 * math.pi * 1e-3


class SolverError(RuntimeError):
    """A failed integration step; ``t`` is filled in by :func:`evolve`."""

    t: Optional[float] = None


class NonPhysicalState(SolverError):
    pass


class DegenerateSpectrum(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    dt: float = DEFAULT_DT
    t_end: float = 10.0
    method: str = "direct"
    record_stride: int = 10
    renorm_tol: float = 1e-8
    orth_tol: float = 1e-9
    gap_floor: float = 1e-8
    positivity_tol: float = 1e-6
    store_snapshots: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if int(self.record_stride) < 1:
            raise ValueError("record_stride must be a positive integer")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    series: dict
    snapshots: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.series[name]

    def __contains__(self, name):
        return name in self.series

    @property
    def names(self):
        return list(self.series)

    def final(self, name):
        return float(self.series[name][-1])


def rk4(state, f, dt):
    """One classical RK4 step for a tuple-valued state."""
    k1 = f(state)
    k2 = f(tuple(s + 0.5 * dt * k for s, k in zip(state, k1)))
    k3 = f(tuple(s + 0.5 * dt * k for s, k in zip(state, k2)))
    k4 = f(tuple(s + dt * k for s, k in zip(state, k3)))
    return tuple(s + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d) for s, a, b, c, d in zip(state, k1, k2, k3, k4))


def _clean_density(rho, positivity_tol, renorm_tol=None):
    rho = 0.5 * (rho + dagger(rho))
    tr = np.trace(rho).real
    if renorm_tol is not None and abs(tr - 1.0) > renorm_tol:
        raise NonPhysicalState(f"trace drifted to {tr!r}")
    rho = rho / tr
    lowest = np.linalg.eigvalsh(rho)[0]
    if lowest < -positivity_tol:
        raise NonPhysicalState(f"density matrix eigenvalue {lowest:.3e} below -{positivity_tol:g}")
    return rho


def step_direct(rho, rhs, dt, positivity_tol=1e-6):
    """RK4 step of ``d rho/dt = rhs(rho)``, then Hermitize and renormalize."""
    (rho_new,) = rk4((np.asarray(rho, dtype=complex),), lambda s: (rhs(s[0]),), dt)
    return _clean_density(rho_new, positivity_tol)


def eigensystem_derivative(p, V, Rt, H, hbar=1.0, gap_floor=1e-8):
    """Time derivatives ``(dp, dV)`` given ``Rt = <pi_m|R|pi_n>``."""
    C, gap = kernels.eigensystem_coupling(Rt, p)
    if gap < gap_floor:
        raise DegenerateSpectrum(f"eigenvalue gap {gap:.3e} below {gap_floor:g}")
    dp = np.real(np.diagonal(Rt)).copy()
    dV = (-1j / hbar) * (H @ V) + V @ C
    return dp, dV


def _finish_eigensystem(p, V, orth_tol):
    V = kernels.mgs_orthonormalize(V)
    defect = np.max(np.abs(dagger(V) @ V - np.eye(V.shape[1])))
    if defect > orth_tol:
        raise NonPhysicalState(f"eigenvector orthonormality defect {defect:.3e}")
    p = np.real(p)
    return SpectralDecomposition(p / p.sum(), V)


def step_eigensystem(sd, dissipator, H, dt, hbar=1.0, gap_floor=1e-8, orth_tol=1e-9):
    """RK4 step of the eigenvalue/eigenvector equations.

    ``dissipator(sd)`` returns the traceless dissipative part ``R`` of the
    master equation for the state ``sd``.

    Raises
    ------
    DegenerateSpectrum
        If two eigenvalues come closer than ``gap_floor`` at any stage.
    """
    def f(state):
        p, V = state
        R = dissipator(SpectralDecomposition(p, V))
        return eigensystem_derivative(p, V, dagger(V) @ R @ V, H, hbar, gap_floor)

    p, V = rk4((sd.eigenvalues.astype(float), sd.eigenvectors.astype(complex)), f, dt)
    return _finish_eigensystem(p, V, orth_tol)


class _Run:
    """State and right-hand sides of one :func:`evolve` call."""

    def __init__(self, spec, bath, config, equation, back_reaction):
        self.spec = spec
        self.bath0 = bath
        self.config = config
        self.equation = equation
        self.back_reaction = back_reaction

    def bath_at(self, energy):
        return self.bath0.with_energy(energy) if self.back_reaction else self.bath0

    def dissipator(self, sd, energy):
        return dissipator_from_sd(self.equation, sd, self.spec, self.bath_at(energy))

    def direct_step(self, rho, energy):
        spec = self.spec

        def f(state):
            r, e = state
            if self.equation == "thermodynamic":
                sd = eigh_descending(r)
                Rt = dissipator_eigenbasis(self.equation, sd, spec, self.bath_at(e))
                R = sd.from_eigenbasis(Rt)
            else:
                R = self.dissipator(_RawState(r), e)
            return reversible_part(r, spec) + R, -np.real(np.vdot(spec.H, R))

        rho, energy = rk4((rho, energy), f, self.config.dt)
        return _clean_density(rho, self.config.positivity_tol, self.config.renorm_tol), energy

    def eigen_step(self, sd, energy):
        spec, cfg = self.spec, self.config

        def f(state):
            p, V, e = state
            sd = SpectralDecomposition(p, V)
            Rt = dissipator_eigenbasis(self.equation, sd, spec, self.bath_at(e))
            dp, dV = eigensystem_derivative(p, V, Rt, spec.H, spec.hbar, cfg.gap_floor)
            # tr(H R) = sum_mn Ht_nm Rt_mn in the same basis
            Ht = dagger(V) @ spec.H @ V
            return dp, dV, -np.real(np.sum(Ht.T * Rt))

        p, V, energy = rk4((sd.eigenvalues.astype(float), sd.eigenvectors.astype(complex), energy), f, cfg.dt)
        return _finish_eigensystem(p, V, cfg.orth_tol), energy


class _RawState:
    """Stand-in decomposition for the linear equations, which only need rho."""

    def __init__(self, rho):
        self._rho = rho

    def reconstruct(self):
        return self._rho


def _record(run, rho, sd, energy, observables, overlap_count):
    spec = run.spec
    bath = run.bath_at(energy)
    R = run.dissipator(sd, energy)
    row = {"energy": np.trace(spec.H @ rho).real}
    row["ground_population"] = np.real(np.conj(run.ground) @ rho @ run.ground)
    for n, pn in enumerate(sd.eigenvalues):
        row[f"p_{n}"] = pn
    ov = overlaps(sd, spec.H, overlap_count)
    for j in range(overlap_count):
        row[f"overlap_{j}"] = ov[j]
    row["entropy"] = von_neumann_entropy(sd)
    bath_rate = -np.trace(spec.H @ R).real
    row["bath_energy_rate"] = bath_rate
    if run.equation == "thermodynamic":
        report = entropy_rate(sd, spec, bath, R)
        row["entropy_rate"] = report.total_rate
        row["entropy_rate_canonical"] = report.canonical_form_rate
    else:
        row["entropy_rate"] = -np.trace(operator_log(sd) @ R).real + bath_rate / bath.kT
    row["bath_kT"] = bath.kT
    if run.back_reaction:
        row["bath_energy"] = energy
    for name, op in observables.items():
        row[name] = np.trace(op @ rho).real
    return row


def evolve(rho0, spec, bath, config, equation="thermodynamic", back_reaction=False,
           observables=None, overlap_count=3):
    """Integrate a master equation from ``rho0`` and record observables.

    Parameters
    ----------
    rho0 : ndarray
        Initial density matrix.
    spec : SystemSpec
    bath : BathState
        Bath at ``t = 0``. With ``back_reaction`` the bath energy is
        co-integrated with ``dH_e/dt = -tr(H R)`` and ``kT = H_e / C`` is
        updated at every stage; this requires a finite heat capacity.
    config : SolverConfig
    equation : {"thermodynamic", "linearized", "caldeira_leggett"}
    observables : dict, optional
        Extra operators ``name -> O`` recorded as ``tr(rho O)``.

    Returns
    -------
    Trajectory
        Series ``energy``, ``ground_population``, ``p_n``, ``overlap_j``,
        ``entropy``, ``entropy_rate``, ``bath_energy_rate``, ``bath_kT``
        (plus ``entropy_rate_canonical`` for the thermodynamic equation,
        ``bath_energy`` with back-reaction, and the extra observables).
    """
    if equation not in EQUATIONS:
        raise ValueError(f"unknown equation {equation!r}; expected one of {EQUATIONS}")
    if back_reaction and math.isinf(bath.heat_capacity):
        raise ValueError("back-reaction needs a bath with finite heat capacity")
    observables = dict(observables or {})
    overlap_count = min(overlap_count, spec.dim)
    run = _Run(spec, bath, config, equation, back_reaction)
    _, U = np.linalg.eigh(spec.H)
    run.ground = U[:, 0]

    rho = np.asarray(rho0, dtype=complex)
    sd = spectral_decompose(rho)
    energy = bath.energy if back_reaction else 0.0
    rows, times, snaps = [], [], []
    n_steps = config.n_steps
    stride = int(config.record_stride)
    fallbacks = 0
    for step in range(n_steps + 1):
        t = step * config.dt
        if step % stride == 0 or step == n_steps:
            rec_sd = sd if config.method == "eigensystem" else spectral_decompose(rho)
            rows.append(_record(run, rho, rec_sd, energy, observables, overlap_count))
            times.append(t)
            if config.store_snapshots:
                snaps.append(rho.copy())
        if step == n_steps:
            break
        try:
            if config.method == "direct":
                rho, energy = run.direct_step(rho, energy)
            else:
                try:
                    sd, energy = run.eigen_step(sd, energy)
                except DegenerateSpectrum:
                    fallbacks += 1
                    rho, energy = run.direct_step(sd.reconstruct(), energy)
                    sd = spectral_decompose(rho)
                rho = sd.reconstruct()
        except SolverError as exc:
            exc.t = t
            exc.args = (f"t={t:.6g}: {exc.args[0] if exc.args else ''}",)
            raise
    if fallbacks:
        log.info("eigensystem solver fell back to direct stepping %d times", fallbacks)

    names = list(rows[0])
    series = {name: np.array([r[name] for r in rows], dtype=float) for name in names}
    return Trajectory(
        times=np.array(times),
        series=series,
        snapshots=snaps if config.store_snapshots else None,
        meta={"equation": equation, "method": config.method, "fallback_steps": fallbacks,
              "kernel_backend": kernels.BACKEND},
    )
