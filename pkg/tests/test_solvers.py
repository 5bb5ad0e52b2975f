import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from conftest import fro, random_density, random_hermitian
from tqme.master import BathState, SystemSpec, dissipator_thermodynamic, get_rhs
from tqme.operators import SpectralDecomposition, spectral_decompose
from tqme.oscillator import OscillatorParams, build_operators, initial_state, oscillator_bath, oscillator_spec
from tqme.solvers import (
    DegenerateSpectrum,
    NonPhysicalState,
    SolverConfig,
    SolverError,
    Trajectory,
    eigensystem_derivative,
    evolve,
    step_direct,
    step_eigensystem,
)


def small_system(rng, d=3, M=0.3):
    H = np.diag(np.arange(d, dtype=float)) + 0.2 * random_hermitian(rng, d)
    spec = SystemSpec(H, [random_hermitian(rng, d)])
    return spec, BathState(kT=0.6, coupling=M)


def thermo_rhs(spec, bath):
    rhs = get_rhs("thermodynamic")
    return lambda rho: rhs(rho, spec, bath).total


# --- configuration --------------------------------------------------------


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(t_end=-1.0), dict(method="euler"), dict(record_stride=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_config_defaults():
    cfg = SolverConfig()
    assert cfg.dt == pytest.approx(2 * math.pi * 1e-3)
    assert cfg.record_stride == 10
    assert SolverConfig(dt=0.1, t_end=1.0).n_steps == 10


# --- direct stepping ------------------------------------------------------


def test_direct_von_neumann_phases(rng):
    E = np.array([0.0, 1.0, 2.5])
    H = np.diag(E)
    rho0 = random_density(rng, 3)
    rho = rho0.copy()
    dt, n = 0.002, 1000
    for _ in range(n):
        rho = step_direct(rho, lambda r: 1j * (r @ H - H @ r), dt)
    t = n * dt
    expected = rho0 * np.exp(-1j * (E[:, None] - E[None, :]) * t)
    assert np.allclose(np.diagonal(rho), np.diagonal(rho0), atol=1e-12)
    assert fro(rho - expected) < 1e-9


def test_direct_first_step_consistency(rng):
    spec, bath = small_system(rng)
    f = thermo_rhs(spec, bath)
    rho0 = random_density(rng, 3)
    slope = f(rho0)
    errs = []
    for dt in (1e-2, 1e-3, 1e-4):
        errs.append(fro((step_direct(rho0, f, dt) - rho0) / dt - slope))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 1e-3


def test_direct_convergence_order(rng):
    spec, bath = small_system(rng, d=4, M=0.5)
    f = thermo_rhs(spec, bath)
    rho0 = random_density(rng, 4)
    T = 1.0

    def run(dt):
        rho = rho0
        for _ in range(int(round(T / dt))):
            rho = step_direct(rho, f, dt)
        return rho

    ref = run(T / 640)
    dts = np.array([T / 10, T / 20, T / 40])
    errs = np.array([fro(run(dt) - ref) for dt in dts])
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope >= 3.9


def test_direct_nonphysical():
    with pytest.raises(NonPhysicalState):
        step_direct(np.eye(2) / 2, lambda r: np.diag([1.0, -1.0]).astype(complex), 1.0)


# --- eigensystem stepping -------------------------------------------------


def test_eigensystem_zero_dissipator_is_unitary(rng):
    d = 3
    H = random_hermitian(rng, d)
    sd = spectral_decompose(random_density(rng, d))
    dt, n = 0.002, 500
    state = sd
    for _ in range(n):
        state = step_eigensystem(state, lambda s: np.zeros((d, d), complex), H, dt)
    e, U = np.linalg.eigh(H)
    prop = (U * np.exp(-1j * e * n * dt)) @ U.conj().T
    assert np.allclose(state.eigenvalues, sd.eigenvalues, atol=1e-14)
    assert fro(state.eigenvectors - prop @ sd.eigenvectors) < 1e-9


def test_eigensystem_matches_direct(rng):
    # both routes are 4th order in dt, so their gap must shrink ~16x per halving
    spec, bath = small_system(rng, d=4)
    rho0 = random_density(rng, 4)
    f = thermo_rhs(spec, bath)
    diss = lambda s: dissipator_thermodynamic(s, spec, bath)
    gaps = []
    for dt in (0.01, 0.005):
        rho, sd = rho0, spectral_decompose(rho0)
        for _ in range(int(round(0.5 / dt))):
            rho = step_direct(rho, f, dt)
            sd = step_eigensystem(sd, diss, spec.H, dt)
        gaps.append(fro(sd.reconstruct() - rho))
        V = sd.eigenvectors
        assert np.max(np.abs(V.conj().T @ V - np.eye(4))) < 1e-9
    assert gaps[1] < 1e-6
    assert gaps[0] / gaps[1] > 12.0


def test_eigenvalue_sum_rule(rng):
    spec, bath = small_system(rng, d=4)
    sd = spectral_decompose(random_density(rng, 4))
    Rt = sd.to_eigenbasis(dissipator_thermodynamic(sd, spec, bath))
    dp, _ = eigensystem_derivative(sd.eigenvalues, sd.eigenvectors, Rt, spec.H)
    assert abs(dp.sum()) < 1e-12


def test_degenerate_spectrum_detected():
    sd = SpectralDecomposition(np.array([0.5, 0.5]), np.eye(2, dtype=complex))
    with pytest.raises(DegenerateSpectrum):
        step_eigensystem(sd, lambda s: np.zeros((2, 2), complex), np.diag([0.0, 1.0]), 0.01)


def test_degenerate_start_falls_back(rng):
    spec, bath = small_system(rng, d=3)
    cfg = dict(dt=0.01, t_end=0.5, record_stride=5)
    a = evolve(np.eye(3) / 3, spec, bath, SolverConfig(method="eigensystem", **cfg))
    b = evolve(np.eye(3) / 3, spec, bath, SolverConfig(method="direct", **cfg))
    assert a.meta["fallback_steps"] >= 1
    for name in ("energy", "p_0", "p_2", "entropy"):
        assert np.allclose(a[name], b[name], atol=1e-8)


# --- evolve ---------------------------------------------------------------


def test_trajectory_layout(rng):
    spec, bath = small_system(rng)
    traj = evolve(random_density(rng, 3), spec, bath, SolverConfig(dt=0.01, t_end=0.234, record_stride=10),
                  observables={"h": spec.H})
    assert isinstance(traj, Trajectory)
    assert np.all(np.diff(traj.times) > 0)
    assert traj.times[-1] == pytest.approx(0.23)
    for name in traj.names:
        assert len(traj[name]) == len(traj.times)
    assert np.allclose(traj["h"], traj["energy"])
    assert "entropy_rate_canonical" in traj
    assert traj.final("energy") == traj["energy"][-1]


def test_zero_coupling_conserves_energy(rng):
    spec, _ = small_system(rng)
    bath = BathState(kT=0.6, coupling=0.0)
    for method in ("direct", "eigensystem"):
        traj = evolve(random_density(rng, 3), spec, bath, SolverConfig(dt=0.01, t_end=2.0, method=method))
        assert np.ptp(traj["energy"]) < 1e-10


@pytest.mark.parametrize("method", ["direct", "eigensystem"])
def test_back_reaction_conserves_total_energy(method):
    p = OscillatorParams(N=5, zeta=0.2, kT0=1.5, kTe=0.5)
    ops = build_operators(p)
    bath = BathState(kT=p.kTe, coupling=p.zeta, model="friction", heat_capacity=4.0)
    traj = evolve(initial_state(p, ops), oscillator_spec(p, ops), bath,
                  SolverConfig(t_end=20.0, method=method), back_reaction=True)
    total = traj["energy"] + traj["bath_energy"]
    assert np.ptp(total) < 1e-8
    assert traj["bath_kT"][-1] > traj["bath_kT"][0]
    assert np.allclose(traj["bath_kT"], traj["bath_energy"] / 4.0)


def test_back_reaction_needs_finite_bath(rng):
    spec, bath = small_system(rng)
    with pytest.raises(ValueError):
        evolve(np.eye(3) / 3, spec, bath, SolverConfig(t_end=0.1), back_reaction=True)


def test_unknown_equation(rng):
    spec, bath = small_system(rng)
    with pytest.raises(ValueError):
        evolve(np.eye(3) / 3, spec, bath, SolverConfig(t_end=0.1), equation="redfield")


def test_error_carries_time():
    H = np.diag([0.0, 1.0])
    spec = SystemSpec(H, [np.array([[0, 1], [1, 0]], dtype=float)])
    bath = BathState(kT=1.0, coupling=50.0)
    rho0 = np.diag([1.0 - 1e-9, 1e-9])
    with pytest.raises(SolverError) as info:
        evolve(rho0, spec, bath, SolverConfig(dt=0.5, t_end=5.0), equation="linearized")
    assert info.value.t is not None
    assert str(info.value).startswith("t=")


def test_positivity_along_quench():
    p = OscillatorParams()
    traj = evolve(initial_state(p), oscillator_spec(p), oscillator_bath(p),
                  SolverConfig(t_end=20.0, record_stride=50, store_snapshots=True))
    lowest = min(np.linalg.eigvalsh(r)[0] for r in traj.snapshots)
    assert lowest >= -1e-8


def test_concurrent_runs_are_independent(rng):
    spec, bath = small_system(rng)
    rho0 = random_density(rng, 3)
    cfg = SolverConfig(dt=0.01, t_end=1.0)
    serial = evolve(rho0, spec, bath, cfg)
    with ThreadPoolExecutor(max_workers=4) as pool:
        results = list(pool.map(lambda _: evolve(rho0, spec, bath, cfg), range(4)))
    for traj in results:
        for name in serial.names:
            assert np.array_equal(traj[name], serial[name])
