"""Compare the compiled kernels with the numpy fallback.

Times each kernel on random eigenbasis data for a range of dimensions, then
runs the default oscillator quench once per backend in a fresh interpreter.

    python3 benchmarks/bench_kernels.py [--dims 2 4 10 16 32] [--repeat 200]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from tqme import _kernels_py

try:
    from tqme import _kernels
except ImportError:
    _kernels = None

QUENCH_SNIPPET = """
import time
from tqme import kernels
from tqme.oscillator import OscillatorParams, quench_experiment
from tqme.solvers import SolverConfig
for method in ("direct", "eigensystem"):
    t = time.perf_counter()
    quench_experiment(OscillatorParams(), solver=SolverConfig(t_end=80.0, method=method))
    print(f"{kernels.BACKEND:8s} quench {method:12s} {time.perf_counter() - t:8.2f} s")
"""


def random_inputs(rng, d, n_couplings=1):
    def herm():
        G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        return 0.5 * (G + G.conj().T)

    p = np.sort(rng.dirichlet(np.ones(d)))[::-1].copy()
    Qt = np.array([herm() for _ in range(n_couplings)])
    QHt = np.array([1j * herm() for _ in range(n_couplings)])
    V = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return p, Qt, QHt, np.ones(n_couplings), herm(), V


def time_kernels(module, args, repeat):
    p, Qt, QHt, w, Rt, V = args
    calls = {
        "log_mean_matrix": lambda: module.log_mean_matrix(p),
        "eigensystem_coupling": lambda: module.eigensystem_coupling(Rt, p),
        "mgs_orthonormalize": lambda: module.mgs_orthonormalize(V),
        "thermo_dissipator": lambda: module.thermo_dissipator(Qt, QHt, w, p, 0.2, 0.1),
    }
    return {name: min(timeit.repeat(f, number=repeat, repeat=3)) / repeat for name, f in calls.items()}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--dims", type=int, nargs="+", default=[2, 4, 10, 16, 32])
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--skip-quench", action="store_true")
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"{'kernel':22s} {'dim':>4s} {'python us':>10s} {'cython us':>10s} {'speedup':>8s}")
    for d in args.dims:
        inputs = random_inputs(rng, d)
        py = time_kernels(_kernels_py, inputs, args.repeat)
        cy = time_kernels(_kernels, inputs, args.repeat) if _kernels is not None else {}
        for name, t_py in py.items():
            t_cy = cy.get(name, float("nan"))
            print(f"{name:22s} {d:4d} {t_py * 1e6:10.1f} {t_cy * 1e6:10.1f} {t_py / t_cy:8.2f}")

    sys.stdout.flush()
    if not args.skip_quench:
        for pure in ("1", "0"):
            env = dict(os.environ, TQME_PURE_PYTHON=pure)
            subprocess.run([sys.executable, "-c", QUENCH_SNIPPET], env=env, check=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
