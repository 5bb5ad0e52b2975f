"""Pure numpy implementations of the inner-loop kernels.

Used when the compiled ``_kernels`` extension is unavailable, or when
``TQME_PURE_PYTHON=1`` is set. Signatures and results match the extension.
"""
import numpy as np

DEGENERATE_LOG_GAP = 1e-8


def log_mean_matrix(p):
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    pm = p[:, None]
    pn = p[None, :]
    zero = (pm == 0.0) | (pn == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.log(p)
        diff = pm - pn
        # log1p keeps the small differences accurate
        close = np.abs(diff) < pn
        delta = np.where(close, np.log1p(diff / np.where(close, pn, 1.0)), lp[:, None] - lp[None, :])
        exact = diff / delta
    series = 0.5 * (pm + pn) * (1.0 - delta * delta / 12.0)
    out = np.where(np.abs(delta) < DEGENERATE_LOG_GAP, series, exact)
    out[zero] = 0.0
    return out


def eigensystem_coupling(Rt, p):
    """Return ``C[m, n] = Rt[m, n] / (p[n] - p[m])`` (zero diagonal) and the smallest gap."""
    p = np.asarray(p, dtype=float)
    gaps = p[None, :] - p[:, None]
    d = p.shape[0]
    off = ~np.eye(d, dtype=bool)
    min_gap = float(np.min(np.abs(gaps[off]))) if d > 1 else np.inf
    use = off & (gaps != 0.0)
    C = np.where(use, Rt / np.where(use, gaps, 1.0), 0.0)
    return C.astype(complex), min_gap


def mgs_orthonormalize(V):
    """Modified Gram-Schmidt on the columns of ``V``; returns a new array."""
    Q = np.array(V, dtype=complex)
    d = Q.shape[1]
    for k in range(d):
        Q[:, k] /= np.linalg.norm(Q[:, k])
        if k + 1 < d:
            proj = np.conj(Q[:, k]) @ Q[:, k + 1:]
            Q[:, k + 1:] -= np.outer(Q[:, k], proj)
    return Q


def thermo_dissipator(Qt, QHt, w, p, c_S, c_H):
    """Thermodynamic dissipator in the eigenbasis of rho.

    ``Qt[j]`` and ``QHt[j]`` are ``Q_j`` and ``[Q_j, H]`` in that basis, ``p``
    the eigenvalues. Returns ``<pi_m|R|pi_n>``.
    """
    p = np.asarray(p, dtype=float)
    W = log_mean_matrix(p)
    Rt = np.zeros((p.shape[0], p.shape[0]), dtype=complex)
    for j in range(len(w)):
        Q = Qt[j]
        X = W * QHt[j]
        Qrho = Q * p[None, :] - p[:, None] * Q
        Rt -= w[j] * (c_S * (Q @ X - X @ Q) + c_H * (Q @ Qrho - Qrho @ Q))
    return Rt
