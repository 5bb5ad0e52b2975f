# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-loop kernels; see ``_kernels_py`` for the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, fabs, sqrt, INFINITY

cnp.import_array()

cdef double DEGENERATE_LOG_GAP = 1e-8


def log_mean_matrix(p_in):
    cdef double[::1] p = np.ascontiguousarray(p_in, dtype=np.float64)
    cdef Py_ssize_t d = p.shape[0]
    out_arr = np.zeros((d, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] lp = np.empty(d, dtype=np.float64)
    cdef Py_ssize_t m, n
    cdef double pm, pn, delta, v
    for m in range(d):
        if p[m] > 0.0:
            lp[m] = log(p[m])
    for m in range(d):
        pm = p[m]
        if pm <= 0.0:
            continue
        out[m, m] = pm
        for n in range(m + 1, d):
            pn = p[n]
            if pn <= 0.0:
                continue
            if fabs(pm - pn) < pn:
                delta = log1p((pm - pn) / pn)
            else:
                delta = lp[m] - lp[n]
            if fabs(delta) < DEGENERATE_LOG_GAP:
                v = 0.5 * (pm + pn) * (1.0 - delta * delta / 12.0)
            else:
                v = (pm - pn) / delta
            out[m, n] = v
            out[n, m] = v
    return out_arr


def eigensystem_coupling(Rt_in, p_in):
    cdef double complex[:, ::1] Rt = np.ascontiguousarray(Rt_in, dtype=np.complex128)
    cdef double[::1] p = np.ascontiguousarray(p_in, dtype=np.float64)
    cdef Py_ssize_t d = p.shape[0]
    C_arr = np.zeros((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] C = C_arr
    cdef Py_ssize_t m, n
    cdef double gap, min_gap = INFINITY
    for m in range(d):
        for n in range(d):
            if m == n:
                continue
            gap = p[n] - p[m]
            if fabs(gap) < min_gap:
                min_gap = fabs(gap)
            if gap != 0.0:
                C[m, n] = Rt[m, n] / gap
    return C_arr, min_gap


def mgs_orthonormalize(V_in):
    Q_arr = np.array(V_in, dtype=np.complex128, order="F")
    cdef double complex[::1, :] Q = Q_arr
    cdef Py_ssize_t d = Q.shape[0], k = Q.shape[1]
    cdef Py_ssize_t i, j, r
    cdef double nrm
    cdef double complex proj
    for j in range(k):
        nrm = 0.0
        for r in range(d):
            nrm += Q[r, j].real * Q[r, j].real + Q[r, j].imag * Q[r, j].imag
        nrm = sqrt(nrm)
        for r in range(d):
            Q[r, j] = Q[r, j] / nrm
        for i in range(j + 1, k):
            proj = 0.0
            for r in range(d):
                proj = proj + Q[r, j].conjugate() * Q[r, i]
            for r in range(d):
                Q[r, i] = Q[r, i] - proj * Q[r, j]
    return np.ascontiguousarray(Q_arr)


cdef void _commutator_acc(double complex[:, ::1] A, double complex[:, ::1] B,
                          double complex[:, ::1] out, double complex scale, Py_ssize_t d):
    # out += scale * (A B - B A)
    cdef Py_ssize_t i, j, k
    cdef double complex acc
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc = acc + A[i, k] * B[k, j] - B[i, k] * A[k, j]
            out[i, j] = out[i, j] + scale * acc


def thermo_dissipator(Qt_in, QHt_in, w_in, p_in, double c_S, double c_H):
    cdef double complex[:, :, ::1] Qt = np.ascontiguousarray(Qt_in, dtype=np.complex128)
    cdef double complex[:, :, ::1] QHt = np.ascontiguousarray(QHt_in, dtype=np.complex128)
    cdef double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef double[::1] p = np.ascontiguousarray(p_in, dtype=np.float64)
    cdef Py_ssize_t d = p.shape[0], ncoup = w.shape[0]
    cdef double[:, ::1] W = log_mean_matrix(p_in)
    Rt_arr = np.zeros((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] Rt = Rt_arr
    cdef double complex[:, ::1] X = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] Qrho = np.empty((d, d), dtype=np.complex128)
    cdef double complex[:, ::1] Q
    cdef Py_ssize_t j, m, n
    for j in range(ncoup):
        Q = Qt[j]
        for m in range(d):
            for n in range(d):
                X[m, n] = W[m, n] * QHt[j, m, n]
                Qrho[m, n] = Q[m, n] * (p[n] - p[m])
        _commutator_acc(Q, X, Rt, -w[j] * c_S, d)
        _commutator_acc(Q, Qrho, Rt, -w[j] * c_H, d)
    return Rt_arr
