"""Compiled inner loop for propagating a block of spin-down initial states.

Each step Hamiltonian is H_j = |up><down| (x) B_j + h.c. with tridiagonal B_j.
Its exponential follows from the eigensystem of the pentadiagonal B_j^dagger B_j,
which is obtained from LAPACK's Hermitian band solver ``zhbev``.
"""

import ctypes

import numba
import numpy as np
from numba.extending import get_cython_function_address

_vp = ctypes.c_void_p
_zhbev = ctypes.CFUNCTYPE(None, *([_vp] * 12))(
    get_cython_function_address("scipy.linalg.cython_lapack", "zhbev")
)

_KD = 2  # bandwidth of B^dagger B for tridiagonal B


@numba.njit(cache=False)
def band_eigensystems(diag, sub, sup):
    """Eigenvalues/eigenvectors of B_j^dagger B_j for every step j.

    B_j[n, n] = diag[j, n], B_j[n+1, n] = sub[j, n], B_j[n, n+1] = sup[j, n].
    Returns (lam, w, failed_step) with failed_step = -1 on success.
    """
    n_steps, d = diag.shape
    lam = np.empty((n_steps, d))
    w = np.empty((n_steps, d, d), np.complex128)
    bmat = np.zeros((d, d), np.complex128)
    ab = np.empty((d, _KD + 1), np.complex128)  # Fortran (KD+1, d) upper band storage
    zc = np.empty((d, d), np.complex128)
    ev = np.empty(d)
    jobz = np.array([ord("V")], np.uint8)
    uplo = np.array([ord("U")], np.uint8)
    n_arr = np.array([d], np.int32)
    kd_arr = np.array([_KD], np.int32)
    ldab = np.array([_KD + 1], np.int32)
    ldz = np.array([d], np.int32)
    work = np.empty(d, np.complex128)
    rwork = np.empty(max(1, 3 * d - 2))
    info = np.zeros(1, np.int32)
    for j in range(n_steps):
        for n in range(d):
            bmat[n, n] = diag[j, n]
            if n + 1 < d:
                bmat[n + 1, n] = sub[j, n]
                bmat[n, n + 1] = sup[j, n]
        for col in range(d):
            for row in range(max(0, col - _KD), col + 1):
                acc = 0j
                for k in range(max(0, row - 1), min(d, row + 2)):
                    acc += np.conj(bmat[k, row]) * bmat[k, col]
                ab[col, _KD + row - col] = acc
        _zhbev(
            jobz.ctypes, uplo.ctypes, n_arr.ctypes, kd_arr.ctypes, ab.ctypes, ldab.ctypes,
            ev.ctypes, zc.ctypes, ldz.ctypes, work.ctypes, rwork.ctypes, info.ctypes,
        )
        if info[0] != 0:
            return lam, w, j
        for k in range(d):
            lam[j, k] = ev[k]
            for n in range(d):
                w[j, n, k] = zc[k, n]
    return lam, w, -1


@numba.njit(cache=True)
def propagate_columns(diag, sub, sup, lam, w, dt, down, up):
    """Apply every step unitary, in order, to the column states (down, up) in place."""
    n_steps, d = diag.shape
    n_cols = down.shape[1]
    a = np.empty((d, n_cols), np.complex128)
    g = np.empty((d, n_cols), np.complex128)
    e = np.empty((d, n_cols), np.complex128)
    cs = np.empty(d)
    sn = np.empty(d)
    vs = np.empty(d)
    for j in range(n_steps):
        for k in range(d):
            s = np.sqrt(max(lam[j, k], 0.0))
            x = s * dt
            cs[k] = np.cos(x)
            if x > 1e-4:
                sn[k] = np.sin(x) / s
                h = np.sin(0.5 * x) / s
                vs[k] = -2.0 * h * h
            else:
                x2 = x * x
                sn[k] = dt * (1.0 - x2 / 6.0 + x2 * x2 / 120.0)
                vs[k] = -0.5 * dt * dt * (1.0 - x2 / 12.0 + x2 * x2 / 360.0)
        # g = B^dagger up
        for q in range(n_cols):
            for n in range(d):
                acc = np.conj(diag[j, n]) * up[n, q]
                if n + 1 < d:
                    acc += np.conj(sub[j, n]) * up[n + 1, q]
                if n > 0:
                    acc += np.conj(sup[j, n - 1]) * up[n - 1, q]
                g[n, q] = acc
        # in the eigenbasis of B^dagger B
        for q in range(n_cols):
            for k in range(d):
                acc1 = 0j
                acc2 = 0j
                for n in range(d):
                    c = np.conj(w[j, n, k])
                    acc1 += c * down[n, q]
                    acc2 += c * g[n, q]
                a[k, q] = cs[k] * acc1 - 1j * sn[k] * acc2
                e[k, q] = -1j * sn[k] * acc1 + vs[k] * acc2
        for q in range(n_cols):
            for n in range(d):
                acc1 = 0j
                acc2 = 0j
                for k in range(d):
                    acc1 += w[j, n, k] * a[k, q]
                    acc2 += w[j, n, k] * e[k, q]
                down[n, q] = acc1
                g[n, q] = acc2
            # up += B g
            for n in range(d):
                acc = diag[j, n] * g[n, q]
                if n > 0:
                    acc += sub[j, n - 1] * g[n - 1, q]
                if n + 1 < d:
                    acc += sup[j, n] * g[n + 1, q]
                up[n, q] += acc
