# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: mixed-radix FFT, 1xK convolution, 1x2 max pooling.

Signatures mirror ``clstm_bearing._kernels_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"


cdef void _fft_work(double complex* out, const double complex* inp,
                    Py_ssize_t fstride, const int* factors,
                    const double complex* tw, Py_ssize_t nfft,
                    double complex* scratch) noexcept nogil:
    cdef int p = factors[0]
    cdef int m = factors[1]
    cdef Py_ssize_t q, k, s, j
    cdef double complex acc
    if m == 1:
        for q in range(p):
            out[q] = inp[q * fstride]
    else:
        for q in range(p):
            _fft_work(out + q * m, inp + q * fstride, fstride * p,
                      factors + 2, tw, nfft, scratch)
    # butterflies: out[k + s*m] = sum_q W_N^{qk} W_p^{qs} Y_q[k]
    for k in range(m):
        for q in range(p):
            scratch[q] = out[k + q * m] * tw[q * k * fstride]
        for s in range(p):
            acc = scratch[0]
            for q in range(1, p):
                acc = acc + scratch[q] * tw[(q * s * fstride * m) % nfft]
            out[k + s * m] = acc


def fft_rows(x, radices):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] xin = np.ascontiguousarray(x, dtype=np.complex128)
    cdef Py_ssize_t rows = xin.shape[0]
    cdef Py_ssize_t n = xin.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] out = np.empty((rows, n), dtype=np.complex128)
    if n == 1:
        out[:, :] = xin
        return out
    cdef list rad = list(radices)
    cdef int nf = len(rad)
    cdef int* factors = <int*> malloc(2 * nf * sizeof(int))
    cdef double complex* tw = <double complex*> malloc(n * sizeof(double complex))
    cdef double complex scratch[8]
    cdef Py_ssize_t i, r
    cdef Py_ssize_t rem = n
    cdef double ang
    if factors == NULL or tw == NULL:
        free(factors)
        free(tw)
        raise MemoryError()
    try:
        for i in range(nf):
            factors[2 * i] = rad[i]
            rem //= rad[i]
            factors[2 * i + 1] = rem
        for i in range(n):
            ang = -2.0 * M_PI * i / n
            tw[i] = cos(ang) + 1j * sin(ang)
        with nogil:
            for r in range(rows):
                _fft_work(&out[r, 0], &xin[r, 0], 1, factors, tw, n, scratch)
    finally:
        free(factors)
        free(tw)
    return out


cdef inline void _axpy(double* y, const double* x, double a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        y[i] += a * x[i]


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += a[i] * b[i]
    return acc


def conv1xk_forward(x, w, b):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t B = xv.shape[0], H = xv.shape[1], W = xv.shape[2], Cin = xv.shape[3]
    cdef Py_ssize_t K = wv.shape[0], Cout = wv.shape[2]
    cdef Py_ssize_t left = (K - 1) // 2
    y = np.empty((B, H, W, Cout))
    cdef double[:, :, :, ::1] yv = y
    cdef Py_ssize_t n, h, i, t, ci, co, src
    cdef double* yrow
    cdef const double* xrow
    with nogil:
        for n in range(B):
            for h in range(H):
                for i in range(W):
                    yrow = &yv[n, h, i, 0]
                    for co in range(Cout):
                        yrow[co] = bv[co]
                    for t in range(K):
                        src = i + t - left
                        if src < 0 or src >= W:
                            continue
                        xrow = &xv[n, h, src, 0]
                        for ci in range(Cin):
                            _axpy(yrow, &wv[t, ci, 0], xrow[ci], Cout)
    return y


def conv1xk_backward(dy, x, w):
    cdef double[:, :, :, ::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t B = xv.shape[0], H = xv.shape[1], W = xv.shape[2], Cin = xv.shape[3]
    cdef Py_ssize_t K = wv.shape[0], Cout = wv.shape[2]
    cdef Py_ssize_t left = (K - 1) // 2
    dx = np.zeros((B, H, W, Cin))
    dw = np.zeros((K, Cin, Cout))
    db = np.zeros(Cout)
    cdef double[:, :, :, ::1] dxv = dx
    cdef double[:, :, ::1] dwv = dw
    cdef double[::1] dbv = db
    cdef Py_ssize_t n, h, i, t, ci, co, src
    cdef const double* grow
    cdef const double* xrow
    cdef double* dxrow
    with nogil:
        for n in range(B):
            for h in range(H):
                for i in range(W):
                    grow = &dyv[n, h, i, 0]
                    for co in range(Cout):
                        dbv[co] += grow[co]
                    for t in range(K):
                        src = i + t - left
                        if src < 0 or src >= W:
                            continue
                        xrow = &xv[n, h, src, 0]
                        dxrow = &dxv[n, h, src, 0]
                        for ci in range(Cin):
                            _axpy(&dwv[t, ci, 0], grow, xrow[ci], Cout)
                            dxrow[ci] += _dot(&wv[t, ci, 0], grow, Cout)
    return dx, dw, db


def maxpool1x2_forward(x):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t B = xv.shape[0], H = xv.shape[1], W = xv.shape[2], C = xv.shape[3]
    if W % 2:
        raise ValueError(f"max pooling needs an even width, got {W}")
    cdef Py_ssize_t half = W // 2
    y = np.empty((B, H, half, C))
    arg = np.empty((B, H, half, C), dtype=np.uint8)
    cdef double[:, :, :, ::1] yv = y
    cdef unsigned char[:, :, :, ::1] av = arg
    cdef Py_ssize_t n, h, j, c
    cdef double a, b
    with nogil:
        for n in range(B):
            for h in range(H):
                for j in range(half):
                    for c in range(C):
                        a = xv[n, h, 2 * j, c]
                        b = xv[n, h, 2 * j + 1, c]
                        if b > a:
                            yv[n, h, j, c] = b
                            av[n, h, j, c] = 1
                        else:
                            yv[n, h, j, c] = a
                            av[n, h, j, c] = 0
    return y, arg


def maxpool1x2_backward(dy, arg):
    cdef double[:, :, :, ::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef const unsigned char[:, :, :, ::1] av = np.ascontiguousarray(arg, dtype=np.uint8)
    cdef Py_ssize_t B = dyv.shape[0], H = dyv.shape[1], half = dyv.shape[2], C = dyv.shape[3]
    dx = np.zeros((B, H, 2 * half, C))
    cdef double[:, :, :, ::1] dxv = dx
    cdef Py_ssize_t n, h, j, c
    with nogil:
        for n in range(B):
            for h in range(H):
                for j in range(half):
                    for c in range(C):
                        dxv[n, h, 2 * j + av[n, h, j, c], c] = dyv[n, h, j, c]
    return dx
