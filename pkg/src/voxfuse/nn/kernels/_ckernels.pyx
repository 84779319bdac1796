# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
# cython: initializedcheck=False
"""Compiled numeric kernels; signature-compatible with `_numpy_backend`.

gemm drives BLAS dgemm directly. Row-major inputs are handed to the
column-major routine by computing C^T = op(B)^T * op(A)^T, so no copies
or transposes are materialized.
"""

import numpy as np

from libc.math cimport erf, exp, sqrt, pow
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_blas cimport dgemm

BACKEND = "cy"

cdef double _INV_SQRT2 = 1.0 / sqrt(2.0)
cdef double _INV_SQRT_2PI = 1.0 / sqrt(6.283185307179586)


def gemm(double[:, ::1] a, double[:, ::1] b, bint trans_a=False,
         bint trans_b=False):
    cdef int m = a.shape[1] if trans_a else a.shape[0]
    cdef int k = a.shape[0] if trans_a else a.shape[1]
    cdef int b_rows = b.shape[0]
    cdef int b_cols = b.shape[1]
    cdef int n = b_rows if trans_b else b_cols
    cdef int kb = b_cols if trans_b else b_rows
    if k != kb:
        raise ValueError(
            f"gemm inner dimensions differ: {k} vs {kb}")
    out = np.zeros((m, n), dtype=np.float64)
    if m == 0 or n == 0 or k == 0:
        return out
    cdef double[:, ::1] c = out
    cdef double alpha = 1.0
    cdef double beta = 0.0
    # BLAS slot "A" holds b's buffer, slot "B" holds a's buffer.
    cdef char ta = b'T' if trans_b else b'N'
    cdef char tb = b'T' if trans_a else b'N'
    # leading dimension of a row-major array seen column-major is its
    # row-major column count
    cdef int lda = b_cols
    cdef int ldb = a.shape[1]
    cdef int ldc = n
    with nogil:
        dgemm(&ta, &tb, &n, &m, &k, &alpha, &b[0, 0], &lda,
              &a[0, 0], &ldb, &beta, &c[0, 0], &ldc)
    return out


def relu_fwd(double[:, ::1] x):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                o[i, j] = x[i, j] if x[i, j] > 0.0 else 0.0
    return out


def relu_bwd(double[:, ::1] x, double[:, ::1] gout):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                o[i, j] = gout[i, j] if x[i, j] > 0.0 else 0.0
    return out


def gelu_fwd(double[:, ::1] x):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                o[i, j] = 0.5 * x[i, j] * (1.0 + erf(x[i, j] * _INV_SQRT2))
    return out


def gelu_bwd(double[:, ::1] x, double[:, ::1] gout):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double cdf, pdf
    with nogil:
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                cdf = 0.5 * (1.0 + erf(x[i, j] * _INV_SQRT2))
                pdf = exp(-0.5 * x[i, j] * x[i, j]) * _INV_SQRT_2PI
                o[i, j] = gout[i, j] * (cdf + x[i, j] * pdf)
    return out


def sigmoid_fwd(double[:, ::1] x):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double e
    with nogil:
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                if x[i, j] >= 0.0:
                    o[i, j] = 1.0 / (1.0 + exp(-x[i, j]))
                else:
                    e = exp(x[i, j])
                    o[i, j] = e / (1.0 + e)
    return out


def sigmoid_bwd(double[:, ::1] y, double[:, ::1] gout):
    out = np.empty((y.shape[0], y.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(y.shape[0]):
            for j in range(y.shape[1]):
                o[i, j] = gout[i, j] * y[i, j] * (1.0 - y[i, j])
    return out


def softmax_fwd(double[:, ::1] x):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double mx, s
    with nogil:
        for i in range(x.shape[0]):
            mx = x[i, 0]
            for j in range(1, x.shape[1]):
                if x[i, j] > mx:
                    mx = x[i, j]
            s = 0.0
            for j in range(x.shape[1]):
                o[i, j] = exp(x[i, j] - mx)
                s += o[i, j]
            for j in range(x.shape[1]):
                o[i, j] /= s
    return out


def softmax_bwd(double[:, ::1] y, double[:, ::1] gout):
    out = np.empty((y.shape[0], y.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double dot
    with nogil:
        for i in range(y.shape[0]):
            dot = 0.0
            for j in range(y.shape[1]):
                dot += gout[i, j] * y[i, j]
            for j in range(y.shape[1]):
                o[i, j] = y[i, j] * (gout[i, j] - dot)
    return out


def layernorm_fwd(double[:, ::1] x, double[::1] gain, double[::1] shift,
                  double eps):
    cdef Py_ssize_t rows = x.shape[0]
    cdef Py_ssize_t cols = x.shape[1]
    y = np.empty((rows, cols), dtype=np.float64)
    xhat = np.empty((rows, cols), dtype=np.float64)
    inv_std = np.empty(rows, dtype=np.float64)
    cdef double[:, ::1] yv = y
    cdef double[:, ::1] hv = xhat
    cdef double[::1] sv = inv_std
    cdef Py_ssize_t i, j
    cdef double mu, var, d, istd
    with nogil:
        for i in range(rows):
            mu = 0.0
            for j in range(cols):
                mu += x[i, j]
            mu /= cols
            var = 0.0
            for j in range(cols):
                d = x[i, j] - mu
                var += d * d
            var /= cols
            istd = 1.0 / sqrt(var + eps)
            sv[i] = istd
            for j in range(cols):
                hv[i, j] = (x[i, j] - mu) * istd
                yv[i, j] = hv[i, j] * gain[j] + shift[j]
    return y, xhat, inv_std


def layernorm_bwd(double[:, ::1] xhat, double[::1] inv_std,
                  double[::1] gain, double[:, ::1] gout):
    cdef Py_ssize_t rows = xhat.shape[0]
    cdef Py_ssize_t cols = xhat.shape[1]
    gx = np.empty((rows, cols), dtype=np.float64)
    ggain = np.zeros(cols, dtype=np.float64)
    gshift = np.zeros(cols, dtype=np.float64)
    cdef double[:, ::1] gxv = gx
    cdef double[::1] ggv = ggain
    cdef double[::1] gsv = gshift
    cdef Py_ssize_t i, j
    cdef double m1, m2, gh
    with nogil:
        for i in range(rows):
            m1 = 0.0
            m2 = 0.0
            for j in range(cols):
                gh = gout[i, j] * gain[j]
                m1 += gh
                m2 += gh * xhat[i, j]
            m1 /= cols
            m2 /= cols
            for j in range(cols):
                gh = gout[i, j] * gain[j]
                gxv[i, j] = inv_std[i] * (gh - m1 - xhat[i, j] * m2)
                ggv[j] += gout[i, j] * xhat[i, j]
                gsv[j] += gout[i, j]
    return gx, ggain, gshift


def adamw_update(double[::1] p, double[::1] g, double[::1] m,
                 double[::1] v, int t, double lr, double beta1,
                 double beta2, double eps, double weight_decay):
    cdef Py_ssize_t i
    cdef double bc1 = 1.0 - pow(beta1, t)
    cdef double bc2 = 1.0 - pow(beta2, t)
    cdef double shrink = 1.0 - lr * weight_decay
    with nogil:
        for i in range(p.shape[0]):
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
            if weight_decay != 0.0:
                p[i] *= shrink
            p[i] -= lr * (m[i] / bc1) / (sqrt(v[i] / bc2) + eps)


cdef void _select_top_desc(double* a, Py_ssize_t n, Py_ssize_t k) nogil:
    """Rearrange a[0:n] so that a[0:k] holds the k largest values."""
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = n - 1
    cdef Py_ssize_t i, j, mid
    cdef double pivot, tmp
    while lo < hi:
        mid = lo + (hi - lo) // 2
        # median-of-three pivot, ordered descending across lo/mid/hi
        if a[mid] > a[lo]:
            tmp = a[lo]; a[lo] = a[mid]; a[mid] = tmp
        if a[hi] > a[lo]:
            tmp = a[lo]; a[lo] = a[hi]; a[hi] = tmp
        if a[hi] > a[mid]:
            tmp = a[mid]; a[mid] = a[hi]; a[hi] = tmp
        pivot = a[mid]
        i = lo
        j = hi
        while i <= j:
            while a[i] > pivot:
                i += 1
            while a[j] < pivot:
                j -= 1
            if i <= j:
                tmp = a[i]; a[i] = a[j]; a[j] = tmp
                i += 1
                j -= 1
        if k - 1 <= j:
            hi = j
        elif k - 1 >= i:
            lo = i
        else:
            break


def topk_mean_std(double[:, ::1] scores, int k):
    cdef Py_ssize_t rows = scores.shape[0]
    cdef Py_ssize_t cols = scores.shape[1]
    if k < 1 or k > cols:
        raise ValueError(f"k must be in [1, {cols}], got {k}")
    means = np.empty(rows, dtype=np.float64)
    stds = np.empty(rows, dtype=np.float64)
    cdef double[::1] mv = means
    cdef double[::1] sv = stds
    cdef double* scratch = <double*> malloc(cols * sizeof(double))
    if scratch == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef double mu, var, d
    try:
        with nogil:
            for i in range(rows):
                for j in range(cols):
                    scratch[j] = scores[i, j]
                if k < cols:
                    _select_top_desc(scratch, cols, k)
                mu = 0.0
                for j in range(k):
                    mu += scratch[j]
                mu /= k
                var = 0.0
                for j in range(k):
                    d = scratch[j] - mu
                    var += d * d
                var /= k
                mv[i] = mu
                sv[i] = sqrt(var)
    finally:
        free(scratch)
    return means, stds
