# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of `_core_numpy`: fused kernel matrix + Cholesky marginal
likelihood. This is the inner loop of hyperparameter search, so the matrix
build, factorization and triangular solve all happen in one C call.

The matrix build is split into a weighted-sum pass and a per-family
transform pass over contiguous rows, so the compiler can vectorize the
exp/log calls through libmvec.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt, isfinite, NAN

cdef extern from "xmmintrin.h":
    unsigned int _mm_getcsr() nogil
    void _mm_setcsr(unsigned int) nogil

# flush-to-zero + denormals-are-zero; underflowed kernel tails otherwise
# trigger microcode-assist stalls inside the search loop
cdef unsigned int _FTZ_DAZ = 0x8040

cnp.import_array()

FAMILY_RBF = 0
FAMILY_RATQUAD = 1
FAMILY_MATERN52 = 2

cdef double _LOG_2PI = log(2.0 * 3.14159265358979323846)
cdef double _SQRT5 = sqrt(5.0)


cdef inline void _weighted_sum_row(const double* d2_row, const double* w,
                                   Py_ssize_t m, Py_ssize_t ndim, double* out) noexcept nogil:
    cdef Py_ssize_t j, d
    cdef double s
    if ndim == 4:
        for j in range(m):
            out[j] = (w[0] * d2_row[4 * j] + w[1] * d2_row[4 * j + 1]
                      + w[2] * d2_row[4 * j + 2] + w[3] * d2_row[4 * j + 3])
    elif ndim == 2:
        for j in range(m):
            out[j] = w[0] * d2_row[2 * j] + w[1] * d2_row[2 * j + 1]
    else:
        for j in range(m):
            s = 0.0
            for d in range(ndim):
                s += w[d] * d2_row[j * ndim + d]
            out[j] = s


cdef int _cholesky_lower(double* K, Py_ssize_t n, double* recip) noexcept nogil:
    """Row-variant in-place Cholesky of the row-major lower triangle.

    `recip` is an n-length scratch for the diagonal reciprocals (multiplying
    beats n^2/2 divisions). Returns 0 on success, j+1 if the leading minor of
    order j+1 is not positive definite. Kept in-tree (instead of LAPACK
    dpotrf) because the BLAS library serializes concurrent calls behind a
    process-wide lock, which would defeat running cross-validation folds in
    parallel.
    """
    cdef Py_ssize_t i, j, k
    cdef double s, d
    cdef double* row_i
    cdef double* row_j
    for i in range(n):
        row_i = K + i * n
        for j in range(i):
            row_j = K + j * n
            s = 0.0
            for k in range(j):
                s += row_i[k] * row_j[k]
            row_i[j] = (row_i[j] - s) * recip[j]
        s = 0.0
        for k in range(i):
            s += row_i[k] * row_i[k]
        d = row_i[i] - s
        if d <= 0.0 or not isfinite(d):
            return <int> (i + 1)
        d = sqrt(d)
        row_i[i] = d
        recip[i] = 1.0 / d
    return 0


cdef void _forward_solve(const double* L, Py_ssize_t n, const double* b, double* z) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(n):
        s = 0.0
        for k in range(i):
            s += L[i * n + k] * z[k]
        z[i] = (b[i] - s) / L[i * n + i]


cdef inline void _transform_row(int family, double* row, Py_ssize_t m,
                                double variance, double alpha) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s, r, half_inv_alpha
    if family == 0:  # RBF
        for j in range(m):
            row[j] = variance * exp(-0.5 * row[j])
    elif family == 1:  # rational quadratic
        half_inv_alpha = 1.0 / (2.0 * alpha)
        for j in range(m):
            row[j] = variance * exp(-alpha * log(1.0 + row[j] * half_inv_alpha))
    else:  # Matern 5/2
        for j in range(m):
            s = row[j]
            r = sqrt(s)
            row[j] = variance * (1.0 + _SQRT5 * r + (5.0 / 3.0) * s) * exp(-_SQRT5 * r)


def gram_from_sqdiffs(int family, double[:, :, ::1] d2, double variance,
                      double[::1] lengthscales, double alpha):
    """Kernel matrix from precomputed squared differences; no noise added."""
    cdef Py_ssize_t n = d2.shape[0], m = d2.shape[1], ndim = d2.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_arr = np.empty(ndim, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef Py_ssize_t dd
    for dd in range(ndim):
        w[dd] = 1.0 / (lengthscales[dd] * lengthscales[dd])
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] K = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            _weighted_sum_row(&d2[i, 0, 0], &w[0], m, ndim, &K[i, 0])
            _transform_row(family, &K[i, 0], m, variance, alpha)
    return out


def lml_from_sqdiffs(int family, double[:, :, ::1] d2, double[::1] y, double variance,
                     double[::1] lengthscales, double alpha, double total_noise,
                     workspace=None):
    """Log marginal likelihood via Cholesky; NaN when the factorization fails.

    Only the lower triangle (row-major) is built and factorized in place.
    `workspace` (an (n+2, n) scratch array) lets a hyperparameter search
    reuse one allocation.
    """
    cdef Py_ssize_t nn = d2.shape[0], ndim = d2.shape[2]
    cdef int n = <int> nn
    if not (isfinite(variance) and isfinite(alpha) and isfinite(total_noise)):
        return NAN
    if family == 1 and alpha <= 0.0:  # matches the fallback's NaN on a degenerate RatQuad
        return NAN
    cdef double w_stack[16]
    cdef double invl
    cdef Py_ssize_t d
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_arr
    cdef double[::1] w
    if ndim <= 16:
        for d in range(ndim):
            invl = lengthscales[d]
            w_stack[d] = 1.0 / (invl * invl)
        w = <double[:ndim:1]> w_stack
    else:
        w_arr = np.empty(ndim, dtype=np.float64)
        w = w_arr
        for d in range(ndim):
            w[d] = 1.0 / (lengthscales[d] * lengthscales[d])
    for d in range(ndim):
        if not isfinite(w[d]):
            return NAN

    cdef cnp.ndarray[cnp.float64_t, ndim=2] scratch
    if workspace is None:
        scratch = np.empty((nn + 2, nn), dtype=np.float64)
    else:
        scratch = workspace
    cdef double[:, ::1] K = scratch[:nn]
    cdef double[::1] z = scratch[nn]
    cdef double[::1] recip = scratch[nn + 1]

    cdef Py_ssize_t i
    cdef double quad, logdet
    cdef int info = 0
    cdef unsigned int csr
    with nogil:
        csr = _mm_getcsr()
        _mm_setcsr(csr | _FTZ_DAZ)
        for i in range(nn):
            if i > 0:
                _weighted_sum_row(&d2[i, 0, 0], &w[0], i, ndim, &K[i, 0])
                _transform_row(family, &K[i, 0], i, variance, alpha)
            K[i, i] = variance + total_noise
        info = _cholesky_lower(&K[0, 0], nn, &recip[0])
        if info == 0:
            _forward_solve(&K[0, 0], nn, &y[0], &z[0])
            quad = 0.0
            logdet = 0.0
            for i in range(nn):
                quad += z[i] * z[i]
                logdet += log(K[i, i])
        _mm_setcsr(csr)
    if info != 0:
        return NAN
    cdef double lml = -0.5 * quad - logdet - 0.5 * n * _LOG_2PI
    if not isfinite(lml):
        return NAN
    return lml
