# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; mirrors `_pykernels` function for function."""

from libc.math cimport exp, log

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def lcs_length(a, b):
    """Length of the longest common subsequence of two integer sequences."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] aa = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bb = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = aa.shape[0]
    cdef Py_ssize_t m = bb.shape[0]
    if n == 0 or m == 0:
        return 0
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prev = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur = np.zeros(m + 1, dtype=np.int64)
    cdef Py_ssize_t i, j
    cdef cnp.int64_t ai, left, up
    for i in range(1, n + 1):
        ai = aa[i - 1]
        cur[0] = 0
        for j in range(1, m + 1):
            if ai == bb[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                left = cur[j - 1]
                up = prev[j]
                cur[j] = left if left >= up else up
        prev, cur = cur, prev
    return int(prev[m])


def trigram_counts(text, dim):
    """Hashed character-trigram count vector of ``text`` (base-31 polynomial)."""
    cdef cnp.ndarray[cnp.uint32_t, ndim=1] cps = np.frombuffer(
        text.encode("utf-32-le"), dtype=np.uint32
    ).copy()
    cdef Py_ssize_t n = cps.shape[0]
    cdef long d = dim
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(d, dtype=np.float64)
    cdef Py_ssize_t i
    cdef long long h
    for i in range(n - 2):
        h = (<long long> cps[i] * 961
             + <long long> cps[i + 1] * 31
             + <long long> cps[i + 2]) % d
        out[h] += 1.0
    return out


def log_softmax(row):
    """Numerically stable log-softmax of a 1-D array."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.ascontiguousarray(row, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double m = r[0]
    cdef Py_ssize_t i
    for i in range(1, n):
        if r[i] > m:
            m = r[i]
    cdef double total = 0.0
    for i in range(n):
        out[i] = r[i] - m
        total += exp(out[i])
    cdef double logz = log(total)
    for i in range(n):
        out[i] -= logz
    return out


def sample_categorical(probs, u):
    """Index sampled from ``probs`` by inverting the CDF at uniform draw ``u``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t last = p.shape[0] - 1
    cdef double uu = u
    cdef double cum = 0.0
    cdef Py_ssize_t i
    for i in range(last):
        cum += p[i]
        if uu < cum:
            return int(i)
    return int(last)
