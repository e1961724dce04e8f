"""Pure-Python reference implementations of the hot numeric kernels.

These are the semantics of record: the compiled extension in
``_ckernels.pyx`` mirrors each function operation for operation, and the
cross-backend tests hold the two within 1e-12 (integer kernels agree
exactly).
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

NAME = "python"


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common subsequence of two integer sequences."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    prev = [0] * (m + 1)
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                left = cur[j - 1]
                up = prev[j]
                cur[j] = left if left >= up else up
        prev = cur
    return prev[m]


def trigram_counts(text: str, dim: int) -> np.ndarray:
    """Hashed character-trigram count vector of ``text``.

    The hash is a fixed base-31 polynomial over code points, so both
    backends bucket identically.
    """
    out = np.zeros(dim, dtype=np.float64)
    for i in range(len(text) - 2):
        h = (ord(text[i]) * 961 + ord(text[i + 1]) * 31 + ord(text[i + 2])) % dim
        out[h] += 1.0
    return out


def log_softmax(row: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax of a 1-D array."""
    row = np.asarray(row, dtype=np.float64)
    shifted = row - row.max()
    ex = np.exp(shifted)
    total = 0.0
    for v in ex:
        total += float(v)
    return shifted - math.log(total)


def sample_categorical(probs: np.ndarray, u: float) -> int:
    """Index sampled from ``probs`` by inverting the CDF at uniform draw ``u``."""
    cum = 0.0
    last = len(probs) - 1
    for i in range(last):
        cum += float(probs[i])
        if u < cum:
            return i
    return last
