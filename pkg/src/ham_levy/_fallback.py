"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Summation order matches the extension: contributing terms in increasing
index order, accumulated left to right (``np.cumsum`` is sequential).
"""

import numpy as np


def _ordered_sum(terms: np.ndarray) -> float:
    if len(terms) == 0:
        return 0.0
    return float(np.cumsum(terms)[-1])


def cone_recursion(s, y, z, source, index_threshold=4096):
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    source = np.asarray(source, dtype=float)
    out = np.empty(len(s))
    half_z = 0.5 * z
    for i in range(len(s)):
        mask = np.abs(y[i] - y[:i]) < s[i] - s[:i]
        out[i] = source[i] + _ordered_sum(half_z[:i][mask] * out[:i][mask])
    return out


def cone_sum(s, y, z, w, t, x):
    s = np.asarray(s, dtype=float)
    k = int(np.searchsorted(s, t, side="left"))
    s, y = s[:k], np.asarray(y, dtype=float)[:k]
    mask = np.abs(x - y) < t - s
    return _ordered_sum((0.5 * np.asarray(z, dtype=float)[:k][mask]) * np.asarray(w, dtype=float)[:k][mask])
