"""Numpy/scipy versions of the compiled kernels, used when the extension is not built."""
import numpy as np
from scipy.spatial.distance import cdist

# rows per cdist block; bounds the temporary distance matrix
_CHUNK = 512


def pairwise_distance_sum(a, b):
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch")
    return float(sum(cdist(a[lo:lo + _CHUNK], b).sum() for lo in range(0, len(a), _CHUNK)))


def pairwise_distance_sum_self(a):
    # direct differences, so the diagonal is exactly zero
    return pairwise_distance_sum(a, a)


def straightness(states):
    states = np.asarray(states, dtype=float)
    num = np.sum(np.diff(states, axis=0) ** 2, axis=(0, 2))
    den = np.sum((states[-1] - states[0]) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), np.nan)
