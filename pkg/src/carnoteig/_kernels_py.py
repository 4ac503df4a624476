"""Pure-numpy versions of the pairwise kernel loops.

``heis_n`` selects the gauge: 0 for Euclidean distance on R^d, n >= 1 for
the Koranyi gauge on H^n.  Coincident points get weight zero (principal
value: the singular cell is skipped).
"""
import numpy as np

BACKEND = "python"

_CHUNK = 256


def _gauge_pow(t, s, heis_n, alpha):
    # |s^{-1} o t|^{-alpha} for all (t, s) pairs of one chunk
    diff = t[:, None, :] - s[None, :, :]
    if heis_n == 0:
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        base = r2
        power = -alpha / 2.0
    else:
        n = heis_n
        h2 = np.einsum("ijk,ijk->ij", diff[..., : 2 * n], diff[..., : 2 * n])
        # vertical component of s^{-1} o t: c_t - c_s + (a_t.b_s - b_t.a_s)/2
        twist = 0.5 * (t[:, None, :n] * s[None, :, n : 2 * n]
                       - t[:, None, n : 2 * n] * s[None, :, :n]).sum(axis=-1)
        w = diff[..., 2 * n] + twist
        base = h2 * h2 + w * w
        power = -alpha / 4.0
    out = np.zeros_like(base)
    nz = base > 0.0
    out[nz] = base[nz] ** power
    return out


def pair_weights(targets, sources, heis_n, alpha):
    """Dense matrix W[i, j] = |sources[j]^{-1} o targets[i]|^{-alpha}."""
    targets = np.ascontiguousarray(targets, dtype=float)
    sources = np.ascontiguousarray(sources, dtype=float)
    out = np.empty((targets.shape[0], sources.shape[0]))
    for lo in range(0, targets.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, targets.shape[0])
        out[lo:hi] = _gauge_pow(targets[lo:hi], sources, heis_n, alpha)
    return out


def difference_rows(targets, tvals, sources, svals, heis_n, alpha, p):
    """Row sums R[i] = sum_j W[i, j] |tvals[i] - svals[j]|^p."""
    targets = np.ascontiguousarray(targets, dtype=float)
    sources = np.ascontiguousarray(sources, dtype=float)
    tvals = np.asarray(tvals, dtype=float)
    svals = np.asarray(svals, dtype=float)
    out = np.empty(targets.shape[0])
    for lo in range(0, targets.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, targets.shape[0])
        w = _gauge_pow(targets[lo:hi], sources, heis_n, alpha)
        d = np.abs(tvals[lo:hi, None] - svals[None, :]) ** p
        out[lo:hi] = np.sum(w * d, axis=1)
    return out
