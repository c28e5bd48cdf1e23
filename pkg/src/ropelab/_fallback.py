"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Every function here has the same signature and in-place contract as its
compiled twin so the two can be swapped at import time.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# Stands in for -inf above the diagonal; exp() of it underflows to exactly 0.
MASK_SENTINEL = -1e300

# Draws per vectorized block; bounds the size of the uint64 temporaries.
_BLOCK = 1 << 20


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def splitmix64_raw(seed, start, out):
    # draw k (0-based) of the stream reads state seed + (k + 1) * golden
    n = out.shape[0]
    with np.errstate(over="ignore"):
        for lo in range(0, n, _BLOCK):
            hi = min(n, lo + _BLOCK)
            k = np.arange(start + lo + 1, start + hi + 1, dtype=np.uint64)
            out[lo:hi] = _mix(np.uint64(seed) + k * _GOLDEN)
    return start + n


def splitmix64_fill(seed, start, out, low, high):
    n = out.shape[0]
    raw = np.empty(min(n, _BLOCK), dtype=np.uint64)
    width = high - low
    for lo in range(0, n, _BLOCK):
        hi = min(n, lo + _BLOCK)
        chunk = raw[: hi - lo]
        splitmix64_raw(seed, start + lo, chunk)
        u = (chunk >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        out[lo:hi] = low + width * u
    return start + n


def rope_rotate(x, cos_t, sin_t, out):
    if x.shape[1] != 2 * cos_t.shape[1] or out.shape != x.shape or cos_t.shape[0] != x.shape[0]:
        raise ValueError("shape mismatch in rope_rotate")
    a = x[:, 0::2]
    b = x[:, 1::2]
    out[:, 0::2] = a * cos_t - b * sin_t
    out[:, 1::2] = b * cos_t + a * sin_t


def causal_softmax_entropy(scores, row_scale, entropy):
    n = scores.shape[0]
    if scores.shape[1] != n or row_scale.shape[0] != n or entropy.shape[0] != n:
        raise ValueError("shape mismatch in causal_softmax_entropy")
    upper = np.triu_indices(n, k=1)
    scores *= row_scale[:, None]
    scores[upper] = MASK_SENTINEL
    scores -= scores.max(axis=1, keepdims=True)
    z = scores.copy()
    np.exp(scores, out=scores)
    total = scores.sum(axis=1)
    weighted = np.einsum("ij,ij->i", scores, z)
    scores /= total[:, None]
    scores[upper] = 0.0
    entropy[:] = np.log(total) - weighted / total
