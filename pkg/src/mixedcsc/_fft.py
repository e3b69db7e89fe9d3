"""Real 2-D FFT helpers over the trailing two axes.

All transforms go through :mod:`scipy.fft`. The number of worker
threads is read from the ``CSC_THREADS`` environment variable (default
1). pocketfft splits work across independent transforms only, so the
result is bit-identical for any thread count.
"""

import os

import numpy as np
import scipy.fft

__all__ = ["rfft2", "irfft2", "zero_pad", "workers"]


def workers():
    try:
        n = int(os.environ.get("CSC_THREADS", "1"))
    except ValueError:
        n = 1
    return max(n, 1)


def rfft2(a):
    return scipy.fft.rfft2(a, axes=(-2, -1), workers=workers())


def irfft2(af, shape):
    return scipy.fft.irfft2(af, s=shape, axes=(-2, -1), workers=workers())


def zero_pad(k, shape):
    """Zero-pad the trailing two axes of `k` to `shape`, origin at (0, 0)."""
    k = np.asarray(k, dtype=np.float64)
    out = np.zeros(k.shape[:-2] + tuple(shape), dtype=np.float64)
    out[..., :k.shape[-2], :k.shape[-1]] = k
    return out
