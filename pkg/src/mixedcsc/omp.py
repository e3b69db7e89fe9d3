"""Patch-based denoising baseline with orthogonal matching pursuit.

This is the classic K-SVD style scheme with a fixed dictionary: every
overlapping patch of the highpass image is coded greedily until its
residual falls below the noise level, and the coded patches are averaged
back into an image.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DimensionError
from .signal import as_image, highpass_noise_gain, tikhonov_lowpass

__all__ = ["OmpConfig", "omp", "denoise_omp"]


@dataclass
class OmpConfig:
    """`max_atoms` defaults to half the patch size; `blend` weights the
    noisy highpass image in the final average (0 gives plain patch
    averaging). With `highpass_sigma` the stopping rule uses the noise
    level left in the highpass image rather than `sigma` itself."""

    C: float = 1.15
    max_atoms: Optional[int] = None
    lowpass_lambda: float = 2.0
    blend: float = 0.0
    highpass_sigma: bool = True


def omp(D, y, tol, max_atoms):
    """Orthogonal matching pursuit for a single signal.

    Parameters
    ----------
    D : ndarray, shape (n, K)
        Dictionary with unit-norm columns.
    y : ndarray, shape (n,)
    tol : float
        Stop once ``||y - D c|| <= tol``.
    max_atoms : int

    Returns
    -------
    support : list of int
        Selected atoms in selection order.
    coef : ndarray, shape (len(support),)
    """
    support = []
    coef = np.zeros(0)
    r = y
    while np.linalg.norm(r) > tol and len(support) < max_atoms:
        k = int(np.argmax(np.abs(D.T @ r)))
        if k in support:
            break
        support.append(k)
        Ds = D[:, support]
        coef = np.linalg.lstsq(Ds, y, rcond=None)[0]
        r = y - Ds @ coef
    return support, coef


def denoise_omp(noisy, patch_dict, sigma, cfg=None):
    """Denoise by OMP coding of all stride-1 patches of the highpass image.

    Parameters
    ----------
    noisy : ndarray, shape (H, W)
    patch_dict : ndarray, shape (p*p, K)
        Dictionary for square ``p x p`` patches, unit-norm columns.
    sigma : float
        Noise standard deviation of `noisy`; patches stop at residual
        ``C * sigma_hp * p`` where ``sigma_hp`` is `sigma` scaled by the
        highpass noise gain (or `sigma` itself, see :class:`OmpConfig`).
    cfg : OmpConfig or None
    """
    cfg = cfg or OmpConfig()
    noisy = as_image(noisy, "noisy image")
    D = np.asarray(patch_dict, dtype=np.float64)
    p = int(round(np.sqrt(D.shape[0])))
    if D.ndim != 2 or p * p != D.shape[0]:
        raise DimensionError("patch dictionary rows must be a square patch "
                             "size", D.shape, (p * p,))
    if p > min(noisy.shape):
        raise DimensionError("patch size exceeds image", (p, p), noisy.shape)
    D = D / np.linalg.norm(D, axis=0)
    max_atoms = cfg.max_atoms or D.shape[0] // 2
    if cfg.highpass_sigma:
        sigma = sigma * highpass_noise_gain(noisy.shape, cfg.lowpass_lambda)
    tol = cfg.C * sigma * p

    low, high = tikhonov_lowpass(noisy, cfg.lowpass_lambda)
    patches = sliding_window_view(high, (p, p))
    nr, nc = patches.shape[:2]
    acc = cfg.blend * high
    cnt = np.full(high.shape, float(cfg.blend))
    for r in range(nr):
        for c in range(nc):
            y = patches[r, c].ravel()
            support, coef = omp(D, y, tol, max_atoms)
            if support:
                acc[r:r + p, c:c + p] += (D[:, support] @ coef).reshape(p, p)
            cnt[r:r + p, c:c + p] += 1.0
    return low + acc / cnt
