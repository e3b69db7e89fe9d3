"""Activity-based weights for the l1 and mixed-norm penalties.

All weights are computed once from the highpass part of the noisy image
and normalized to unit mean, so that a given ``lmbda`` has a comparable
effect with and without weighting.
"""

import numpy as np

from ._fft import irfft2, rfft2, zero_pad
from .groups import group_sums, unit_group_operator
from .signal import SpectralDictionary, as_image

__all__ = ["ANALYSIS", "IMAGE_ENERGY", "group_weights_from_activity",
           "l1_weights_from_correlation", "inverse_weights"]

ANALYSIS = "analysis"
IMAGE_ENERGY = "image_energy"


def inverse_weights(a, eps_rel=1e-5):
    """``1 / (a + eps_rel max(a))`` scaled to unit mean; ones if ``a == 0``."""
    if not eps_rel > 0:
        raise ValueError(f"eps_rel must be positive, got {eps_rel!r}")
    a = np.maximum(np.asarray(a, dtype=np.float64), 0.0)
    amax = float(np.max(a))
    if amax == 0:
        return np.ones_like(a)
    w = 1.0 / (a + eps_rel * amax)
    return w / np.mean(w)


def _analysis(d, s):
    sd = d if isinstance(d, SpectralDictionary) else SpectralDictionary(
        d, s.shape)
    return sd, sd.analyze(s)


def group_weights_from_activity(d, s_highpass, source=ANALYSIS,
                                eps_rel=1e-5):
    """Outer-norm weights, inversely proportional to local activity.

    Parameters
    ----------
    d : Dictionary or SpectralDictionary
    s_highpass : ndarray, shape (H, W)
    source : {"analysis", "image_energy"}
        ``analysis`` sums the squared correlations ``(D^T s)_m^2`` over each
        coefficient group (unit kernels, summed over filters).
        ``image_energy`` sums ``s^2`` over the image region touched by the
        group's placements, a ``(2h-1, 2w-1)`` window starting at the
        group anchor.
    eps_rel : float
        Stabilizer relative to the maximum activity.

    Returns
    -------
    ndarray, shape (H, W)
    """
    s = as_image(s_highpass)
    sd, ds = _analysis(d, s)
    fh, fw = sd.dictionary.filter_shape
    if source == ANALYSIS:
        g = unit_group_operator((fh, fw), ds.shape[0], s.shape)
        a = group_sums(g, ds**2, absolute=False)
    elif source == IMAGE_ENERGY:
        box = zero_pad(np.ones((2 * fh - 1, 2 * fw - 1)), s.shape)
        a = irfft2(np.conj(rfft2(box)) * rfft2(s**2), s.shape)
    else:
        raise ValueError(f"unknown activity source {source!r}")
    return inverse_weights(a, eps_rel)


def l1_weights_from_correlation(d, s_highpass, eps_rel=1e-5):
    """Per-coefficient l1 weights ``1 / (D^T s)^2``, stabilized.

    Returns
    -------
    ndarray, shape (M, H, W)
    """
    s = as_image(s_highpass)
    _, ds = _analysis(d, s)
    return inverse_weights(ds**2, eps_rel)
