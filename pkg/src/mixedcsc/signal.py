"""Images, convolutional dictionaries and the synthesis operator.

Conventions used throughout the package:

* An image is a 2-D ``float64`` array of shape ``(H, W)``.
* A stack of coefficient maps is a 3-D array of shape ``(M, H, W)``.
* All convolutions are circular. A filter of support ``(h, w)`` is
  embedded at the top-left corner of an ``(H, W)`` array, so the filter
  placed by coefficient ``x_m[p]`` covers pixels ``p`` to
  ``p + (h-1, w-1)`` (modulo the image size).
"""

from dataclasses import dataclass

import numpy as np

from ._fft import irfft2, rfft2, zero_pad
from .exceptions import DimensionError

__all__ = [
    "Dictionary", "SpectralDictionary", "NoiseConfig", "as_image",
    "as_maps", "apply_dictionary", "apply_dictionary_adjoint",
    "tikhonov_lowpass", "gaussian_noise", "add_gaussian_noise", "psnr",
]

NORM_TOL = 1e-8


def as_image(s, name="image"):
    """Validate and convert `s` to a finite 2-D float64 array."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got "
                         f"shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError(f"{name} contains non-finite values")
    return s


def as_maps(x, name="coefficient maps"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"{name} must be a 3-D (M, H, W) array, got "
                         f"shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class Dictionary:
    """A set of ``M`` small 2-D filters stored as an ``(M, h, w)`` array.

    If `normalized` is true every filter must have unit l2 norm to
    within ``1e-8``. Use :meth:`from_filters` to normalize raw filters.
    """

    filters: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        f = np.array(self.filters, dtype=np.float64)
        if f.ndim == 2:
            f = f[np.newaxis]
        if f.ndim != 3 or min(f.shape) < 1:
            raise ValueError(f"filters must have shape (M, h, w), got "
                             f"{f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("filters contain non-finite values")
        if self.normalized:
            nrm = np.sqrt(np.sum(f**2, axis=(1, 2)))
            bad = np.flatnonzero(np.abs(nrm - 1.0) > NORM_TOL)
            if bad.size:
                raise ValueError(f"filter {bad[0]} has norm {nrm[bad[0]]!r}"
                                 f", expected 1")
        f.setflags(write=False)
        object.__setattr__(self, "filters", f)

    @classmethod
    def from_filters(cls, filters, normalize=True):
        f = np.array(filters, dtype=np.float64)
        if f.ndim == 2:
            f = f[np.newaxis]
        if normalize:
            nrm = np.sqrt(np.sum(f**2, axis=(1, 2), keepdims=True))
            if np.any(nrm == 0):
                raise ValueError("cannot normalize an all-zero filter")
            f = f / nrm
        return cls(f, normalized=normalize)

    @property
    def num_filters(self):
        return self.filters.shape[0]

    @property
    def filter_shape(self):
        return self.filters.shape[1:]

    def spectral(self, shape):
        return SpectralDictionary(self, shape)


class SpectralDictionary:
    """DFTs of the zero-padded dictionary filters at a fixed image size.

    Attributes
    ----------
    Df : ndarray, shape (M, H, W//2 + 1)
        Half-spectrum of each padded filter.
    Dfc : ndarray
        Complex conjugate of `Df`.
    """

    def __init__(self, d, shape):
        shape = tuple(int(n) for n in shape)
        fh, fw = d.filter_shape
        if fh > shape[0] or fw > shape[1]:
            raise DimensionError("filter support exceeds image size",
                                 d.filter_shape, shape)
        self.dictionary = d
        self.shape = shape
        self.Df = rfft2(zero_pad(d.filters, shape))
        self.Dfc = np.conj(self.Df)
        self.Df.setflags(write=False)
        self.Dfc.setflags(write=False)

    def padded_filters(self):
        return irfft2(self.Df, self.shape)

    def synthesize_f(self, Xf):
        """Frequency-domain synthesis ``sum_m Df_m Xf_m``."""
        return np.sum(self.Df * Xf, axis=0)

    def synthesize(self, x):
        return irfft2(self.synthesize_f(rfft2(x)), self.shape)

    def analyze(self, s):
        return irfft2(self.Dfc * rfft2(s)[np.newaxis], self.shape)


def _spectral(d, shape):
    if isinstance(d, SpectralDictionary):
        if d.shape != tuple(shape):
            raise DimensionError("spectral dictionary size", d.shape, shape)
        return d
    return SpectralDictionary(d, shape)


def apply_dictionary(d, x):
    """Synthesize an image from coefficient maps: ``sum_m d_m * x_m``.

    Parameters
    ----------
    d : Dictionary or SpectralDictionary
    x : array_like, shape (M, H, W)

    Returns
    -------
    ndarray, shape (H, W)
    """
    x = as_maps(x)
    dd = d.dictionary if isinstance(d, SpectralDictionary) else d
    if x.shape[0] != dd.num_filters:
        raise DimensionError("number of coefficient maps vs filters",
                             x.shape, dd.filters.shape)
    return _spectral(d, x.shape[1:]).synthesize(x)


def apply_dictionary_adjoint(d, s):
    """Correlate an image with every filter, returning ``(M, H, W)`` maps."""
    s = as_image(s)
    return _spectral(d, s.shape).analyze(s)


def _difference_response(shape):
    """``|g_r|^2 + |g_c|^2`` on the rfft grid for circular [-1, 1] kernels."""
    H, W = shape
    wr = 2.0 * np.pi * np.fft.fftfreq(H)[:, np.newaxis]
    wc = 2.0 * np.pi * np.fft.rfftfreq(W)[np.newaxis, :]
    return (2.0 - 2.0 * np.cos(wr)) + (2.0 - 2.0 * np.cos(wc))


def tikhonov_lowpass(s, lambda_lp=2.0):
    """Split `s` into lowpass and highpass parts.

    The lowpass part minimizes
    ``(1/2)||l - s||^2 + (lambda_lp/2)(||grad_r l||^2 + ||grad_c l||^2)``
    with circular first differences, solved exactly in the DFT domain.

    Returns
    -------
    lowpass, highpass : ndarray
        ``highpass = s - lowpass``.
    """
    s = as_image(s)
    if not lambda_lp > 0:
        raise ValueError(f"lambda_lp must be positive, got {lambda_lp!r}")
    lf = rfft2(s) / (1.0 + lambda_lp * _difference_response(s.shape))
    low = irfft2(lf, s.shape)
    return low, s - low


def highpass_noise_gain(shape, lambda_lp=2.0):
    """RMS gain of the highpass part of :func:`tikhonov_lowpass`.

    White noise of standard deviation ``sigma`` leaves noise of standard
    deviation ``gain * sigma`` in the highpass component.
    """
    H, W = shape
    wr = 2.0 * np.pi * np.fft.fftfreq(H)[:, np.newaxis]
    wc = 2.0 * np.pi * np.fft.fftfreq(W)[np.newaxis, :]
    r = lambda_lp * ((2.0 - 2.0 * np.cos(wr)) + (2.0 - 2.0 * np.cos(wc)))
    return float(np.sqrt(np.mean((r / (1.0 + r))**2)))


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be finite and >= 0, got "
                             f"{self.sigma!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def gaussian_noise(shape, seed):
    """Standard normal samples from a pinned generator.

    Uniform variates come from the Philox-4x64-10 counter-based
    generator (``numpy.random.Philox`` keyed with `seed`), converted to
    doubles in ``[0, 1)`` with 53 bits of mantissa. Consecutive pairs
    ``(u1, u2)`` are mapped by the Box-Muller transform to
    ``r cos(2 pi u2), r sin(2 pi u2)`` with ``r = sqrt(-2 log(1 - u1))``
    and written in row-major order.
    """
    n = int(np.prod(shape))
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    u = gen.random(2 * ((n + 1) // 2)).reshape(-1, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    z = np.empty((u.shape[0], 2))
    z[:, 0] = r * np.cos(theta)
    z[:, 1] = r * np.sin(theta)
    return z.ravel()[:n].reshape(shape)


def add_gaussian_noise(s, noise):
    """Add white Gaussian noise. The result is not clipped."""
    s = as_image(s)
    if noise.sigma == 0:
        return s.copy()
    return s + noise.sigma * gaussian_noise(s.shape, noise.seed)


def psnr(reference, test):
    """Peak signal-to-noise ratio in dB with peak value 1.0.

    Returns ``inf`` for identical images.
    """
    reference = as_image(reference, "reference")
    test = as_image(test, "test")
    if reference.shape != test.shape:
        raise DimensionError("psnr", reference.shape, test.shape)
    mse = np.mean((reference - test)**2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))
