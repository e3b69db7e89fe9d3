"""Deterministic test images and dictionaries for desk-scale experiments.

All generators are pure functions of their arguments, so benchmark
inputs can be rebuilt bit-for-bit from a name and a size.
"""

import numpy as np
from scipy import ndimage

from .signal import Dictionary

__all__ = ["IMAGES", "make_image", "random_dictionary", "dct_dictionary",
           "gabor_dictionary", "dct_patch_dictionary"]


def _grid(n):
    return np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n),
                       indexing="ij")


def _smooth_edges(img, n):
    return ndimage.gaussian_filter(img, 0.6 * n / 64.0, mode="wrap")


def shapes(n):
    """Piecewise-smooth scene: shaded background, discs and bars."""
    r, c = _grid(n)
    img = 0.35 + 0.25 * c - 0.1 * r
    img[(r - 0.3)**2 + (c - 0.3)**2 < 0.04] = 0.85
    img[(r - 0.7)**2 + (c - 0.65)**2 < 0.03] = 0.15
    img[(np.abs(r - 0.75) < 0.06) & (c < 0.45)] = 0.7
    img[(np.abs(c - 0.8) < 0.05) & (r < 0.5)] = 0.25
    ring = np.hypot(r - 0.3, c - 0.75)
    img[(ring > 0.08) & (ring < 0.14)] = 0.9
    return _smooth_edges(img, n)


def gratings(n):
    """Four quadrants of sinusoidal gratings at different orientations."""
    r, c = _grid(n)
    img = np.empty((n, n))
    h = n // 2
    specs = [(0.0, 6.0), (np.pi / 4, 8.0), (np.pi / 2, 5.0), (2.0, 10.0)]
    quads = [(slice(0, h), slice(0, h)), (slice(0, h), slice(h, n)),
             (slice(h, n), slice(0, h)), (slice(h, n), slice(h, n))]
    for (theta, f), (qr, qc) in zip(specs, quads):
        phase = 2 * np.pi * f * (np.cos(theta) * r + np.sin(theta) * c)
        img[qr, qc] = 0.5 + 0.3 * np.sin(phase[qr, qc])
    return _smooth_edges(img, n)


def mosaic(n, seed=7):
    """Piecewise-constant Voronoi cells over a smooth random field."""
    rng = np.random.default_rng(seed)
    r, c = _grid(n)
    pts = rng.uniform(0, 1, (12, 2))
    lev = rng.uniform(0.15, 0.85, 12)
    dist = (r[..., None] - pts[:, 0])**2 + (c[..., None] - pts[:, 1])**2
    img = lev[np.argmin(dist, axis=-1)]
    field = ndimage.gaussian_filter(rng.standard_normal((n, n)), n / 16.0,
                                    mode="wrap")
    img = img + 0.1 * field / np.max(np.abs(field))
    return _smooth_edges(img, n)


def checker(n):
    """Checkerboard with a superimposed disc and diagonal edge."""
    r, c = _grid(n)
    k = 6
    img = 0.3 + 0.4 * ((np.floor(r * k) + np.floor(c * k)) % 2)
    img[(r - 0.5)**2 + (c - 0.5)**2 < 0.06] = 0.5
    img[r + c > 1.6] = 0.9
    return _smooth_edges(img, n)


IMAGES = {"shapes": shapes, "gratings": gratings, "mosaic": mosaic,
          "checker": checker}


def make_image(name, n=64):
    """Synthetic ``n x n`` test image with values in ``[0, 1]``."""
    try:
        gen = IMAGES[name]
    except KeyError:
        raise ValueError(f"unknown image {name!r}; choose from "
                         f"{sorted(IMAGES)}") from None
    return np.clip(gen(n), 0.0, 1.0)


def random_dictionary(num_filters=32, size=8, seed=0, zero_mean=True):
    """Normalized Gaussian random filters."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((num_filters, size, size))
    if zero_mean:
        f -= f.mean(axis=(1, 2), keepdims=True)
    return Dictionary.from_filters(f)


def _dct_matrix(n):
    k = np.arange(n)
    C = np.cos(np.pi * (2 * k[None, :] + 1) * k[:, None] / (2 * n))
    C[0] /= np.sqrt(2.0)
    return C * np.sqrt(2.0 / n)


def dct_dictionary(num_filters=32, size=8):
    """Separable 2-D DCT atoms of lowest total frequency, DC excluded."""
    C = _dct_matrix(size)
    idx = sorted(((i, j) for i in range(size) for j in range(size)
                  if (i, j) != (0, 0)), key=lambda t: (t[0] + t[1], t))
    f = np.stack([np.outer(C[i], C[j]) for i, j in idx[:num_filters]])
    return Dictionary.from_filters(f)


def gabor_dictionary(num_filters=32, size=8):
    """Zero-mean Gabor filters over orientations, frequencies and phases."""
    norient = 8
    nfreq = max(num_filters // (2 * norient), 1)
    y, x = np.mgrid[0:size, 0:size] - (size - 1) / 2.0
    env = np.exp(-(x**2 + y**2) / (2 * (size / 4.0)**2))
    filters = []
    for fi in range(nfreq):
        freq = 0.12 + 0.16 * fi
        for o in range(norient):
            th = np.pi * o / norient
            u = x * np.cos(th) + y * np.sin(th)
            for ph in (0.0, np.pi / 2):
                g = env * np.cos(2 * np.pi * freq * u + ph)
                filters.append(g - g.mean())
    f = np.stack(filters[:num_filters])
    return Dictionary.from_filters(f)


def dct_patch_dictionary(patch=8, atoms=128):
    """Overcomplete separable DCT dictionary with unit-norm columns.

    Returns an array of shape ``(patch * patch, atoms)``, built as the
    Kronecker product of two 1-D overcomplete cosine bases whose sizes
    are the most nearly equal factor pair of `atoms`. Column 0 is the
    constant atom.
    """
    k1 = int(np.sqrt(atoms))
    while atoms % k1:
        k1 -= 1
    k2 = atoms // k1
    if k1 < patch or k2 < patch:
        raise ValueError(f"{atoms} atoms cannot span {patch}x{patch} patches")

    def basis(k):
        t = np.arange(patch)
        B = np.cos(np.outer(t, np.arange(k)) * np.pi / k)
        B[:, 1:] -= B[:, 1:].mean(axis=0)
        return B / np.linalg.norm(B, axis=0)

    D = np.kron(basis(k1), basis(k2))
    return D / np.linalg.norm(D, axis=0)
