"""Proximal operators.

``prox_f(v) = argmin_x f(x) + (1/2)||x - v||^2``. The max and l2
operators treat their whole input as a single vector regardless of its
shape, and return an array of the same shape.
"""

import numpy as np

__all__ = ["prox_weighted_l1", "project_nonneg", "project_simplex",
           "prox_max", "prox_l2"]


def _check_tau(tau):
    if not tau >= 0:
        raise ValueError(f"tau must be non-negative, got {tau!r}")


def _positive_weights(w, shape):
    w = np.broadcast_to(np.asarray(w, dtype=np.float64), shape)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be finite and strictly positive")
    return w


def prox_weighted_l1(v, tau, w=1.0):
    """Soft thresholding, ``sign(v) * max(|v| - tau * w, 0)``."""
    _check_tau(tau)
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("l1 weights must be non-negative")
    return np.sign(v) * np.maximum(np.abs(v) - tau * w, 0.0)


def project_nonneg(v):
    return np.maximum(v, 0.0)


def project_simplex(v, radius=1.0):
    """Euclidean projection onto ``{z >= 0, sum(z) = radius}``.

    Sort-and-threshold algorithm, O(N log N).
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v.ravel())[::-1]
    css = np.cumsum(u) - radius
    k = np.arange(1, u.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def prox_max(v, tau, w=None):
    """Proximal operator of ``tau * max_i(w_i x_i)``.

    The solution clamps every entry with ``w_i v_i`` above a threshold
    ``t`` to ``t / w_i`` and leaves the others unchanged. Without weights
    it is computed through the Moreau decomposition
    ``v - tau * P_simplex(v / tau)``; with weights the threshold is found
    exactly by scanning the sorted values of ``w * v``.

    Parameters
    ----------
    v : array_like
    tau : float
        Non-negative scaling of the max function.
    w : array_like or None
        Strictly positive weights broadcastable to `v`.
    """
    _check_tau(tau)
    v = np.asarray(v, dtype=np.float64)
    if tau == 0:
        return v.copy()
    if w is None:
        return v - tau * project_simplex(v / tau, 1.0)

    w = _positive_weights(w, v.shape).ravel()
    z = w * v.ravel()
    # stable sort: ties resolved by index order
    order = np.argsort(-z, kind="stable")
    zs = z[order]
    iw2 = 1.0 / w[order]**2
    t = (np.cumsum(zs * iw2) - tau) / np.cumsum(iw2)
    valid = np.empty(zs.size, dtype=bool)
    valid[:-1] = t[:-1] >= zs[1:]
    valid[-1] = True
    thr = t[np.argmax(valid)]
    return np.minimum(v, (thr / w).reshape(v.shape))


def _weighted_l2_radius(v2w, tw, tol):
    """Root of ``sum(v2w / (r + tw)^2) = 1`` for ``r > 0``.

    The left side is convex and decreasing in r, so Newton iteration
    started left of the root increases monotonically towards it; a
    bisection bracket guards against rounding.
    """
    lo, hi = 0.0, float(np.sqrt(np.sum(v2w)))
    r = 0.0
    for _ in range(200):
        d = r + tw
        h = np.sum(v2w / d**2) - 1.0
        if h > 0:
            lo = r
        else:
            hi = r
        dh = -2.0 * np.sum(v2w / d**3)
        r_new = r - h / dh
        if not lo <= r_new <= hi:
            r_new = 0.5 * (lo + hi)
        if abs(r_new - r) <= tol:
            return r_new
        r = r_new
    return r


def prox_l2(v, tau, w=None):
    """Proximal operator of ``tau * sqrt(sum_i w_i x_i^2)``.

    Unweighted, this is block shrinkage ``max(1 - tau/||v||, 0) v``.
    Weighted, the solution is ``x_i = v_i / (1 + tau w_i / r)`` where
    ``r = sqrt(sum_i w_i x_i^2)`` solves a scalar secular equation; the
    result is zero when ``sum_i v_i^2 / w_i <= tau^2``.
    """
    _check_tau(tau)
    v = np.asarray(v, dtype=np.float64)
    if tau == 0:
        return v.copy()
    if w is None:
        nrm = np.sqrt(np.sum(v**2))
        if nrm <= tau:
            return np.zeros_like(v)
        return (1.0 - tau / nrm) * v

    w = _positive_weights(w, v.shape)
    if np.sum(v**2 / w) <= tau**2:
        return np.zeros_like(v)
    v2w = w * v**2
    tw = tau * w
    scale = float(np.sqrt(np.sum(v2w)))
    r = _weighted_l2_radius(v2w.ravel(), tw.ravel(), 1e-12 * max(scale, 1.0))
    return v / (1.0 + tw / r)
