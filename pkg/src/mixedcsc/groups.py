"""Overlapping stripe groups and the group-sum operator ``G``.

A coefficient group is indexed by a spatial location ``p``. With kernels
``k_m`` of the same support ``(h, w)`` as the dictionary filters, the
weighted l1 norm of group ``p`` is

    (G |x|)(p) = sum_m sum_{0 <= delta < (h, w)} k_m[delta] |x_m[p + delta]|

(circular indexing). With the filter origin at the top-left of its
support, all placements ``p + delta`` in a group cover the common pixel
``p + (h-1, w-1)``. The group's reference patch is the ``(h, w)`` patch
covered by the placement at ``p``; placement ``p + delta`` overlaps it
on an ``(h - delta_r, w - delta_c)`` block. The forward map is a
circular correlation and its adjoint a circular convolution, both
evaluated in the DFT domain.
"""

import numpy as np

from ._fft import irfft2, rfft2, zero_pad
from .exceptions import DimensionError
from .signal import as_maps

__all__ = ["GroupOperator", "unit_group_operator", "stripe_weight_kernels",
           "group_sums", "group_sums_adjoint", "norm_l1inf", "norm_l12"]


class GroupOperator:
    """Group-sum operator for ``(M, H, W)`` coefficient maps.

    Parameters
    ----------
    kernels : array_like, shape (M, h, w)
        Non-negative per-filter kernels.
    shape : tuple of int
        Spatial size ``(H, W)`` of the coefficient maps.
    """

    def __init__(self, kernels, shape):
        k = np.array(kernels, dtype=np.float64)
        if k.ndim != 3:
            raise ValueError(f"kernels must have shape (M, h, w), got "
                             f"{k.shape}")
        if not np.all(np.isfinite(k)) or np.any(k < 0):
            raise ValueError("group kernels must be finite and non-negative")
        shape = tuple(int(n) for n in shape)
        if k.shape[1] > shape[0] or k.shape[2] > shape[1]:
            raise DimensionError("kernel support exceeds map size",
                                 k.shape[1:], shape)
        k.setflags(write=False)
        self.kernels = k
        self.shape = shape
        # Gf is the row vector of G per frequency: (G x)^ = sum_m Gf_m X_m
        self.Gf = np.conj(rfft2(zero_pad(k, shape)))
        self.Gfc = np.conj(self.Gf)
        self.Gf.setflags(write=False)
        self.Gfc.setflags(write=False)

    @property
    def num_filters(self):
        return self.kernels.shape[0]

    @property
    def unit(self):
        return bool(np.all(self.kernels == 1.0))

    def _check(self, x):
        x = as_maps(x)
        if x.shape != (self.num_filters,) + self.shape:
            raise DimensionError("group operator input",
                                 x.shape, (self.num_filters,) + self.shape)
        return x

    def forward_f(self, Xf):
        return np.sum(self.Gf * Xf, axis=0)

    def forward(self, x):
        return irfft2(self.forward_f(rfft2(self._check(x))), self.shape)

    def adjoint_f(self, Vf):
        return self.Gfc * Vf[np.newaxis]

    def adjoint(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != self.shape:
            raise DimensionError("group operator adjoint input",
                                 v.shape, self.shape)
        return irfft2(self.adjoint_f(rfft2(v)), self.shape)


def unit_group_operator(filter_shape, num_filters, shape):
    """Group operator with all-ones kernels of support `filter_shape`."""
    return GroupOperator(np.ones((num_filters,) + tuple(filter_shape)), shape)


def stripe_weight_kernels(d, shape):
    """Group operator whose kernels hold partial filter norms.

    ``k_m[delta]`` is the l2 norm of the part of ``d_m`` that, for the
    placement displaced by ``delta`` within the group, still lies inside
    the group's reference patch: ``||d_m[:h - delta_r, :w - delta_c]||``.
    At zero displacement this is ``||d_m|| = 1``.
    """
    if not d.normalized:
        raise ValueError("stripe weights require a normalized dictionary")
    # 2-D prefix sums of squared entries, read back to front
    energy = np.cumsum(np.cumsum(d.filters**2, axis=1), axis=2)
    k = energy[:, ::-1, ::-1]
    return GroupOperator(np.sqrt(k), shape)


def group_sums(g, x, absolute=True):
    """Weighted sum over the group anchored at each location.

    Returns an ``(H, W)`` array; with `absolute` the sums are of
    ``|x|``, giving the (inner) group l1 norms.
    """
    x = as_maps(x)
    return g.forward(np.abs(x) if absolute else x)


def group_sums_adjoint(g, v):
    return g.adjoint(v)


def _group_weights(group_w, shape):
    if group_w is None:
        return None
    w = np.broadcast_to(np.asarray(group_w, dtype=np.float64), shape)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("group weights must be finite and strictly positive")
    return w


def norm_l1inf(g, x, group_w=None):
    """``max_i w_i ||g_i(x)||_1``."""
    s = group_sums(g, x)
    w = _group_weights(group_w, s.shape)
    if w is not None:
        s = w * s
    return float(np.max(s))


def norm_l12(g, x, group_w=None):
    """``sqrt(sum_i w_i ||g_i(x)||_1^2)``."""
    s = group_sums(g, x)
    w = _group_weights(group_w, s.shape)
    s2 = s**2 if w is None else w * s**2
    return float(np.sqrt(np.sum(s2)))
