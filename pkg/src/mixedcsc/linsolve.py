"""Sherman-Morrison solvers for identity plus low-rank systems.

Each DFT frequency of a convolutional problem contributes a small
system whose matrix is a scaled identity plus one or two rank-one terms
built from the row vectors of filter spectra at that frequency. The
functions here solve all such systems at once: the length-``M`` vectors
lie along axis 0 and any trailing axes index the frequencies.

For a row vector ``a`` the rank-one term is ``a^H a``, i.e. the matrix
with entries ``conj(a_i) a_j``. Iterative solvers that reuse one matrix
for many right-hand sides should build a :class:`Rank1Factor` or
:class:`Rank2Factor` once.
"""

import numpy as np

from .exceptions import ConditioningError

__all__ = ["Rank1Factor", "Rank2Factor", "solve_rank1", "solve_rank2"]

TINY = 1e-300


def _check_sigma(sigma):
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")


def _guard(den):
    if np.any(np.abs(den) < TINY):
        raise ConditioningError("Sherman-Morrison denominator vanished")


class Rank1Factor:
    r"""Precomputed solver for :math:`(\sigma I + a^H a) x = b`."""

    def __init__(self, a_hat, sigma):
        _check_sigma(sigma)
        self.a = np.asarray(a_hat)
        self.sigma = sigma
        den = sigma + np.sum(np.abs(self.a)**2, axis=0)
        _guard(den)
        self._ca = np.conj(self.a) / den

    def solve(self, rhs):
        b = np.asarray(rhs)
        return (b - self._ca * np.sum(self.a * b, axis=0)) / self.sigma


class Rank2Factor:
    r"""Precomputed solver for :math:`(\sigma I + c_a a^H a + c_b b^H b)`.

    The ``a`` term is eliminated first, then the ``b`` term by a second
    Sherman-Morrison update. Zero coefficients drop their term.
    """

    def __init__(self, a_hat, b_hat, sigma, c_a, c_b):
        _check_sigma(sigma)
        if c_a < 0 or c_b < 0:
            raise ValueError("rank term coefficients must be non-negative")
        self.sigma = sigma
        self._fa = (Rank1Factor(np.sqrt(c_a) * np.asarray(a_hat), sigma)
                    if c_a > 0 else None)
        self._b = None
        if c_b > 0:
            b = np.asarray(b_hat)
            q = self._inv_a(np.conj(b))
            den = 1.0 + c_b * np.sum(b * q, axis=0)
            _guard(den)
            self._b = b
            self._q = q * (c_b / den)

    def _inv_a(self, v):
        if self._fa is None:
            return v / self.sigma
        return self._fa.solve(v)

    def solve(self, rhs):
        z = self._inv_a(np.asarray(rhs))
        if self._b is None:
            return z
        return z - self._q * np.sum(self._b * z, axis=0)


def solve_rank1(a_hat, sigma, rhs):
    r"""Solve :math:`(\sigma I + a^H a) x = b`.

    Parameters
    ----------
    a_hat : array_like, shape (M, ...)
        Row vector ``a`` for every frequency.
    sigma : float
        Identity coefficient, strictly positive.
    rhs : array_like, shape (M, ...)

    Returns
    -------
    x : ndarray, shape (M, ...)
    """
    return Rank1Factor(a_hat, sigma).solve(rhs)


def solve_rank2(a_hat, b_hat, sigma, c_a, c_b, rhs):
    r"""Solve :math:`(\sigma I + c_a a^H a + c_b b^H b) x = r`."""
    return Rank2Factor(a_hat, b_hat, sigma, c_a, c_b).solve(rhs)
