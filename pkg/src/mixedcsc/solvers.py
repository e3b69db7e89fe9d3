"""ADMM solvers for convolutional sparse coding.

Three problems are supported, all of the form

    argmin_x (1/2)||D x - s||^2 + lmbda * R(x)

with ``R`` one of

* ``L1``:    ``sum |w * x|`` (optionally weighted),
* ``L1INF``: ``max_i w_i (G|x|)_i``, the overlapping-group l1,inf norm,
* ``L12``:   ``sqrt(sum_i w_i (G|x|)_i^2)``, the overlapping-group l1,2 norm.

The mixed norms are handled either by nesting an inner ADMM for the
proximal operator of ``R`` inside the standard outer iterations
(:func:`solve_csc_mixed_nested`), or by splitting ``x = x0 - x1`` into
non-negative parts and solving one larger ADMM problem
(:func:`solve_csc_mixed_nonneg`).
"""

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._fft import irfft2, rfft2
from .exceptions import DimensionError, SolverError
from .groups import GroupOperator, norm_l12, norm_l1inf, unit_group_operator
from .linsolve import Rank1Factor, Rank2Factor
from .prox import project_nonneg, prox_l2, prox_max, prox_weighted_l1
from .signal import SpectralDictionary, as_image

__all__ = ["Penalty", "PenaltySpec", "AdmmConfig", "SolveResult",
           "InnerState", "ProxGroupsResult", "group_operator_for",
           "functional", "prox_max_groups", "solve_csc_l1",
           "solve_csc_mixed_nested", "solve_csc_mixed_nonneg", "solve_csc"]

log = logging.getLogger(__name__)


class Penalty(str, enum.Enum):
    L1 = "l1"
    L1INF = "l1inf"
    L12 = "l12"


@dataclass
class PenaltySpec:
    """Regularization term and its weights.

    Attributes
    ----------
    kind : Penalty
    lmbda : float
        Regularization parameter, ``>= 0``.
    l1_weights : array_like or None
        Per-coefficient weights for ``L1``, broadcastable to ``(M, H, W)``.
    group_weights : array_like or None
        Per-group (outer norm) weights for the mixed norms, shape ``(H, W)``.
    group_kernels : array_like or None
        ``(M, h, w)`` inner l1 weights defining ``G``; unit kernels if None.
    """

    kind: Penalty
    lmbda: float
    l1_weights: Optional[np.ndarray] = None
    group_weights: Optional[np.ndarray] = None
    group_kernels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.kind = Penalty(self.kind)
        if not (np.isfinite(self.lmbda) and self.lmbda >= 0):
            raise ValueError(f"lmbda must be finite and >= 0, got "
                             f"{self.lmbda!r}")


@dataclass
class AdmmConfig:
    """ADMM parameters.

    ``None`` for `rho`, `alpha0`, `alpha1` or `residual_balancing`
    selects the default for the penalty kind (see :meth:`resolve`).
    Setting `eps_rel` to None disables the residual stopping test so
    that exactly `max_iter` iterations are run.
    """

    rho: Optional[float] = None
    alpha0: Optional[float] = None
    alpha1: Optional[float] = None
    max_iter: int = 250
    eps_rel: Optional[float] = 1e-4
    eps_abs: float = 0.0
    residual_balancing: Optional[bool] = None
    rb_mu: float = 10.0
    rb_tau: float = 2.0
    inner_rho: float = 1.0
    inner_alpha0: float = 1.0
    inner_alpha1: float = 1.0
    inner_max_iter: int = 100
    inner_tol: float = 1e-4
    inner_warm_start: bool = True
    track_functional: bool = True

    def resolve(self, kind, lmbda):
        """Return a copy with penalty-specific defaults filled in.

        l1: ``rho = 50 lmbda + 1`` with residual balancing on.
        l1,inf: ``rho = 0.05 lmbda``, ``alpha0 = 0.06``.
        l1,2: ``rho = 3 lmbda``, ``alpha0 = 0.03``.
        Mixed norms use ``alpha1 = 1 / alpha0`` and no residual balancing.
        """
        kind = Penalty(kind)
        if kind is Penalty.L1:
            rho, a0, rb = 50.0 * lmbda + 1.0, 1.0, True
        elif kind is Penalty.L1INF:
            rho, a0, rb = 0.05 * lmbda, 0.06, False
        else:
            rho, a0, rb = 3.0 * lmbda, 0.03, False
        c = replace(self)
        if c.rho is None:
            c.rho = rho if rho > 0 else 1.0
        if c.alpha0 is None:
            c.alpha0 = a0
        if c.alpha1 is None:
            c.alpha1 = 1.0 / c.alpha0
        if c.residual_balancing is None:
            c.residual_balancing = rb
        for name in ("rho", "alpha0", "alpha1", "inner_rho", "inner_alpha0",
                     "inner_alpha1"):
            if not getattr(c, name) > 0:
                raise ValueError(f"{name} must be positive")
        if c.max_iter < 1 or c.inner_max_iter < 1:
            raise ValueError("iteration caps must be positive")
        return c


@dataclass
class SolveResult:
    """Solution and iteration history of a CSC solve."""

    x: np.ndarray
    iterations: int
    functional: np.ndarray
    primal_residual: np.ndarray
    dual_residual: np.ndarray
    rho: np.ndarray
    wall_time: float
    converged: bool
    final_functional: float
    inner_iterations: list = field(default_factory=list)
    inner_warnings: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def time_per_iteration(self):
        return self.wall_time / max(self.iterations, 1)


def _rfl2norm2(Xf, shape):
    """Squared l2 norm of the real array whose rfft2 is `Xf`."""
    W = shape[-1]
    a2 = np.abs(Xf)**2
    total = 2.0 * np.sum(a2) - np.sum(a2[..., 0])
    if W % 2 == 0:
        total -= np.sum(a2[..., -1])
    return float(total) / (shape[-2] * shape[-1])


def _spectral(d, shape):
    if isinstance(d, SpectralDictionary):
        if d.shape != tuple(shape):
            raise DimensionError("spectral dictionary size", d.shape, shape)
        return d
    return SpectralDictionary(d, shape)


def group_operator_for(d, shape, kernels=None):
    """Group operator matching dictionary `d` at image size `shape`."""
    dd = d.dictionary if isinstance(d, SpectralDictionary) else d
    if kernels is None:
        return unit_group_operator(dd.filter_shape, dd.num_filters, shape)
    kernels = np.asarray(kernels, dtype=np.float64)
    if kernels.shape != dd.filters.shape:
        raise DimensionError("group kernels vs filters", kernels.shape,
                             dd.filters.shape)
    return GroupOperator(kernels, shape)


def _penalty_value(penalty, x, g):
    if penalty.kind is Penalty.L1:
        w = 1.0 if penalty.l1_weights is None else penalty.l1_weights
        return float(np.sum(np.abs(w * x)))
    if penalty.kind is Penalty.L1INF:
        return norm_l1inf(g, x, penalty.group_weights)
    return norm_l12(g, x, penalty.group_weights)


def functional(d, s, x, penalty, g=None):
    """Objective ``(1/2)||D x - s||^2 + lmbda R(x)``."""
    s = as_image(s)
    sd = _spectral(d, s.shape)
    if g is None and penalty.kind is not Penalty.L1:
        g = group_operator_for(sd, s.shape, penalty.group_kernels)
    r = sd.synthesize(x) - s
    return 0.5 * float(np.sum(r**2)) + penalty.lmbda * _penalty_value(
        penalty, x, g)


def _outer_prox(kind):
    return prox_max if Penalty(kind) is Penalty.L1INF else prox_l2


def _setup(d, s, penalty, config):
    s = as_image(s)
    sd = _spectral(d, s.shape)
    cfg = (config or AdmmConfig()).resolve(penalty.kind, penalty.lmbda)
    return s, sd, cfg


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise SolverError("non-finite iterate; reduce rho or check "
                              "the input scaling")


class _History:
    def __init__(self):
        self.f, self.r, self.s, self.rho = [], [], [], []

    def add(self, f, r, s, rho):
        self.f.append(f)
        self.r.append(r)
        self.s.append(s)
        self.rho.append(rho)

    def arrays(self):
        return (np.array(self.f), np.array(self.r), np.array(self.s),
                np.array(self.rho))


def _converged(cfg, n, r, s, pri_scale, dua_scale):
    if cfg.eps_rel is None:
        return False
    eps_pri = math.sqrt(n) * cfg.eps_abs + cfg.eps_rel * pri_scale
    eps_dua = math.sqrt(n) * cfg.eps_abs + cfg.eps_rel * dua_scale
    return r <= eps_pri and s <= eps_dua


def _balance(cfg, rho, r, s, pri_scale, dua_scale, rho0):
    """Residual balancing: return the multiplicative change of rho.

    Residuals at rounding level carry no information about the balance
    (a zero penalty makes the primal residual vanish identically), and
    rho is kept within four decades of its starting value.
    """
    if not cfg.residual_balancing:
        return 1.0
    tiny = 1e-13
    if r <= tiny * pri_scale or s <= tiny * dua_scale:
        return 1.0
    if r > cfg.rb_mu * s and rho * cfg.rb_tau <= 1e4 * rho0:
        return cfg.rb_tau
    if s > cfg.rb_mu * r and rho / cfg.rb_tau >= 1e-4 * rho0:
        return 1.0 / cfg.rb_tau
    return 1.0


def solve_csc_l1(d, s, penalty, config=None):
    """Weighted l1 CSC via ADMM with a DFT-domain Sherman-Morrison x-step.

    Parameters
    ----------
    d : Dictionary or SpectralDictionary
    s : ndarray, shape (H, W)
    penalty : PenaltySpec
        Must have ``kind == Penalty.L1``.
    config : AdmmConfig or None

    Returns
    -------
    SolveResult
        ``x`` is the sparse split variable ``y`` at termination.
    """
    if penalty.kind is not Penalty.L1:
        raise ValueError("solve_csc_l1 requires an L1 penalty")
    t0 = time.perf_counter()
    s, sd, cfg = _setup(d, s, penalty, config)
    shape = s.shape
    M = sd.Df.shape[0]
    n = M * shape[0] * shape[1]
    w = 1.0 if penalty.l1_weights is None else np.broadcast_to(
        np.asarray(penalty.l1_weights, dtype=np.float64), (M,) + shape)
    Sf = rfft2(s)
    DSf = sd.Dfc * Sf[np.newaxis]
    rho = cfg.rho
    y = np.zeros((M,) + shape)
    u = np.zeros_like(y)
    hist = _History()
    converged = False
    k = 0
    fac = Rank1Factor(sd.Df, rho)
    for k in range(1, cfg.max_iter + 1):
        Xf = fac.solve(DSf + rho * rfft2(y - u))
        x = irfft2(Xf, shape)
        y_old = y
        y = prox_weighted_l1(x + u, penalty.lmbda / rho, w)
        u = u + x - y
        _check_finite(u)
        r = float(np.linalg.norm(x - y))
        sdual = rho * float(np.linalg.norm(y - y_old))
        f = np.nan
        if cfg.track_functional:
            e = irfft2(sd.synthesize_f(Xf), shape) - s
            f = 0.5 * float(np.sum(e**2)) + penalty.lmbda * float(
                np.sum(np.abs(w * x)))
        hist.add(f, r, sdual, rho)
        ps = max(np.linalg.norm(x), np.linalg.norm(y))
        ds = rho * np.linalg.norm(u)
        if _converged(cfg, n, r, sdual, ps, ds):
            converged = True
            break
        scale = _balance(cfg, rho, r, sdual, ps, ds, cfg.rho)
        if scale != 1.0:
            rho *= scale
            u = u / scale
            fac = Rank1Factor(sd.Df, rho)
    fh, rh, sh, rhoh = hist.arrays()
    return SolveResult(
        x=y, iterations=k, functional=fh, primal_residual=rh,
        dual_residual=sh, rho=rhoh, wall_time=time.perf_counter() - t0,
        converged=converged,
        final_functional=functional(sd, s, y, penalty))


@dataclass
class InnerState:
    """Split and dual variables of the inner ADMM, kept for warm starts."""

    y0: np.ndarray
    y1: np.ndarray
    u0: np.ndarray
    u1: np.ndarray


@dataclass
class ProxGroupsResult:
    x: np.ndarray
    state: InnerState
    iterations: int
    converged: bool


def prox_max_groups(g, v, tau, outer="max", group_w=None, config=None,
                    state=None):
    """Proximal operator of ``tau * f(G|x|)`` with f the max or l2 norm.

    Since the penalty depends only on ``|x|`` the solution has the sign
    of `v`, so the problem is solved for ``|v|`` on the non-negative
    orthant by an inner ADMM with splits ``y0 = G x`` (scaled by
    ``alpha0``) and ``y1 = x`` (scaled by ``alpha1``), and the sign is
    restored afterwards.

    Parameters
    ----------
    g : GroupOperator
    v : ndarray, shape (M, H, W)
    tau : float
    outer : {"max", "l2"}
    group_w : ndarray or None
        Outer norm weights, shape ``(H, W)``.
    config : AdmmConfig or None
        Uses the ``inner_*`` fields.
    state : InnerState or None
        Warm start; zeros if None.

    Returns
    -------
    ProxGroupsResult
        ``converged`` is False if `inner_max_iter` was reached before
        the relative change in functional value fell below `inner_tol`.
    """
    if not tau >= 0:
        raise ValueError(f"tau must be non-negative, got {tau!r}")
    cfg = config or AdmmConfig()
    v = np.asarray(v, dtype=np.float64)
    shape = g.shape
    if state is None:
        state = InnerState(np.zeros(shape), np.zeros(v.shape),
                           np.zeros(shape), np.zeros(v.shape))
    if tau == 0:
        return ProxGroupsResult(v.copy(), state, 0, True)
    if outer == "max":
        fprox, fnorm = prox_max, _max_norm
    elif outer == "l2":
        fprox, fnorm = prox_l2, _l2_norm
    else:
        raise ValueError(f"outer must be 'max' or 'l2', got {outer!r}")

    sgn = np.sign(v)
    va = np.abs(v)
    Vf = rfft2(va)
    rho, a0, a1 = cfg.inner_rho, cfg.inner_alpha0, cfg.inner_alpha1
    y0, y1, u0, u1 = state.y0, state.y1, state.u0, state.u1
    fac = Rank1Factor(math.sqrt(rho) * a0 * g.Gf, 1.0 + rho * a1**2)
    thresh = tau / (rho * a0**2)
    f_old = None
    converged = False
    k = 0
    for k in range(1, cfg.inner_max_iter + 1):
        Rf = (Vf + rho * a0 * g.adjoint_f(rfft2(a0 * y0 - u0))
              + rho * a1 * rfft2(a1 * y1 - u1))
        Xf = fac.solve(Rf)
        x = irfft2(Xf, shape)
        Gx = irfft2(g.forward_f(Xf), shape)
        y0 = fprox(Gx + u0 / a0, thresh, group_w)
        y1 = project_nonneg(x + u1 / a1)
        u0 = u0 + a0 * (Gx - y0)
        u1 = u1 + a1 * (x - y1)
        f = 0.5 * float(np.sum((x - va)**2)) + tau * fnorm(Gx, group_w)
        if f_old is not None and abs(f - f_old) <= cfg.inner_tol * max(
                abs(f), np.finfo(float).tiny):
            converged = True
            break
        f_old = f
    _check_finite(u0, u1)
    return ProxGroupsResult(sgn * y1, InnerState(y0, y1, u0, u1), k,
                            converged)


def _max_norm(z, w):
    return float(np.max(z if w is None else w * z))


def _l2_norm(z, w):
    return float(np.sqrt(np.sum(z**2 if w is None else w * z**2)))


def solve_csc_mixed_nested(d, s, penalty, config=None):
    """Mixed-norm CSC with an inner ADMM computing the y-step prox.

    The x-step is identical to :func:`solve_csc_l1`; the y-step calls
    :func:`prox_max_groups` (max for ``L1INF``, l2 for ``L12``), warm
    started from the previous outer iteration's inner state when
    ``config.inner_warm_start`` is set.
    """
    if penalty.kind is Penalty.L1:
        raise ValueError("solve_csc_mixed_nested requires a mixed penalty")
    t0 = time.perf_counter()
    s, sd, cfg = _setup(d, s, penalty, config)
    shape = s.shape
    M = sd.Df.shape[0]
    n = M * shape[0] * shape[1]
    g = group_operator_for(sd, shape, penalty.group_kernels)
    outer = "max" if penalty.kind is Penalty.L1INF else "l2"
    DSf = sd.Dfc * rfft2(s)[np.newaxis]
    rho = cfg.rho
    y = np.zeros((M,) + shape)
    u = np.zeros_like(y)
    state = None
    hist = _History()
    inner_its = []
    warnings = 0
    converged = False
    k = 0
    fac = Rank1Factor(sd.Df, rho)
    for k in range(1, cfg.max_iter + 1):
        Xf = fac.solve(DSf + rho * rfft2(y - u))
        x = irfft2(Xf, shape)
        y_old = y
        res = prox_max_groups(g, x + u, penalty.lmbda / rho, outer,
                              penalty.group_weights, cfg,
                              state if cfg.inner_warm_start else None)
        y, state = res.x, res.state
        inner_its.append(res.iterations)
        warnings += not res.converged
        u = u + x - y
        _check_finite(u)
        r = float(np.linalg.norm(x - y))
        sdual = rho * float(np.linalg.norm(y - y_old))
        f = np.nan
        if cfg.track_functional:
            e = irfft2(sd.synthesize_f(Xf), shape) - s
            f = 0.5 * float(np.sum(e**2)) + penalty.lmbda * _penalty_value(
                penalty, x, g)
        hist.add(f, r, sdual, rho)
        ps = max(np.linalg.norm(x), np.linalg.norm(y))
        ds = rho * np.linalg.norm(u)
        if _converged(cfg, n, r, sdual, ps, ds):
            converged = True
            break
        scale = _balance(cfg, rho, r, sdual, ps, ds, cfg.rho)
        if scale != 1.0:
            rho *= scale
            u = u / scale
            fac = Rank1Factor(sd.Df, rho)
    if warnings:
        log.info("inner prox hit its iteration cap in %d of %d outer "
                 "iterations", warnings, k)
    fh, rh, sh, rhoh = hist.arrays()
    return SolveResult(
        x=y, iterations=k, functional=fh, primal_residual=rh,
        dual_residual=sh, rho=rhoh, wall_time=time.perf_counter() - t0,
        converged=converged,
        final_functional=functional(sd, s, y, penalty, g),
        inner_iterations=inner_its, inner_warnings=warnings)


def solve_csc_mixed_nonneg(d, s, penalty, config=None):
    """Mixed-norm CSC by mapping to a non-negative problem.

    The representation is doubled to ``(x0, x1) >= 0`` with synthesis
    operator ``(D, -D)`` and group operator ``(G, G)``; the x-step system
    ``(D^T D + rho a0^2 G^T G + rho a1^2 I)`` is solved per frequency by
    two Sherman-Morrison updates, ``y0`` by the max or l2 prox and ``y1``
    by clipping. The returned solution is ``x0 - x1``.
    """
    if penalty.kind is Penalty.L1:
        raise ValueError("solve_csc_mixed_nonneg requires a mixed penalty")
    t0 = time.perf_counter()
    s, sd, cfg = _setup(d, s, penalty, config)
    shape = s.shape
    M = sd.Df.shape[0]
    n = 2 * M * shape[0] * shape[1] + shape[0] * shape[1]
    g = group_operator_for(sd, shape, penalty.group_kernels)
    fprox = _outer_prox(penalty.kind)
    fnorm = _max_norm if penalty.kind is Penalty.L1INF else _l2_norm
    gw = penalty.group_weights

    Af = np.concatenate([sd.Df, -sd.Df])
    Bf = np.concatenate([g.Gf, g.Gf])
    Bfc = np.conj(Bf)
    ASf = np.conj(Af) * rfft2(s)[np.newaxis]
    rho, a0, a1 = cfg.rho, cfg.alpha0, cfg.alpha1

    y0 = np.zeros(shape)
    y1 = np.zeros((2 * M,) + shape)
    u0 = np.zeros(shape)
    u1 = np.zeros_like(y1)
    Y1f = np.zeros(y1.shape[:-1] + (shape[-1] // 2 + 1,), dtype=complex)
    U1f = np.zeros_like(Y1f)
    hist = _History()
    converged = False
    k = 0
    fac = Rank2Factor(Af, Bf, rho * a1**2, 1.0, rho * a0**2)
    for k in range(1, cfg.max_iter + 1):
        Rf = (ASf + rho * a0 * Bfc * rfft2(a0 * y0 - u0)[np.newaxis]
              + rho * a1 * (a1 * Y1f - U1f))
        Xf = fac.solve(Rf)
        X = irfft2(Xf, shape)
        GXf = np.sum(Bf * Xf, axis=0)
        GX = irfft2(GXf, shape)
        y0_old = y0
        y0 = fprox(GX + u0 / a0, penalty.lmbda / (rho * a0**2), gw)
        y1 = project_nonneg(X + u1 / a1)
        Y1f_old = Y1f
        Y1f = rfft2(y1)
        u0 = u0 + a0 * (GX - y0)
        u1 = u1 + a1 * (X - y1)
        U1f = U1f + a1 * (Xf - Y1f)
        _check_finite(u0, u1)

        r = math.sqrt(a0**2 * float(np.sum((GX - y0)**2))
                      + a1**2 * float(np.sum((X - y1)**2)))
        Zf = (a0**2 * Bfc * rfft2(y0 - y0_old)[np.newaxis]
              + a1**2 * (Y1f - Y1f_old))
        sdual = rho * math.sqrt(_rfl2norm2(Zf, shape))
        f = np.nan
        if cfg.track_functional:
            x = X[:M] - X[M:]
            e = irfft2(sd.synthesize_f(Xf[:M] - Xf[M:]), shape) - s
            f = 0.5 * float(np.sum(e**2)) + penalty.lmbda * fnorm(
                g.forward(np.abs(x)), gw)
        hist.add(f, r, sdual, rho)
        ps = max(math.sqrt(a0**2 * np.sum(GX**2) + a1**2 * np.sum(X**2)),
                 math.sqrt(a0**2 * np.sum(y0**2) + a1**2 * np.sum(y1**2)))
        ds = rho * math.sqrt(_rfl2norm2(a0 * Bfc * rfft2(u0)[np.newaxis]
                                        + a1 * U1f, shape))
        if _converged(cfg, n, r, sdual, ps, ds):
            converged = True
            break
        scale = _balance(cfg, rho, r, sdual, ps, ds, cfg.rho)
        if scale != 1.0:
            rho *= scale
            u0 = u0 / scale
            u1 = u1 / scale
            U1f = U1f / scale
            fac = Rank2Factor(Af, Bf, rho * a1**2, 1.0, rho * a0**2)
    x0, x1 = y1[:M], y1[M:]
    x = x0 - x1
    fh, rh, sh, rhoh = hist.arrays()
    return SolveResult(
        x=x, iterations=k, functional=fh, primal_residual=rh,
        dual_residual=sh, rho=rhoh, wall_time=time.perf_counter() - t0,
        converged=converged,
        final_functional=functional(sd, s, x, penalty, g),
        extra={"x0": x0, "x1": x1})


def solve_csc(d, s, penalty, config=None, algorithm="nonneg"):
    """Dispatch on penalty kind; `algorithm` selects the mixed-norm method."""
    penalty_kind = Penalty(penalty.kind)
    if penalty_kind is Penalty.L1:
        return solve_csc_l1(d, s, penalty, config)
    if algorithm == "nested":
        return solve_csc_mixed_nested(d, s, penalty, config)
    if algorithm == "nonneg":
        return solve_csc_mixed_nonneg(d, s, penalty, config)
    raise ValueError(f"unknown algorithm {algorithm!r}")
