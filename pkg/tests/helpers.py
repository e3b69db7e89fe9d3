"""Dense reference operators and generic oracles shared by the tests."""

import numpy as np
from scipy.optimize import minimize_scalar

from mixedcsc.signal import Dictionary


def circ_conv2(f, x):
    """Direct circular convolution of a small filter with an image."""
    H, W = x.shape
    out = np.zeros((H, W))
    for i in range(f.shape[0]):
        for j in range(f.shape[1]):
            out += f[i, j] * np.roll(x, (i, j), axis=(0, 1))
    return out


def circ_corr2(k, x):
    """Direct circular correlation: ``sum_delta k[delta] x[p + delta]``."""
    out = np.zeros(x.shape)
    for i in range(k.shape[0]):
        for j in range(k.shape[1]):
            out += k[i, j] * np.roll(x, (-i, -j), axis=(0, 1))
    return out


def dense_ops(d, shape):
    """Dense matrices for D and the unit-kernel G on ``(M, H, W)`` maps.

    Columns are ordered as ``x.ravel()`` of the ``(M, H, W)`` maps. G is
    built from the covering definition: group ``p`` holds every placement
    whose support contains pixel ``p + (h - 1, w - 1)``.
    """
    f = d.filters
    M, h, w = f.shape
    H, W = shape
    N = H * W
    D = np.zeros((N, M * N))
    G = np.zeros((N, M * N))
    for m in range(M):
        for qr in range(H):
            for qc in range(W):
                col = m * N + qr * W + qc
                for i in range(h):
                    for j in range(w):
                        D[((qr + i) % H) * W + (qc + j) % W, col] += f[m, i, j]
        for pr in range(H):
            for pc in range(W):
                cr, cc = (pr + h - 1) % H, (pc + w - 1) % W
                for qr in range(H):
                    for qc in range(W):
                        if (cr - qr) % H < h and (cc - qc) % W < w:
                            G[pr * W + pc, m * N + qr * W + qc] = 1.0
    return D, G


def toy_problem(seed, length=8, num_filters=2, flen=3):
    rng = np.random.default_rng(seed)
    d = Dictionary.from_filters(rng.standard_normal((num_filters, 1, flen)))
    s = rng.standard_normal((1, length))
    return d, s


def cvx_functional(d, s, kind, lmbda, group_w=None, l1_w=None):
    """Optimal value of the CSC problem from a generic conic solver."""
    import cvxpy as cp
    D, G = dense_ops(d, s.shape)
    x = cp.Variable(D.shape[1])
    gs = G @ cp.abs(x)
    if kind == "l1":
        reg = cp.norm1(x if l1_w is None else cp.multiply(np.ravel(l1_w), x))
    elif kind == "l1inf":
        reg = cp.max(gs if group_w is None else
                     cp.multiply(np.ravel(group_w), gs))
    else:
        reg = cp.norm(gs if group_w is None else
                      cp.multiply(np.sqrt(np.ravel(group_w)), gs), 2)
    prob = cp.Problem(cp.Minimize(
        0.5 * cp.sum_squares(D @ x - s.ravel()) + lmbda * reg))
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10,
               tol_feas=1e-10)
    return prob.value, x.value.reshape((d.num_filters,) + s.shape)


def prox_max_oracle(v, tau, w):
    """Numerical prox of ``tau max(w x)`` by a 1-D search over the cap.

    For a fixed cap ``t`` the best ``x`` is ``min(v, t / w)``; the convex
    scalar problem in ``t`` is bracketed on a grid and polished with
    Brent's method.
    """
    z = w * v

    def f(t):
        x = np.minimum(v, t / w)
        return tau * np.max(w * x) + 0.5 * np.sum((x - v)**2)

    # the optimal cap is a weighted mean of clamped z minus tau / sum(1/w^2)
    lo = z.min() - tau * np.max(w**2) - 1.0
    hi = z.max()
    ts = np.linspace(lo, hi, 401)
    X = np.minimum(v, ts[:, None] / w)
    k = int(np.argmin(tau * np.max(w * X, axis=1)
                      + 0.5 * np.sum((X - v)**2, axis=1)))
    a, b = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
    r = minimize_scalar(f, bounds=(a, b), method="bounded",
                        options={"xatol": 1e-13, "maxiter": 500})
    t = r.x if r.fun <= f(ts[k]) else ts[k]
    return np.minimum(v, t / w)


def prox_l2_oracle(v, tau, w):
    """Numerical prox of ``tau sqrt(sum w x^2)``.

    Stationary points with ``x != 0`` lie on ``x(r) = v / (1 + tau w / r)``;
    the objective is minimized over ``r`` numerically and compared with
    ``x = 0``.
    """
    def obj(x):
        return tau * np.sqrt(np.sum(w * x**2)) + 0.5 * np.sum((x - v)**2)

    def path(r):
        return v / (1.0 + tau * w / r)

    hi = np.sqrt(np.sum(w * v**2)) + 1.0
    rs = np.geomspace(1e-12, hi, 400)
    X = v / (1.0 + tau * w / rs[:, None])
    k = int(np.argmin(tau * np.sqrt(np.sum(w * X**2, axis=1))
                      + 0.5 * np.sum((X - v)**2, axis=1)))
    a, b = rs[max(k - 1, 0)], rs[min(k + 1, len(rs) - 1)]
    r = minimize_scalar(lambda r: obj(path(r)), bounds=(a, b),
                        method="bounded",
                        options={"xatol": 1e-14, "maxiter": 500})
    best = path(r.x)
    zero = np.zeros_like(v)
    return zero if obj(zero) <= obj(best) else best


def simplex_oracle(v, radius=1.0):
    """Projection onto the simplex by enumerating support sets."""
    n = v.size
    best, bestd = None, np.inf
    for mask in range(1, 2**n):
        S = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        theta = (v[S].sum() - radius) / S.sum()
        z = np.zeros(n)
        z[S] = v[S] - theta
        if np.all(z[S] >= -1e-15):
            dist = np.sum((z - v)**2)
            if dist < bestd:
                best, bestd = z, dist
    return best
