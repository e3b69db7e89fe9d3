"""Methods-by-images denoising benchmark with block-error diagnostics."""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._fft import workers as _workers
from .omp import OmpConfig, denoise_omp
from .pipeline import (METHODS, block_errors, lambda_grid_search,
                       method_config, method_grid, top_decile_error)
from .signal import NoiseConfig, add_gaussian_noise, psnr, tikhonov_lowpass
from .solvers import Penalty
from .synthetic import dct_patch_dictionary

__all__ = ["BenchmarkCell", "BENCH_METHODS", "noisy_images", "run_method",
           "run_benchmark", "psnr_table", "top_decile_table"]

BENCH_METHODS = tuple(METHODS) + ("omp",)


@dataclass
class BenchmarkCell:
    """Best grid point of one method on one image."""

    image: str
    method: str
    lmbda: float
    psnr: float
    noisy_psnr: float
    iterations: int
    rho: float
    alpha0: float
    alpha1: float
    wall_time: float
    denoised: np.ndarray = field(repr=False)
    ref_norm: np.ndarray = field(repr=False)
    error: np.ndarray = field(repr=False)
    grid: list = field(default_factory=list, repr=False)

    @property
    def top_decile(self):
        return top_decile_error(self.ref_norm, self.error)


def noisy_images(images, sigma=0.05, seed=1):
    """Noisy copies; image ``i`` (in order) uses seed ``seed + i``."""
    return {name: add_gaussian_noise(ref, NoiseConfig(sigma, seed + i))
            for i, (name, ref) in enumerate(images.items())}


def run_method(method, name, reference, noisy, d, sigma=0.05, num=8,
               block=(8, 8), patch_dict=None, lowpass_lambda=2.0):
    """Grid-search one method on one image and collect diagnostics."""
    t0 = time.perf_counter()
    if method == "omp":
        pd = dct_patch_dictionary() if patch_dict is None else patch_dict
        out = denoise_omp(noisy, pd, sigma,
                          OmpConfig(lowpass_lambda=lowpass_lambda))
        lm, q, iters, rho, a0, a1, grid = (math.nan, psnr(reference, out), 0,
                                           math.nan, math.nan, math.nan, [])
    else:
        cfg = method_config(method, lowpass_lambda=lowpass_lambda)
        gs = lambda_grid_search(noisy, reference, d, cfg,
                                method_grid(method, sigma, num))
        out = gs.best.lowpass + gs.best.reconstruction
        lm, q, grid = gs.best_lambda, gs.best_psnr, gs.table
        iters = gs.best.solve.iterations
        rho = float(gs.best.solve.rho[-1]) if len(gs.best.solve.rho) else \
            math.nan
        a0 = a1 = math.nan
        if cfg.penalty is not Penalty.L1:
            r = cfg.admm.resolve(cfg.penalty, lm)
            a0, a1 = r.alpha0, r.alpha1
    ref_hp = tikhonov_lowpass(reference, lowpass_lambda)[1]
    test_hp = tikhonov_lowpass(out, lowpass_lambda)[1]
    rn, er = block_errors(ref_hp, test_hp, block)
    return BenchmarkCell(name, method, lm, q, psnr(reference, noisy), iters,
                         rho, a0, a1, time.perf_counter() - t0, out, rn, er,
                         grid)


def run_benchmark(images, d, methods=BENCH_METHODS, sigma=0.05, seed=1,
                  num=8, block=(8, 8), patch_dict=None, workers=None):
    """Run every method on every image.

    Parameters
    ----------
    images : dict of str to ndarray
        Reference images in [0, 1], keyed by name.
    d : Dictionary
    methods : sequence of str
        Names from :data:`BENCH_METHODS`.
    workers : int or None
        Images processed concurrently; defaults to ``CSC_THREADS``.

    Returns
    -------
    list of BenchmarkCell
        Image-major, methods in the given order, independent of `workers`.
    """
    for m in methods:
        if m not in BENCH_METHODS:
            raise ValueError(f"unknown method {m!r}; choose from "
                             f"{list(BENCH_METHODS)}")
    noisy = noisy_images(images, sigma, seed)

    def one(name):
        return [run_method(m, name, images[name], noisy[name], d, sigma, num,
                           block, patch_dict) for m in methods]

    n = workers or _workers()
    if n > 1 and len(images) > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            rows = list(ex.map(one, list(images)))
    else:
        rows = [one(name) for name in images]
    return [c for row in rows for c in row]


def _table(cells, value):
    images = list(dict.fromkeys(c.image for c in cells))
    methods = list(dict.fromkeys(c.method for c in cells))
    t = {(c.method, c.image): value(c) for c in cells}
    return methods, images, [[t[m, i] for i in images] for m in methods]


def psnr_table(cells):
    """``(methods, images, rows)`` with best PSNR per method and image."""
    return _table(cells, lambda c: c.psnr)


def top_decile_table(cells):
    """Like :func:`psnr_table` with the top-decile block error."""
    return _table(cells, lambda c: c.top_decile)
