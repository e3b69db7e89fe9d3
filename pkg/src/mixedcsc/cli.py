"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data or format error, 4 solver
failure. Inputs may name a file or a built-in source:
``synthetic:<name>`` for test images and ``fixture:<name>`` for
dictionaries (``gabor``, ``dct``, ``random``).
"""

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .exceptions import (ConditioningError, DimensionError, FormatError,
                         SolverError)
from .imageio import (read_dictionary, read_image, scatter_svg, write_csv,
                      write_dictionary, write_image, write_pgm)
from .omp import OmpConfig, denoise_omp
from .pipeline import (WEIGHTING_MODES, DenoiseConfig, block_error_scatter,
                       default_grid, denoise_csc, lambda_grid_search,
                       top_decile_error)
from .signal import (Dictionary, NoiseConfig, add_gaussian_noise, psnr,
                     tikhonov_lowpass)
from .solvers import AdmmConfig, Penalty
from . import synthetic

EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 2, 3, 4

FIXTURES = {
    "gabor": lambda: synthetic.gabor_dictionary(32, 8),
    "dct": lambda: synthetic.dct_dictionary(32, 8),
    "random": lambda: synthetic.random_dictionary(32, 8, seed=0),
}

SCATTER_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                  "#8c564b", "#e377c2")


class UsageError(Exception):
    pass


def _int(s):
    """Integer flag that also accepts scientific notation such as 1e3."""
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {s!r}") from None
    if not v.is_integer():
        raise argparse.ArgumentTypeError(f"invalid integer {s!r}")
    return int(v)


def _float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {s!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"number must be finite: {s!r}")
    return v


def _load_image(src, size=64):
    if src.startswith("synthetic:"):
        name = src.split(":", 1)[1]
        try:
            return synthetic.make_image(name, size)
        except (KeyError, ValueError):
            raise UsageError(f"unknown synthetic image {name!r}; choose from "
                             f"{sorted(synthetic.IMAGES)}") from None
    return read_image(src)


def _load_dictionary(src):
    if src.startswith("fixture:"):
        name = src.split(":", 1)[1]
        if name not in FIXTURES:
            raise UsageError(f"unknown fixture {name!r}; choose from "
                             f"{sorted(FIXTURES)}")
        return FIXTURES[name]()
    return read_dictionary(src)


def _sha256(path):
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def _manifest(path, command, argv, params, inputs, outputs, timings):
    doc = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "params": params,
        "inputs": inputs,
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
        "timings": timings,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _stem(path):
    root, ext = os.path.splitext(path)
    return root if ext else path


# commands ---------------------------------------------------------------

def cmd_addnoise(a, argv):
    t0 = time.perf_counter()
    img = _load_image(a.input, a.size)
    noisy = add_gaussian_noise(img, NoiseConfig(a.sigma, a.seed))
    write_image(a.output, noisy)
    outs = [a.output]
    if not a.output.lower().endswith(".pgm"):
        prev = _stem(a.output) + ".preview.pgm"
        write_pgm(prev, noisy)
        outs.append(prev)
    q = psnr(img, noisy)
    print(f"psnr {q:.4f}")
    _manifest(_stem(a.output) + ".json", "addnoise", argv,
              {"sigma": a.sigma, "seed": a.seed, "size": a.size},
              [a.input], outs, {"total": time.perf_counter() - t0})


def _grid_arg(a):
    if a.grid is None:
        return None
    parts = a.grid.split(":")
    try:
        if len(parts) == 3:
            g = default_grid(0.05, _int(parts[2]), float(parts[0]),
                             float(parts[1]))
        else:
            g = tuple(float(v) for v in a.grid.split(","))
    except (ValueError, argparse.ArgumentTypeError):
        raise UsageError(f"bad --grid {a.grid!r}; use lo:hi:num or a "
                         f"comma list") from None
    return g


def cmd_denoise(a, argv):
    t0 = time.perf_counter()
    noisy = _load_image(a.input, a.size)
    ref = _load_image(a.reference, a.size) if a.reference else None
    grid = _grid_arg(a)
    if grid is not None and len(grid) > 1 and ref is None:
        raise UsageError("--grid with several points needs --reference")
    row = {"method": a.method, "image": os.path.basename(a.input),
           "lmbda": math.nan, "rho": math.nan, "alpha0": math.nan,
           "alpha1": math.nan, "iterations": 0, "psnr": math.nan,
           "functional": math.nan}
    if a.method == "omp":
        if a.patch_dict:
            pd = _load_dictionary(a.patch_dict).filters
            pd = pd.reshape(pd.shape[0], -1).T
        else:
            pd = synthetic.dct_patch_dictionary()
        out = denoise_omp(noisy, pd, a.sigma,
                          OmpConfig(C=a.omp_c, lowpass_lambda=a.lowpass))
    else:
        if not a.dict:
            raise UsageError("--dict is required for CSC methods")
        d = _load_dictionary(a.dict)
        kind = Penalty(a.method)
        weighting = a.weighting or "none"
        iters = a.max_iter or (250 if kind is Penalty.L1 else 350)
        admm = AdmmConfig(rho=a.rho, alpha0=a.alpha0, alpha1=a.alpha1,
                          max_iter=iters, eps_rel=a.eps_rel)
        try:
            cfg = DenoiseConfig(penalty=kind, lmbda=a.lmbda, admm=admm,
                                algorithm=a.algorithm,
                                lowpass_lambda=a.lowpass,
                                weighting=weighting,
                                activity_source=a.activity_source)
        except ValueError as e:
            raise UsageError(str(e)) from None
        if grid is not None and ref is not None:
            gs = lambda_grid_search(noisy, ref, d, cfg, grid)
            res, lm = gs.best, gs.best_lambda
        else:
            lm = grid[0] if grid else a.lmbda
            res = denoise_csc(noisy, d, cfg, lm)
        out = res.denoised
        r = admm.resolve(kind, lm)
        row.update(lmbda=lm, rho=float(res.solve.rho[-1]),
                   iterations=res.solve.iterations,
                   functional=res.solve.final_functional)
        if kind is not Penalty.L1:
            row.update(alpha0=r.alpha0, alpha1=r.alpha1)
    if ref is not None:
        row["psnr"] = psnr(ref, out)
    write_image(a.output, out)
    outs = [a.output]
    metrics = a.metrics or _stem(a.output) + ".metrics.csv"
    write_csv(metrics, list(row), [list(row.values())])
    outs.append(metrics)
    # timings live in their own file so the checksummed outputs replay
    wall = time.perf_counter() - t0
    write_csv(_stem(metrics) + ".timings.csv", ["method", "image",
                                                "wall_time"],
              [[row["method"], row["image"], wall]])
    print(f"functional {row['functional']:.10g} psnr {row['psnr']:.4f}")
    _manifest(_stem(a.output) + ".json", "denoise", argv,
              {k: v for k, v in vars(a).items() if k != "func"},
              [p for p in (a.input, a.dict, a.reference) if p], outs,
              {"total": wall})


def _block_svg(path, title, groups):
    series = [(label, rn, er, SCATTER_COLORS[i % len(SCATTER_COLORS)])
              for i, (label, rn, er) in enumerate(groups)]
    with open(path, "w", encoding="utf-8") as f:
        f.write(scatter_svg(series, "reference block norm", "block error",
                            title))


def cmd_benchmark(a, argv):
    from .benchmark import BENCH_METHODS, psnr_table, run_benchmark
    t0 = time.perf_counter()
    methods = a.methods.split(",")
    bad = [m for m in methods if m not in BENCH_METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}; choose from "
                         f"{list(BENCH_METHODS)}")
    names = [os.path.basename(_stem(s)) if not s.startswith("synthetic:")
             else s.split(":", 1)[1] for s in a.images]
    if len(set(names)) != len(names):
        raise UsageError("image names must be distinct")
    images = {n: _load_image(s, a.size) for n, s in zip(names, a.images)}
    d = _load_dictionary(a.dict)
    os.makedirs(a.out_dir, exist_ok=True)
    cells = run_benchmark(images, d, methods, a.sigma, a.seed,
                          a.grid_points, (a.block, a.block),
                          workers=a.workers)
    od = a.out_dir
    outs = []

    def p(name):
        outs.append(os.path.join(od, name))
        return outs[-1]

    ms, ims, rows = psnr_table(cells)
    write_csv(p("table.csv"), ["method"] + ims,
              [[m] + r for m, r in zip(ms, rows)])
    write_csv(p("runs.csv"),
              ["method", "image", "lmbda", "rho", "alpha0", "alpha1",
               "iterations", "psnr", "noisy_psnr", "top_decile_error"],
              [[c.method, c.image, c.lmbda, c.rho, c.alpha0, c.alpha1,
                c.iterations, c.psnr, c.noisy_psnr, c.top_decile]
               for c in cells])
    write_csv(p("grid.csv"), ["method", "image", "lmbda", "psnr",
                              "iterations", "functional"],
              [[c.method, c.image, g["lmbda"], g["psnr"], g["iterations"],
                g["functional"]] for c in cells for g in c.grid])
    for c in cells:
        recs = [(r, k, c.ref_norm[r, k], c.error[r, k])
                for r in range(c.ref_norm.shape[0])
                for k in range(c.ref_norm.shape[1])]
        write_csv(p(f"blockerr_{c.image}_{c.method}.csv"),
                  ["row", "col", "ref_norm", "error"], recs)
        write_pgm(p(f"denoised_{c.image}_{c.method}.pgm"), c.denoised)
    for im in ims:
        _block_svg(p(f"blockerr_{im}.svg"), f"block error: {im}",
                   [(c.method, c.ref_norm, c.error)
                    for c in cells if c.image == im])
    timings = os.path.join(od, "timings.csv")
    write_csv(timings, ["method", "image", "wall_time"],
              [[c.method, c.image, c.wall_time] for c in cells])
    _manifest(os.path.join(od, "manifest.json"), "benchmark", argv,
              {k: v for k, v in vars(a).items() if k != "func"},
              list(a.images) + [a.dict], outs,
              {"total": time.perf_counter() - t0,
               "cells": {f"{c.method}/{c.image}": c.wall_time
                         for c in cells}})
    w = max(len(m) for m in ms + ["method"])
    print("method".ljust(w) + "".join(f"{i:>12}" for i in ims))
    for m, r in zip(ms, rows):
        print(m.ljust(w) + "".join(f"{v:12.2f}" for v in r))


def cmd_blockerr(a, argv):
    t0 = time.perf_counter()
    ref = _load_image(a.reference, a.size)
    tests = [_load_image(t, a.size) for t in a.tests]
    ref_hp = tikhonov_lowpass(ref, a.lowpass)[1]
    rows, groups = [], []
    for path, t in zip(a.tests, tests):
        label = os.path.basename(path)
        recs = block_error_scatter(ref_hp, tikhonov_lowpass(t, a.lowpass)[1],
                                   (a.block, a.block), label)
        rows += [(r.method, r.row, r.col, r.ref_norm, r.error) for r in recs]
        rn = np.array([r.ref_norm for r in recs])
        er = np.array([r.error for r in recs])
        groups.append((label, rn, er))
        print(f"{label} top_decile_error {top_decile_error(rn, er):.6g}")
    write_csv(a.output, ["method", "row", "col", "ref_norm", "error"], rows)
    outs = [a.output]
    if a.svg:
        _block_svg(a.svg, "block error", groups)
        outs.append(a.svg)
    _manifest(_stem(a.output) + ".json", "blockerr", argv,
              {"block": a.block, "lowpass": a.lowpass},
              [a.reference] + list(a.tests), outs,
              {"total": time.perf_counter() - t0})


def cmd_dictinfo(a, argv):
    d = _load_dictionary(a.dict)
    f = d.filters
    nrm = np.sqrt(np.sum(f**2, axis=(1, 2)))
    flat = f.reshape(f.shape[0], -1) / nrm[:, None]
    gram = np.abs(flat @ flat.T)
    np.fill_diagonal(gram, 0.0)
    info = {"num_filters": int(f.shape[0]), "filter_h": int(f.shape[1]),
            "filter_w": int(f.shape[2]), "normalized": bool(d.normalized),
            "norm_min": float(nrm.min()), "norm_max": float(nrm.max()),
            "mean_abs_max": float(np.max(np.abs(f.mean(axis=(1, 2))))),
            "coherence": float(gram.max()) if f.shape[0] > 1 else 0.0}
    print(json.dumps(info, indent=2, sort_keys=True))


def cmd_psnr(a, argv):
    ref = _load_image(a.reference, a.size)
    test = _load_image(a.test, a.size)
    print(f"{psnr(ref, test):.6f}")


def cmd_convert(a, argv):
    src = a.input
    is_dict = src.startswith("fixture:") or a.output.lower().endswith(
        ".cdict")
    if is_dict:
        d = _load_dictionary(src)
        if a.normalize and not d.normalized:
            d = Dictionary.from_filters(d.filters)
        write_dictionary(a.output, d)
    else:
        write_image(a.output, _load_image(src, a.size))
    _manifest(_stem(a.output) + ".json", "convert", argv,
              {"size": a.size, "normalize": a.normalize}, [src],
              [a.output], {})


# parser -----------------------------------------------------------------

def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    ap = argparse.ArgumentParser(prog="mixedcsc", description=__doc__,
                                 formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_,
                           formatter_class=fmt)
        p.set_defaults(func=func)
        p.add_argument("--size", type=_int, default=64,
                       help="side length for synthetic: images")
        return p

    p = add("addnoise", cmd_addnoise, "add white Gaussian noise")
    p.add_argument("input")
    p.add_argument("output", help=".pgm for 8-bit, otherwise CIMG1")
    p.add_argument("--sigma", type=_float, default=0.05)
    p.add_argument("--seed", type=_int, default=1)

    p = add("denoise", cmd_denoise, "denoise one image")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--dict", help="CDICT1 file or fixture:<name>")
    p.add_argument("--method", choices=["l1", "l1inf", "l12", "omp"],
                   default="l1")
    p.add_argument("--weighting", choices=WEIGHTING_MODES, default=None)
    p.add_argument("--activity-source", choices=["analysis", "image_energy"],
                   default="analysis")
    p.add_argument("--algorithm", choices=["nonneg", "nested"],
                   default="nonneg")
    p.add_argument("--lmbda", type=_float, default=0.1)
    p.add_argument("--grid", help="lo:hi:num (log-spaced) or a comma list")
    p.add_argument("--reference", help="clean image for PSNR / grid search")
    p.add_argument("--lowpass", type=_float, default=2.0,
                   help="Tikhonov lowpass regularization")
    p.add_argument("--max-iter", type=_int, default=None,
                   help="250 for l1, 350 for mixed norms")
    p.add_argument("--eps-rel", type=_float, default=None,
                   help="relative stopping tolerance; none runs max-iter")
    p.add_argument("--rho", type=_float, default=None,
                   help="l1: 50*lmbda+1, l1inf: 0.05*lmbda, l12: 3*lmbda")
    p.add_argument("--alpha0", type=_float, default=None,
                   help="l1inf: 0.06, l12: 0.03")
    p.add_argument("--alpha1", type=_float, default=None,
                   help="1/alpha0")
    p.add_argument("--sigma", type=_float, default=0.05,
                   help="noise level for omp")
    p.add_argument("--omp-c", type=_float, default=1.15)
    p.add_argument("--patch-dict", help="CDICT1 patch dictionary for omp")
    p.add_argument("--metrics", help="metrics CSV path")

    p = add("benchmark", cmd_benchmark, "methods x images PSNR table")
    p.add_argument("images", nargs="+")
    p.add_argument("--dict", default="fixture:gabor")
    p.add_argument("--methods", default="l1,l1-w,l12,l12-w,l1inf,l1inf-w")
    p.add_argument("--sigma", type=_float, default=0.05)
    p.add_argument("--seed", type=_int, default=1)
    p.add_argument("--grid-points", type=_int, default=8)
    p.add_argument("--block", type=_int, default=8)
    p.add_argument("--workers", type=_int, default=None,
                   help="images in parallel; defaults to CSC_THREADS")
    p.add_argument("-o", "--out-dir", required=True)

    p = add("blockerr", cmd_blockerr, "block error scatter data")
    p.add_argument("reference")
    p.add_argument("tests", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--svg")
    p.add_argument("--block", type=_int, default=8)
    p.add_argument("--lowpass", type=_float, default=2.0,
                   help="Tikhonov lowpass regularization")

    p = add("dictinfo", cmd_dictinfo, "summarize a dictionary")
    p.add_argument("dict")

    p = add("psnr", cmd_psnr, "PSNR of test against reference")
    p.add_argument("reference")
    p.add_argument("test")

    p = add("convert", cmd_convert, "convert images or dictionaries")
    p.add_argument("input", help="file, synthetic:<name> or fixture:<name>")
    p.add_argument("output", help=".pgm, .cdict or CIMG1 otherwise")
    p.add_argument("--normalize", action="store_true")
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        a.func(a, argv)
    except UsageError as e:
        ap.exit(EXIT_USAGE, f"mixedcsc {a.command}: error: {e}\n")
    except (FormatError, DimensionError, OSError) as e:
        ap.exit(EXIT_DATA, f"mixedcsc {a.command}: data error: {e}\n")
    except ValueError as e:
        ap.exit(EXIT_USAGE, f"mixedcsc {a.command}: error: {e}\n")
    except (SolverError, ConditioningError, FloatingPointError) as e:
        ap.exit(EXIT_SOLVER, f"mixedcsc {a.command}: solver failure: {e}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
