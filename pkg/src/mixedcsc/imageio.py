"""File formats: CDICT1 dictionaries, CIMG1 float images, PGM, CSV, SVG.

CDICT1 layout (little-endian)::

    b"CDICT1\\0\\0" | u32 h | u32 w | u32 M | u32 flags | M*h*w float64

Filters are stored one after another, each row-major; bit 0 of `flags`
marks the filters as unit-norm. CIMG1 is ``b"CIMG1\\0\\0\\0" | u32 h |
u32 w | h*w float64``, row-major.
"""

import csv
import io
import math
import os
import struct

import numpy as np

from .exceptions import FormatError
from .signal import Dictionary, as_image

__all__ = ["CDICT_MAGIC", "CIMG_MAGIC", "write_dictionary", "read_dictionary",
           "write_cimg", "read_cimg", "write_pgm", "read_pgm", "read_image",
           "write_image", "write_csv", "scatter_svg"]

CDICT_MAGIC = b"CDICT1\0\0"
CIMG_MAGIC = b"CIMG1\0\0\0"
_F64 = np.dtype("<f8")


def _read(path):
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e.strerror}") from e


def _write(path, data):
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise FormatError(f"cannot write {path}: {e.strerror}") from e


def _payload(buf, offset, count, path):
    need = offset + 8 * count
    if len(buf) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(buf)}")
    a = np.frombuffer(buf, _F64, count, offset).astype(np.float64)
    if not np.all(np.isfinite(a)):
        raise FormatError(f"{path}: non-finite values")
    return a


def write_dictionary(path, d):
    """Write a :class:`Dictionary` as CDICT1."""
    f = np.ascontiguousarray(d.filters, dtype=_F64)
    M, h, w = f.shape
    head = CDICT_MAGIC + struct.pack("<4I", h, w, M, int(bool(d.normalized)))
    _write(path, head + f.tobytes())


def read_dictionary(path):
    """Read a CDICT1 file.

    Filters flagged as normalized must have unit norm to within 1e-8.
    """
    buf = _read(path)
    if len(buf) < 24 or buf[:8] != CDICT_MAGIC:
        raise FormatError(f"{path}: not a CDICT1 file")
    h, w, M, flags = struct.unpack_from("<4I", buf, 8)
    if min(h, w, M) == 0:
        raise FormatError(f"{path}: empty dictionary ({h}x{w}x{M})")
    f = _payload(buf, 24, h * w * M, path).reshape(M, h, w)
    try:
        return Dictionary(f, normalized=bool(flags & 1))
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e


def write_cimg(path, img):
    a = np.ascontiguousarray(as_image(img), dtype=_F64)
    _write(path, CIMG_MAGIC + struct.pack("<2I", *a.shape) + a.tobytes())


def read_cimg(path):
    buf = _read(path)
    if len(buf) < 16 or buf[:8] != CIMG_MAGIC:
        raise FormatError(f"{path}: not a CIMG1 file")
    h, w = struct.unpack_from("<2I", buf, 8)
    if h == 0 or w == 0:
        raise FormatError(f"{path}: empty image")
    return _payload(buf, 16, h * w, path).reshape(h, w)


def write_pgm(path, img):
    """Binary 8-bit PGM; values are clipped to [0, 1] and rounded."""
    a = as_image(img)
    q = np.rint(np.clip(a, 0.0, 1.0) * 255).astype(np.uint8)
    head = b"P5\n%d %d\n255\n" % (a.shape[1], a.shape[0])
    _write(path, head + q.tobytes())


def _pgm_tokens(buf, n):
    toks, i = [], 2
    while len(toks) < n:
        while i < len(buf) and buf[i:i + 1].isspace():
            i += 1
        if buf[i:i + 1] == b"#":
            while i < len(buf) and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(buf) and not buf[j:j + 1].isspace():
            j += 1
        if j == i:
            raise FormatError("truncated PGM header")
        toks.append(buf[i:j])
        i = j
    return toks, i + 1


def read_pgm(path):
    """Read a P5 PGM with maxval 255 as floats in [0, 1]."""
    buf = _read(path)
    if buf[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    try:
        toks, off = _pgm_tokens(buf, 3)
        w, h, maxval = (int(t) for t in toks)
    except (FormatError, ValueError) as e:
        raise FormatError(f"{path}: bad PGM header") from e
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM supported")
    if len(buf) - off != h * w:
        raise FormatError(f"{path}: expected {h * w} pixels")
    return np.frombuffer(buf, np.uint8, h * w, off).reshape(h, w) / 255.0


def read_image(path):
    """Dispatch on content: CIMG1 or PGM."""
    head = _read(path)[:8]
    if head == CIMG_MAGIC:
        return read_cimg(path)
    if head[:2] == b"P5":
        return read_pgm(path)
    raise FormatError(f"{path}: unrecognized image format")


def write_image(path, img):
    """``.pgm`` paths get PGM, anything else CIMG1."""
    if os.fspath(path).lower().endswith(".pgm"):
        write_pgm(path, img)
    else:
        write_cimg(path, img)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return v


def write_csv(path, header, rows):
    """RFC-4180 CSV with CRLF line ends; floats use shortest round-trip."""
    s = io.StringIO()
    wr = csv.writer(s, lineterminator="\r\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_cell(v) for v in r])
    _write(path, s.getvalue().encode("utf-8"))


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def scatter_svg(series, xlabel="", ylabel="", title="", size=(480, 360),
                max_points=4000):
    """Minimal SVG 1.1 scatter plot.

    Parameters
    ----------
    series : list of (label, x, y, color)
    max_points : int
        Each series is thinned to at most this many points by a fixed
        stride, so output is deterministic.

    Returns
    -------
    str
    """
    W, H = size
    ml, mr, mt, mb = 56, 16, 28, 44
    pw, ph = W - ml - mr, H - mt - mb
    xs = np.concatenate([np.ravel(s[1]) for s in series] or [np.zeros(1)])
    ys = np.concatenate([np.ravel(s[2]) for s in series] or [np.zeros(1)])
    x0, x1 = 0.0, float(xs.max()) if xs.size and xs.max() > 0 else 1.0
    y0, y1 = 0.0, float(ys.max()) if ys.size and ys.max() > 0 else 1.0

    def px(v):
        return ml + pw * (v - x0) / (x1 - x0)

    def py(v):
        return mt + ph * (1 - (v - y0) / (y1 - y0))

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
           f'width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
           f'stroke="black"/>']
    for v in _ticks(x0, x1):
        out.append(f'<text x="{px(v):.2f}" y="{mt + ph + 16}" font-size="10"'
                   f' text-anchor="middle">{v:.3g}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<text x="{ml - 4}" y="{py(v) + 3:.2f}" font-size="10" '
                   f'text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{H - 8}" font-size="12" '
               f'text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="14" y="{mt + ph / 2:.1f}" font-size="12" '
               f'text-anchor="middle" transform="rotate(-90 14 '
               f'{mt + ph / 2:.1f})">{_esc(ylabel)}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="18" font-size="13" '
               f'text-anchor="middle">{_esc(title)}</text>')
    for k, (label, x, y, color) in enumerate(series):
        x, y = np.ravel(x), np.ravel(y)
        step = max(1, -(-x.size // max_points))
        out.append(f'<g fill="{color}" fill-opacity="0.5">')
        for a, b in zip(x[::step], y[::step]):
            out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="1.5"/>')
        out.append("</g>")
        ly = mt + 14 + 14 * k
        out.append(f'<circle cx="{ml + 10}" cy="{ly - 4}" r="4" '
                   f'fill="{color}"/>')
        out.append(f'<text x="{ml + 18}" y="{ly}" font-size="11">'
                   f'{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return (str(s).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))
