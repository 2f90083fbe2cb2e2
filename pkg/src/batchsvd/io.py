"""File formats for the benchmark pipeline.

Plain-text matrices ("m p" header then one row per line), plain-text sparse
coefficients ("n p nnz" header then 1-based "row col value" lines sorted by
column then row), 8-bit PGM images (P2 and P5), and deterministic JSON
reports. Floats are written with shortest round-trip formatting so a
save/load cycle is bit-identical.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .coding import SparseCoeff


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


def _fmt(value: float) -> str:
    return repr(float(value))


def load_matrix(path) -> np.ndarray:
    """Read a dense matrix from the plain-text format."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split() if lines else []
    if len(header) != 2:
        raise ParseError(f"{path}: line 1: expected header 'rows cols'")
    try:
        m, p = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError(f"{path}: line 1: non-integer dimensions") from None
    if m < 1 or p < 1:
        raise ParseError(f"{path}: line 1: dimensions must be positive")
    out = np.empty((m, p))
    for i in range(m):
        lineno = i + 2
        if lineno - 1 >= len(lines) or not lines[lineno - 1].strip():
            raise ParseError(
                f"{path}: expected {m} data rows, file ends after line {lineno - 1}"
            )
        tokens = lines[lineno - 1].split()
        if len(tokens) != p:
            raise ParseError(
                f"{path}: line {lineno}: expected {p} entries, found {len(tokens)}"
            )
        for j, tok in enumerate(tokens):
            try:
                val = float(tok)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: bad numeric token {tok!r}"
                ) from None
            if not math.isfinite(val):
                raise ParseError(f"{path}: line {lineno}: non-finite token {tok!r}")
            out[i, j] = val
    return out


def save_matrix(path, M):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {M.shape}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for i in range(M.shape[0]):
            fh.write(" ".join(_fmt(v) for v in M[i, :]))
            fh.write("\n")


def load_sparse(path) -> SparseCoeff:
    """Read a sparse coefficient matrix from the triplet format."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split() if lines else []
    if len(header) != 3:
        raise ParseError(f"{path}: line 1: expected header 'rows cols nnz'")
    try:
        n, p, nnz = (int(t) for t in header)
    except ValueError:
        raise ParseError(f"{path}: line 1: non-integer header") from None
    if n < 1 or p < 1 or nnz < 0:
        raise ParseError(f"{path}: line 1: bad dimensions")
    X = SparseCoeff(n, p)
    for t in range(nnz):
        lineno = t + 2
        if lineno - 1 >= len(lines) or not lines[lineno - 1].strip():
            raise ParseError(
                f"{path}: expected {nnz} entries, file ends after line {lineno - 1}"
            )
        tokens = lines[lineno - 1].split()
        if len(tokens) != 3:
            raise ParseError(f"{path}: line {lineno}: expected 'row col value'")
        try:
            i, j = int(tokens[0]) - 1, int(tokens[1]) - 1
            val = float(tokens[2])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: bad entry tokens") from None
        if not math.isfinite(val):
            raise ParseError(f"{path}: line {lineno}: non-finite value")
        if not (0 <= i < n and 0 <= j < p):
            raise ParseError(f"{path}: line {lineno}: index out of range")
        if X.has(i, j):
            raise ParseError(f"{path}: line {lineno}: duplicate entry ({i + 1}, {j + 1})")
        X.set(i, j, val)
    return X


def save_sparse(path, X: SparseCoeff):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{X.n} {X.p} {X.nnz}\n")
        for i, j, v in X.entries():  # already sorted by (col, row)
            fh.write(f"{i + 1} {j + 1} {_fmt(v)}\n")


def _pgm_tokens(data: bytes):
    """Yield header tokens, honoring '#' comments; report the byte offset."""
    pos = 0
    while pos < len(data):
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
            continue
        if ch == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        yield data[start:pos].decode("ascii", errors="replace"), pos
        pos += 1  # single whitespace after the token


def load_pgm(path):
    """Read an 8-bit PGM (P2 ascii or P5 binary). Returns (pixels, maxval)."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
    except StopIteration:
        raise ParseError(f"{path}: empty file") from None
    if magic not in ("P2", "P5"):
        raise ParseError(f"{path}: not a PGM file (magic {magic!r})")
    try:
        width = int(next(tokens)[0])
        height = int(next(tokens)[0])
        maxval_tok, offset = next(tokens)
        maxval = int(maxval_tok)
    except (StopIteration, ValueError):
        raise ParseError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1:
        raise ParseError(f"{path}: bad PGM dimensions {width}x{height}")
    if not (0 < maxval <= 255):
        raise ParseError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    count = width * height
    if magic == "P5":
        raster = data[offset + 1 : offset + 1 + count]
        if len(raster) < count:
            raise ParseError(f"{path}: truncated P5 raster")
        img = np.frombuffer(raster, dtype=np.uint8, count=count)
    else:
        values = []
        for tok, _ in tokens:
            values.append(tok)
            if len(values) == count:
                break
        if len(values) < count:
            raise ParseError(f"{path}: truncated P2 raster")
        try:
            img = np.asarray([int(t) for t in values], dtype=np.int64)
        except ValueError:
            raise ParseError(f"{path}: bad P2 pixel token") from None
        if img.min() < 0 or img.max() > maxval:
            raise ParseError(f"{path}: pixel value outside [0, {maxval}]")
        img = img.astype(np.uint8)
    return img.reshape(height, width), maxval


def save_pgm(path, pixels, maxval: int = 255, binary: bool = True):
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError("PGM pixels must be a 2-D array")
    if pixels.min() < 0 or pixels.max() > maxval:
        raise ValueError(f"pixel values must lie in [0, {maxval}]")
    if not (0 < maxval <= 255):
        raise ValueError("only 8-bit PGM supported")
    height, width = pixels.shape
    header = f"P5 {width} {height} {maxval}\n" if binary else f"P2\n{width} {height}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(pixels.astype(np.uint8).tobytes())
        else:
            for row in pixels:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))


def write_report_json(path, payload):
    """Serialize a report (dict or list of dicts) with stable byte output."""
    text = json.dumps(payload, sort_keys=True, indent=2)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)
        fh.write("\n")
