"""DRSF field dumps.

Layout::

    DRSF 1
    M: 3
    Q: 2
    counts: 64,64
    periods: 6.283185307179586,6.283185307179586
    origin: 0,0
    t: 0
    lambda1: 0          (optional)
    <extra key: value lines>
    <blank line>
    <payload>

The payload is little-endian binary64, interleaved (re, im), row-major over
the grid axes and then (alpha, beta).  Floats in the header are written
with 17 significant digits so they read back exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .core import ModelSpec, SpatialGrid
from .errors import FormatError, IoError

MAGIC = "DRSF 1"
_DTYPE = np.dtype("<c16")
_CORE = ("M", "Q", "counts", "periods", "origin", "t")


@dataclass
class FieldDump:
    M: int
    Q: int
    counts: tuple
    periods: tuple
    origin: tuple
    t: float
    lambda1: float | None = None
    extra: dict = field(default_factory=dict)
    values: np.ndarray | None = None
    payload_offset: int = 0

    @property
    def shape(self) -> tuple:
        return tuple(self.counts) + (self.Q, self.Q)

    @property
    def grid(self) -> SpatialGrid:
        return SpatialGrid(tuple(self.counts), tuple(self.periods), tuple(self.origin), self.t)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _csv(xs) -> str:
    return ",".join(_fmt(x) for x in xs)


def model_header(m: ModelSpec) -> dict:
    """Header entries that let a dump be checked without its config."""
    out = {"model.variant": m.variant}
    for n in range(2, m.M + 1):
        out[f"model.B.{n}"] = _csv(m.Bn(n))
        out[f"model.S.{n}"] = _csv(m.S[n - 1].ravel())
    return out


def model_from_header(dump: FieldDump) -> ModelSpec | None:
    ex = dump.extra
    if f"model.B.{dump.M}" not in ex:
        return None
    try:
        B = [[float(v) for v in ex[f"model.B.{n}"].split(",")] for n in range(2, dump.M + 1)]
        S = None
        if f"model.S.{dump.M}" in ex:
            S = [np.reshape([float(v) for v in ex[f"model.S.{n}"].split(",")], (dump.Q, dump.Q))
                 for n in range(2, dump.M + 1)]
        return ModelSpec(dump.M, dump.Q, B, S=S, variant=ex.get("model.variant", "nwave"))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"model entries in header are malformed: {exc}") from None


def dump_field(f: np.ndarray, grid: SpatialGrid, path, M: int | None = None, lambda1: float | None = None,
               extra: dict | None = None) -> str:
    """Write one matrix field; returns the path."""
    f = np.asarray(f)
    Q = f.shape[-1]
    if f.shape != grid.shape + (Q, Q):
        raise FormatError(f"field shape {f.shape} does not match grid {grid.shape} with Q={Q}")
    M = grid.ndim + 1 if M is None else M
    lines = [MAGIC, f"M: {M}", f"Q: {Q}", f"counts: {','.join(str(c) for c in grid.counts)}",
             f"periods: {_csv(grid.periods)}", f"origin: {_csv(grid.origin)}", f"t: {_fmt(grid.t)}"]
    if lambda1 is not None:
        lines.append(f"lambda1: {_fmt(lambda1)}")
    for k, v in (extra or {}).items():
        if ":" in k or "\n" in str(v) or k in _CORE or k == "lambda1":
            raise FormatError(f"bad header entry {k!r}")
        lines.append(f"{k}: {v}")
    head = ("\n".join(lines) + "\n\n").encode("ascii")
    body = np.ascontiguousarray(f, dtype=_DTYPE).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(body)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
    return str(path)


def _parse_header(fh, path) -> FieldDump:
    first = fh.readline()
    if first.rstrip(b"\n").decode("ascii", "replace") != MAGIC:
        raise FormatError(f"{path}: not a DRSF 1 file")
    entries = {}
    while True:
        line = fh.readline()
        if not line:
            raise FormatError(f"{path}: header not terminated by a blank line")
        text = line.rstrip(b"\n").decode("ascii", "replace")
        if text == "":
            break
        if ": " not in text:
            raise FormatError(f"{path}: malformed header line {text!r}")
        k, v = text.split(": ", 1)
        entries[k] = v
    missing = [k for k in _CORE if k not in entries]
    if missing:
        raise FormatError(f"{path}: header lacks {', '.join(missing)}")
    try:
        counts = tuple(int(c) for c in entries.pop("counts").split(","))
        periods = tuple(float(c) for c in entries.pop("periods").split(","))
        origin = tuple(float(c) for c in entries.pop("origin").split(","))
        M, Q, t = int(entries.pop("M")), int(entries.pop("Q")), float(entries.pop("t"))
        lam = float(entries.pop("lambda1")) if "lambda1" in entries else None
    except ValueError as exc:
        raise FormatError(f"{path}: bad header value ({exc})") from None
    if len(counts) != M - 1 or len(periods) != M - 1 or len(origin) != M - 1:
        raise FormatError(f"{path}: axis entries do not match M={M}")
    return FieldDump(M, Q, counts, periods, origin, t, lam, entries, None, fh.tell())


def inspect_field(path) -> FieldDump:
    """Header only; the payload size is checked against the file length but not read."""
    try:
        with open(path, "rb") as fh:
            d = _parse_header(fh, path)
        size = os.path.getsize(path)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    need = int(np.prod(d.counts)) * d.Q * d.Q * _DTYPE.itemsize
    if size - d.payload_offset != need:
        raise FormatError(f"{path}: payload is {size - d.payload_offset} bytes, expected {need}")
    return d


def load_field(path) -> FieldDump:
    try:
        with open(path, "rb") as fh:
            d = _parse_header(fh, path)
            body = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    need = int(np.prod(d.counts)) * d.Q * d.Q * _DTYPE.itemsize
    if len(body) != need:
        raise FormatError(f"{path}: payload is {len(body)} bytes, expected {need}")
    d.values = np.frombuffer(body, dtype=_DTYPE).reshape(d.shape).astype(complex)
    return d
