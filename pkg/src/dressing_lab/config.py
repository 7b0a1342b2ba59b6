"""Experiment configuration: line-oriented ``key = value`` text.

Keys are dotted, ``#`` starts a comment, blank lines are ignored.  Lists
are comma separated; complex entries use Python syntax (``0.1+0.2j``).

Required keys: ``experiment.kind``, ``model.M``, ``model.Q``, ``model.B.<n>``
for n = 2..M, ``grid.counts`` and ``grid.periods``.  Everything else has a
default, listed in :data:`DEFAULTS`.  ``model.S.<i>`` gives S^i as Q*Q
row-major values; when no S is given the minimum-norm couplings with
S^M = 1 are used.  A comb term j is ``comb.<j>.node`` (M+1 values) plus
``comb.<j>.weight`` (Q*Q values).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .core import ModelSpec, SpatialGrid, build_grid, default_dt, solve_couplings, validate_model
from .errors import IoError, ModelInvalid, ParseError, UnknownKey
from .kernels import DegenerateKernelSpec

KINDS = ("kernel-demo", "nwave-evolve", "nls-evolve", "phi-taylor", "residual-check", "converge-study")
FAMILIES = ("plane-wave", "gaussian-bump", "tanh-kink", "zero")

DEFAULTS = {
    "model.variant": "nwave",
    "model.symmetric": "false",
    "grid.origin": None,
    "init.family": "plane-wave",
    "init.amplitude": "0.1",
    "init.k": None,            # defaults to 1 along every axis
    "init.width": "1.0",
    "init.center": None,       # defaults to the middle of the box
    "init.noise": "0",         # amplitude of seeded smooth noise
    "init.node_scale": "0.1",  # slice k starts as u0 * (1 + node_scale * lambda_1)
    "phi.diag_amplitude": "0.2",
    "run.dt": None,            # defaults to 0.2 h (nwave) or 0.2 h^2 (nls)
    "run.steps": "10",
    "run.scheme": "rk4",
    "run.stencil": "4",
    "run.stride": "0",         # 0 means only the first and last states
    "run.nodes": "0",
    "run.t": "0",
    "run.seed": "0",
    "run.out": "out",
    "run.nonlinear": "true",
    "converge.levels": "3",
    "converge.target": "auto",
    "residual.eq": None,
    "residual.field": None,
    "residual.dfield": None,
}

_PATTERNS = (
    re.compile(r"model\.B\.(\d+)$"),
    re.compile(r"model\.S\.(\d+)$"),
    re.compile(r"comb\.(\d+)\.(node|weight)$"),
)
_REQUIRED = ("experiment.kind", "model.M", "model.Q", "grid.counts", "grid.periods")


@dataclass
class InitSpec:
    family: str = "plane-wave"
    amplitude: float = 0.1
    k: tuple | None = None
    width: float = 1.0
    center: tuple | None = None
    noise: float = 0.0
    node_scale: float = 0.1


@dataclass
class ExperimentSpec:
    kind: str
    model: ModelSpec
    grid: SpatialGrid
    comb: DegenerateKernelSpec | None = None
    init: InitSpec = field(default_factory=InitSpec)
    dt: float = 0.0
    steps: int = 10
    scheme: str = "rk4"
    stencil: int = 4
    stride: int = 0
    nodes: tuple = (0.0,)
    t: float = 0.0
    seed: int = 0
    out: str = "out"
    nonlinear: bool = True
    levels: int = 3
    target: str = "auto"
    residual_eq: str | None = None
    residual_field: str | None = None
    residual_dfield: str | None = None
    phi_diag_amplitude: float = 0.2
    raw: dict = field(default_factory=dict)


def _known(key):
    return key in DEFAULTS or key in _REQUIRED or any(p.match(key) for p in _PATTERNS)


def read_pairs(text: str) -> dict:
    """``{key: (value, line_number)}``; rejects malformed lines, unknown and repeated keys."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=n)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not re.fullmatch(r"[A-Za-z0-9_.\-]+", key):
            raise ParseError(f"malformed key {key!r}", line=n)
        if not _known(key):
            raise UnknownKey(f"unknown key {key!r}", line=n)
        if key in out:
            raise ParseError(f"key {key!r} given twice", line=n)
        out[key] = (value, n)
    return out


def _get(pairs, key):
    if key in pairs:
        return pairs[key]
    return DEFAULTS.get(key), None


def _floats(value, key, line):
    try:
        return tuple(float(v) for v in value.split(","))
    except ValueError:
        raise ParseError(f"{key}: expected numbers, got {value!r}", line=line) from None


def _complexes(value, key, line):
    try:
        return tuple(complex(v.strip().replace(" ", "")) for v in value.split(","))
    except ValueError:
        raise ParseError(f"{key}: expected complex numbers, got {value!r}", line=line) from None


def _int(value, key, line):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ParseError(f"{key}: expected an integer, got {value!r}", line=line) from None


def _float(value, key, line):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(f"{key}: expected a number, got {value!r}", line=line) from None


def _bool(value, key, line):
    v = str(value).lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ParseError(f"{key}: expected true or false, got {value!r}", line=line)


def _model(pairs):
    M = _int(pairs["model.M"][0], "model.M", pairs["model.M"][1])
    Q = _int(pairs["model.Q"][0], "model.Q", pairs["model.Q"][1])
    variant, vline = _get(pairs, "model.variant")
    if variant not in ("nwave", "nls"):
        raise ParseError(f"model.variant must be nwave or nls, got {variant!r}", line=vline)
    sv, sline = _get(pairs, "model.symmetric")
    symmetric = _bool(sv, "model.symmetric", sline)

    B = np.ones((M, Q))
    for n in range(2, M + 1):
        key = f"model.B.{n}"
        if key not in pairs:
            raise ParseError(f"missing required key {key!r}")
        row = _floats(pairs[key][0], key, pairs[key][1])
        if len(row) != Q:
            raise ParseError(f"{key}: expected {Q} values", line=pairs[key][1])
        B[n - 1] = row
    for key, (_, line) in pairs.items():
        m_ = _PATTERNS[0].match(key) or _PATTERNS[1].match(key)
        if m_ and not 2 <= int(m_.group(1)) <= M:
            raise ParseError(f"{key}: index outside 2..{M}", line=line)

    S_keys = [f"model.S.{i}" for i in range(2, M + 1) if f"model.S.{i}" in pairs]
    if S_keys:
        S = np.zeros((M, Q, Q))
        for i in range(2, M + 1):
            key = f"model.S.{i}"
            if key not in pairs:
                continue
            vals = _floats(pairs[key][0], key, pairs[key][1])
            if len(vals) != Q * Q:
                raise ParseError(f"{key}: expected {Q * Q} values", line=pairs[key][1])
            S[i - 1] = np.reshape(vals, (Q, Q))
    elif variant == "nwave":
        S = solve_couplings(B[1:], symmetric=symmetric)
    else:
        S = None
    try:
        return ModelSpec(M, Q, B, S=S, variant=variant, symmetric=symmetric)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _comb(pairs, m):
    idx = sorted({int(k.split(".")[1]) for k in pairs if k.startswith("comb.")})
    if not idx:
        return None
    nodes, weights = [], []
    for j in idx:
        for part in ("node", "weight"):
            if f"comb.{j}.{part}" not in pairs:
                raise ParseError(f"missing required key 'comb.{j}.{part}'")
        v, line = pairs[f"comb.{j}.node"]
        node = _complexes(v, f"comb.{j}.node", line)
        if len(node) != m.M + 1:
            raise ParseError(f"comb.{j}.node: expected {m.M + 1} values", line=line)
        v, line = pairs[f"comb.{j}.weight"]
        w = _complexes(v, f"comb.{j}.weight", line)
        if len(w) != m.Q * m.Q:
            raise ParseError(f"comb.{j}.weight: expected {m.Q * m.Q} values", line=line)
        nodes.append(node)
        weights.append(np.reshape(w, (m.Q, m.Q)))
    return DegenerateKernelSpec(np.array(nodes), np.array(weights))


def parse_config(text: str) -> ExperimentSpec:
    """Parse and validate a config; raises ParseError, UnknownKey or ModelInvalid."""
    pairs = read_pairs(text)
    for key in _REQUIRED:
        if key not in pairs:
            raise ParseError(f"missing required key {key!r}")
    kind, kline = pairs["experiment.kind"]
    if kind not in KINDS:
        raise ParseError(f"experiment.kind must be one of {', '.join(KINDS)}", line=kline)

    m = _model(pairs)
    report = validate_model(m, evolvable=kind in ("nwave-evolve", "phi-taylor"))
    if not report.ok:
        raise ModelInvalid(report)

    counts = tuple(_int(c, "grid.counts", pairs["grid.counts"][1]) for c in pairs["grid.counts"][0].split(","))
    periods = _floats(pairs["grid.periods"][0], "grid.periods", pairs["grid.periods"][1])
    if len(counts) != m.M - 1:
        raise ParseError(f"grid.counts needs M-1 = {m.M - 1} entries", line=pairs["grid.counts"][1])
    origin_v, oline = _get(pairs, "grid.origin")
    origin = _floats(origin_v, "grid.origin", oline) if origin_v is not None else None
    try:
        grid = build_grid(periods, counts, origin)
    except ValueError as exc:
        raise ParseError(str(exc), line=pairs["grid.counts"][1]) from None

    def val(key, conv):
        v, line = _get(pairs, key)
        return None if v is None else conv(v, key, line)

    init = InitSpec(
        family=val("init.family", lambda v, k, l: v),
        amplitude=val("init.amplitude", _float),
        k=val("init.k", _floats),
        width=val("init.width", _float),
        center=val("init.center", _floats),
        noise=val("init.noise", _float),
        node_scale=val("init.node_scale", _float),
    )
    if init.family not in FAMILIES:
        raise ParseError(f"init.family must be one of {', '.join(FAMILIES)}", line=_get(pairs, "init.family")[1])
    for name in ("k", "center"):
        v = getattr(init, name)
        if v is not None and len(v) != grid.ndim:
            raise ParseError(f"init.{name} needs {grid.ndim} entries", line=pairs[f"init.{name}"][1])

    dt = val("run.dt", _float)
    if dt is None:
        dt = default_dt(grid, m.variant)
    elif not dt > 0:
        raise ParseError("run.dt must be positive", line=pairs["run.dt"][1])
    scheme = val("run.scheme", lambda v, k, l: v)
    if scheme not in ("euler", "rk4"):
        raise ParseError("run.scheme must be euler or rk4", line=_get(pairs, "run.scheme")[1])
    stencil = val("run.stencil", _int)
    if stencil not in (2, 4):
        raise ParseError("run.stencil must be 2 or 4", line=_get(pairs, "run.stencil")[1])
    nodes = tuple(sorted(val("run.nodes", _floats)))
    if 0.0 not in nodes or len(set(nodes)) != len(nodes):
        raise ParseError("run.nodes must contain 0 and no repeats", line=_get(pairs, "run.nodes")[1])
    steps = val("run.steps", _int)
    stride = val("run.stride", _int)
    levels = val("converge.levels", _int)
    if steps < 0 or stride < 0:
        raise ParseError("run.steps and run.stride must be non-negative")
    if levels < 2:
        raise ParseError("converge.levels must be at least 2", line=_get(pairs, "converge.levels")[1])

    spec = ExperimentSpec(
        kind=kind, model=m, grid=grid, comb=_comb(pairs, m), init=init, dt=dt, steps=steps,
        scheme=scheme, stencil=stencil, stride=stride, nodes=nodes, t=val("run.t", _float),
        seed=val("run.seed", _int), out=val("run.out", lambda v, k, l: v),
        nonlinear=val("run.nonlinear", _bool), levels=levels,
        target=val("converge.target", lambda v, k, l: v),
        residual_eq=val("residual.eq", lambda v, k, l: v),
        residual_field=val("residual.field", lambda v, k, l: v),
        residual_dfield=val("residual.dfield", lambda v, k, l: v),
        phi_diag_amplitude=val("phi.diag_amplitude", _float),
        raw={k: v for k, (v, _) in pairs.items()},
    )
    if kind == "kernel-demo" and spec.comb is None:
        raise ParseError("kernel-demo needs at least one comb term (comb.0.node, comb.0.weight)")
    if kind == "nls-evolve" and m.variant != "nls":
        raise ParseError("nls-evolve needs model.variant = nls")
    if kind in ("nwave-evolve", "phi-taylor") and m.variant != "nwave":
        raise ParseError(f"{kind} needs model.variant = nwave")
    if kind == "residual-check" and spec.residual_eq is None:
        raise ParseError("residual-check needs residual.eq")
    if spec.target not in ("auto", "direct", "kernel"):
        raise ParseError("converge.target must be auto, direct or kernel")
    return spec


def load_config(path) -> ExperimentSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
