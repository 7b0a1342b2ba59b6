"""Experiment orchestration: initial data, runs, reports and manifests.

A run writes into its output directory::

    config.cfg          the parsed config, normalized
    fields/*.drsf       field dumps
    reports/*.tsv       residual and diagnostic tables
    manifest.tsv        status plus sha256 and size of every file above
    manifest.times      wall-clock timestamps (kept out of the manifest so
                        identical runs give byte-identical manifests)
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import errors as E
from .config import ExperimentSpec, InitSpec
from .core import ResidualReport, SpatialGrid, SpectralFamily, build_grid, fd_sampled, make_report, offdiag
from .fieldio import dump_field, load_field, model_from_header, model_header
from .kernels import reconstruct_u_classical
from .nls import NlsState, evolve_nls
from .nwave import NwaveState, conjugation_drift, evolve_nwave, make_phi_state, reconstruct_u, taylor_step_phi
from .oracles import (
    convergence_order,
    ds_rate,
    integrate_direct,
    nl_pointwise,
    nl_rate,
    nwave_classical_pointwise,
    residual,
)

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

_VALIDATION = (E.ParseError, E.ModelInvalid, E.NoNonzeroSolution, E.NonEvolvable, E.VariantMismatch,
               E.MissingDerivative, E.MissingProfile, E.MissingTimeDerivative, E.NonPositivePeriod,
               E.TooFewNodes, E.AxisOutOfRange)
_IO = (E.IoError, E.FormatError, OSError)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, _VALIDATION):
        return EXIT_VALIDATION
    if isinstance(exc, _IO):
        return EXIT_IO
    return EXIT_SOLVER


# ---------------------------------------------------------------------------
# initial data


def _profile(init: InitSpec, grid: SpatialGrid, shift: float):
    """Scalar periodic profile; ``k`` and phases are in units of 2 pi / period."""
    th = [2 * np.pi * (x - o) / L for x, o, L in zip(grid.mesh(), grid.origin, grid.periods)]
    k = init.k or (1.0,) * grid.ndim
    c = init.center or tuple(0.5 * L for L in grid.periods)
    tc = [2 * np.pi * ci / L for ci, L in zip(c, grid.periods)]
    if init.family == "plane-wave":
        return np.exp(1j * (sum(ki * t for ki, t in zip(k, th)) + shift))
    if init.family == "gaussian-bump":
        w2 = init.width ** 2
        return np.exp(sum((np.cos(t - t0) - 1.0) / w2 for t, t0 in zip(th, tc)) + 1j * shift)
    if init.family == "tanh-kink":
        kink = np.tanh(np.sin(k[0] * (th[0] - tc[0])) / init.width)
        return kink * np.exp(1j * (sum(ki * t for ki, t in zip(k[1:], th[1:])) + shift))
    return np.zeros(grid.shape, dtype=complex)


def _noise(grid: SpatialGrid, rng, modes: int = 2):
    th = [2 * np.pi * (x - o) / L for x, o, L in zip(grid.mesh(), grid.origin, grid.periods)]
    out = np.zeros(grid.shape, dtype=complex)
    for ks in np.ndindex(*(2 * modes + 1,) * grid.ndim):
        kv = [k - modes for k in ks]
        c = rng.normal() + 1j * rng.normal()
        out += c * np.exp(1j * sum(k * t for k, t in zip(kv, th))) / (1.0 + sum(k * k for k in kv))
    return out / (2 * modes + 1) ** grid.ndim


def initial_field(init: InitSpec, grid: SpatialGrid, Q: int, seed: int = 0) -> np.ndarray:
    """Off-diagonal field with u_ba = conj(u_ab); the pair (a, b) gets phase 0.7 (a + 2 b)."""
    rng = np.random.default_rng(seed)
    u = np.zeros(grid.shape + (Q, Q), dtype=complex)
    for a in range(Q):
        for b in range(a + 1, Q):
            f = init.amplitude * _profile(init, grid, 0.7 * (a + 2 * b))
            if init.noise:
                f = f + init.noise * _noise(grid, rng)
            u[..., a, b] = f
            u[..., b, a] = np.conj(f)
    return u


# ---------------------------------------------------------------------------
# output helpers


class _Out:
    def __init__(self, root):
        self.root = Path(root)
        self.files = []

    def path(self, rel):
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        if rel not in self.files:
            self.files.append(rel)
        return p

    def text(self, rel, content):
        try:
            with open(self.path(rel), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(content)
        except OSError as exc:
            raise E.IoError(f"cannot write {rel}: {exc}") from None

    def field(self, rel, f, grid, M, lambda1=None, extra=None):
        dump_field(f, grid, self.path(rel), M=M, lambda1=lambda1, extra=extra)


def reports_tsv(reports) -> str:
    return "\n".join([ResidualReport.HEADER] + [r.tsv() for r in reports]) + "\n"


def _note(rep: ResidualReport, extra: str) -> ResidualReport:
    rep.notes = f"{rep.notes};{extra}" if rep.notes else extra
    return rep


def _record_steps(steps, stride):
    return max(steps, 1) if stride == 0 else stride


# ---------------------------------------------------------------------------
# experiment kinds


def _kernel_demo(spec: ExperimentSpec, out: _Out, seed, threads):
    m, grid = spec.model, spec.grid.at(spec.t)
    pts = grid.points(spec.t)
    u, du = reconstruct_u_classical(spec.comb, m, pts, derivatives=True)
    hdr = model_header(m)
    out.field("fields/u.drsf", u, grid, m.M, extra=hdr)
    out.field("fields/u_t.drsf", du[m.M - 1], grid, m.M, extra=hdr)
    reps = []
    h = min(grid.spacing)
    dfd = [fd_sampled(lambda x: reconstruct_u_classical(spec.comb, m, x), pts, a, h, spec.stencil)
           for a in range(m.M)]
    if m.M == 3:
        reps.append(_note(make_report("nwave-classical", nwave_classical_pointwise(u, du[0], du[1], du[2], m),
                                      grid, stencil=None), "derivatives=analytic"))
        reps.append(_note(make_report("nwave-classical", nwave_classical_pointwise(u, *dfd, m), grid,
                                      stencil=spec.stencil), f"derivatives=fd-sampled;h={h:.17g}"))
    reps.append(_note(make_report("nl", nl_pointwise(u, list(du), m), grid), "derivatives=analytic"))
    reps.append(_note(make_report("nl", nl_pointwise(u, dfd, m), grid, stencil=spec.stencil),
                      f"derivatives=fd-sampled;h={h:.17g}"))
    out.text("reports/residuals.tsv", reports_tsv(reps))


def _family(spec, u0):
    vals = np.stack([u0 * (1.0 + spec.init.node_scale * lam) for lam in spec.nodes])
    return SpectralFamily(np.array(spec.nodes), vals, spec.grid)


def _nwave_evolve(spec: ExperimentSpec, out: _Out, seed, threads):
    m, grid = spec.model, spec.grid
    u0 = initial_field(spec.init, grid, m.Q, seed)
    st = NwaveState(_family(spec, u0), 0.0, m)
    traj = evolve_nwave(st, grid, spec.dt, spec.steps, spec.scheme,
                        _record_steps(spec.steps, spec.stride), spec.stencil)
    hdr = model_header(m)
    reps = []
    for n, s in enumerate(traj):
        g = grid.at(s.t)
        for k, lam in enumerate(s.uhat.nodes):
            out.field(f"fields/uhat_{n:04d}_{k:02d}.drsf", s.uhat.values[k], g, m.M, lambda1=lam, extra=hdr)
        u = offdiag(s.uhat.at_zero())
        rep = residual("nl", {"u": u, "u_t": nl_rate(u, m, grid, spec.stencil)}, m, grid, spec.stencil, "rhs")
        rep.dt = spec.dt
        reps.append(_note(rep, f"t={s.t:.17g};conj-drift={conjugation_drift(u):.3e}"))
    out.text("reports/residuals.tsv", reports_tsv(reps))


def _slice_norms(values, cell_volume):
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=tuple(range(1, values.ndim))) * cell_volume)


def _nls_evolve(spec: ExperimentSpec, out: _Out, seed, threads):
    m, grid = spec.model, spec.grid
    u0 = initial_field(spec.init, grid, m.Q, seed)
    st = NlsState(_family(spec, u0), 0.0, m)
    traj = evolve_nls(st, grid, spec.dt, spec.steps, spec.scheme,
                      _record_steps(spec.steps, spec.stride), spec.stencil, spec.nonlinear)
    hdr = model_header(m)
    reps = []
    norms = ["# t\tlambda1\tL2"]
    for n, s in enumerate(traj):
        g = grid.at(s.t)
        for k, lam in enumerate(s.uhat.nodes):
            out.field(f"fields/uhat_{n:04d}_{k:02d}.drsf", s.uhat.values[k], g, m.M, lambda1=lam, extra=hdr)
        for lam, nv in zip(s.uhat.nodes, _slice_norms(s.uhat.values, grid.cell_volume)):
            norms.append(f"{s.t:.17g}\t{lam:.17g}\t{nv:.17g}")
        if spec.nonlinear:
            u = offdiag(s.uhat.at_zero())
            rep = residual("ds", {"u": u, "u_t": ds_rate(u, m, grid, spec.stencil)}, m, grid,
                           spec.stencil, "rhs")
            rep.dt = spec.dt
            reps.append(_note(rep, f"t={s.t:.17g}"))
    out.text("reports/residuals.tsv", reports_tsv(reps))
    out.text("reports/norms.tsv", "\n".join(norms) + "\n")


def diag_profiles(m, nodes, amplitude):
    """phi_aa(lam1) = amplitude * sin(s + a + lam1 / 2), s = x_1 + sum_i B^i_a x_i."""
    return {(a, float(lam)): (lambda s, a=a, lam=lam: amplitude * np.sin(s + a + 0.5 * lam))
            for a in range(m.Q) for lam in nodes}


def _phi_taylor(spec: ExperimentSpec, out: _Out, seed, threads):
    grid = spec.grid
    m = dataclasses.replace(spec.model, diag_profiles=diag_profiles(spec.model, spec.nodes,
                                                                     spec.phi_diag_amplitude))
    u_of = initial_field(spec.init, grid, m.Q, seed)
    of = np.stack([u_of * (1.0 + spec.init.node_scale * lam) for lam in spec.nodes])
    st = make_phi_state(m, grid, spec.nodes, of, 0.0)
    stride = _record_steps(spec.steps, spec.stride)
    us, ts = [reconstruct_u(st, spec.stencil)], [0.0]
    for n in range(1, spec.steps + 1):
        st = taylor_step_phi(st, spec.dt, spec.stencil)
        us.append(reconstruct_u(st, spec.stencil))
        ts.append(st.t)
    hdr = model_header(m)
    reps = []
    for n in range(0, spec.steps + 1):
        if n % stride and n != spec.steps:
            continue
        out.field(f"fields/u_{n:04d}.drsf", us[n], grid.at(ts[n]), m.M, extra=hdr)
        if 0 < n < spec.steps:
            ut = (us[n + 1] - us[n - 1]) / (ts[n + 1] - ts[n - 1])
            rep = residual("nl", {"u": us[n], "u_t": ut}, m, grid, spec.stencil, "central")
            rep.dt = spec.dt
            reps.append(_note(rep, f"t={ts[n]:.17g}"))
    ref = integrate_direct("nl", us[0], m, grid, spec.dt, max(spec.steps, 1), "rk4",
                           max(spec.steps, 1), spec.stencil)
    if spec.steps:
        diff = offdiag(us[-1]) - ref.states[-1]
        reps.append(make_report("taylor-vs-direct", diff, grid, dt=spec.dt, stencil=spec.stencil,
                                notes=f"t={ts[-1]:.17g};reference=rk4"))
    out.text("reports/residuals.tsv", reports_tsv(reps))


def _residual_check(spec: ExperimentSpec, out: _Out, seed, threads):
    eq = spec.residual_eq
    m, grid = spec.model, spec.grid
    if spec.residual_field:
        d = load_field(spec.residual_field)
        u, grid = d.values, d.grid
        m = model_from_header(d) or m
    else:
        u = initial_field(spec.init, grid, m.Q, seed)
    fields = {"u": u}
    source = "supplied"
    if spec.residual_dfield:
        fields["u_t"] = load_field(spec.residual_dfield).values
    elif eq == "nl":
        fields["u_t"], source = nl_rate(u, m, grid, spec.stencil), "rhs"
    elif eq == "ds":
        fields["u_t"], source = ds_rate(u, m, grid, spec.stencil), "rhs"
    reps = residual(eq, fields, m, grid, spec.stencil, source)
    reps = list(reps) if isinstance(reps, tuple) else [reps]
    out.text("reports/residuals.tsv", reports_tsv(reps))


def _converge_kernel(spec, level_grids, threads):
    m = spec.model
    base = spec.grid.at(spec.t)
    pts = base.points(spec.t)

    def f(x):
        return reconstruct_u_classical(spec.comb, m, x)

    u, du = reconstruct_u_classical(spec.comb, m, pts, derivatives=True)

    def one(g):
        h = min(g.spacing)
        d = [fd_sampled(f, pts, a, h, spec.stencil) for a in range(m.M)]
        r = nwave_classical_pointwise(u, *d, m) if m.M == 3 else nl_pointwise(u, d, m)
        return make_report("nwave-classical" if m.M == 3 else "nl", r, base).linf, h, None

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(one, level_grids))


def _converge_direct(spec, level_grids, threads):
    m = spec.model
    eq = "ds" if m.variant == "nls" else "nl"
    T = spec.dt * spec.steps
    base = spec.grid

    def one(k_g):
        k, g = k_g
        fine = 2 ** k
        steps = spec.steps * (fine ** 2 if eq == "ds" else fine)
        dt = T / steps
        u0 = initial_field(spec.init, g, m.Q, spec.seed)
        tr = integrate_direct(eq, u0, m, g, dt, steps, spec.scheme, steps, spec.stencil, spec.nonlinear)
        sub = (slice(None, None, fine),) * base.ndim
        return tr.states[-1][sub], min(g.spacing), dt

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        res = list(pool.map(one, enumerate(level_grids)))
    rows = []
    for k in range(len(res)):
        if k + 1 < len(res):
            err = make_report(eq, res[k][0] - res[k + 1][0], base).linf
        else:
            err = float("nan")
        rows.append((err, res[k][1], res[k][2]))
    return rows


def _converge_study(spec: ExperimentSpec, out: _Out, seed, threads):
    target = spec.target
    if target == "auto":
        target = "kernel" if spec.comb is not None else "direct"
    if target == "kernel" and spec.comb is None:
        raise E.ParseError("converge.target = kernel needs comb terms")
    grids = [build_grid(spec.grid.periods, [c * 2 ** k for c in spec.grid.counts], spec.grid.origin)
             for k in range(spec.levels)]
    spec = dataclasses.replace(spec, seed=seed)
    rows = (_converge_kernel if target == "kernel" else _converge_direct)(spec, grids, threads)
    errs = [r[0] for r in rows if np.isfinite(r[0])]
    try:
        orders = convergence_order(errs)
        status = "ok"
    except (E.NonMonotone, ValueError) as exc:
        orders, status = [], f"{type(exc).__name__}: {exc}"
    lines = [f"# target={target}; error = {'residual Linf at fixed points' if target == 'kernel' else 'Linf difference to next level'}",
             "# level\tcounts\th\tdt\terror\torder"]
    for k, (err, h, dt) in enumerate(rows):
        o = f"{orders[k - 1]:.6f}" if 0 < k <= len(orders) else "-"
        dts = "-" if dt is None else f"{dt:.17g}"
        e = "-" if not np.isfinite(err) else f"{err:.17g}"
        lines.append(f"{k}\t{','.join(str(c) for c in grids[k].counts)}\t{h:.17g}\t{dts}\t{e}\t{o}")
    lines.append(f"# status\t{status}")
    out.text("reports/convergence.tsv", "\n".join(lines) + "\n")
    if status != "ok":
        raise E.NonMonotone(status)
    return orders


_KINDS = {
    "kernel-demo": _kernel_demo,
    "nwave-evolve": _nwave_evolve,
    "nls-evolve": _nls_evolve,
    "phi-taylor": _phi_taylor,
    "residual-check": _residual_check,
    "converge-study": _converge_study,
}


# ---------------------------------------------------------------------------
# manifest


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def normalized_config(spec: ExperimentSpec, seed: int) -> str:
    raw = dict(spec.raw)
    raw["run.seed"] = str(seed)
    raw.pop("run.out", None)
    return "".join(f"{k} = {raw[k]}\n" for k in sorted(raw))


def write_manifest(out: _Out, kind: str, seed: int, code: int, error: str | None):
    lines = ["# dressing-lab manifest 1", f"kind\t{kind}", f"seed\t{seed}",
             f"status\t{'ok' if code == 0 else 'failed'}", f"exit\t{code}",
             f"error\t{error or '-'}"]
    for rel in sorted(out.files):
        p = out.root / rel
        if p.exists():
            lines.append(f"file\t{_sha256(p)}\t{p.stat().st_size}\t{rel}")
    path = out.root / "manifest.tsv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def run_experiment(spec: ExperimentSpec, out: str | os.PathLike | None = None, seed: int | None = None,
                   threads: int = 1) -> tuple:
    """Run one experiment; returns ``(exit_code, manifest_path)``.

    Solver and validation errors are caught and recorded in the manifest.
    """
    seed = spec.seed if seed is None else int(seed)
    root = Path(out if out is not None else spec.out)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise E.IoError(f"cannot create output directory {root}: {exc}") from None
    o = _Out(root)
    started = _dt.datetime.now(_dt.timezone.utc)
    t0 = time.perf_counter()
    code, error = EXIT_OK, None
    try:
        o.text("config.cfg", normalized_config(spec, seed))
        _KINDS[spec.kind](spec, o, seed, threads)
    except E.DressingLabError as exc:
        code, error = exit_code(exc), f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        code, error = EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
    except OSError as exc:
        code, error = EXIT_IO, f"{type(exc).__name__}: {exc}"
    manifest = write_manifest(o, spec.kind, seed, code, error)
    finished = _dt.datetime.now(_dt.timezone.utc)
    with open(root / "manifest.times", "w", encoding="utf-8") as fh:
        fh.write(f"started\t{started.isoformat()}\nfinished\t{finished.isoformat()}\n"
                 f"wall_seconds\t{time.perf_counter() - t0:.3f}\n")
    return code, manifest
