"""Direct integrators and residual evaluators for the target nonlinear PDEs.

These work on the potential u alone, never on a spectral family, and serve
as the reference the representations are checked against.  The finite
difference stencils are the ones the evolvers use, so equivalence tests
isolate the representation rather than the discretization.

Equation ids:

``nwave-classical``  classical (2+1) N-wave equation, index pair (2, 3), M = 3
``nl``               the N-wave type equation with couplings S^i
``ds``               multidimensional NLS in the x_M = i t form
``ds-classical``     classical DS pair (diagnostics only)
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ModelSpec,
    SpatialGrid,
    fd_partial,
    laplacian,
    make_report,
    offdiag,
    step,
    validate_model,
)
from .errors import MissingDerivative, ModelInvalid, NonEvolvable, NonMonotone

EQUATIONS = ("nwave-classical", "nl", "ds", "ds-classical")


def _comm(a, b):
    return a @ b - b @ a


def nwave_classical_pointwise(u, du1, du2, du3, m: ModelSpec):
    """[u_2, B^3] - [u_3, B^2] + B^3 u_1 B^2 - B^2 u_1 B^3 - [[u, B^3], [u, B^2]]."""
    B2 = np.diag(m.Bn(2)).astype(complex)
    B3 = np.diag(m.Bn(3)).astype(complex)
    return (_comm(du2, B3) - _comm(du3, B2) + B3 @ du1 @ B2 - B2 @ du1 @ B3
            - _comm(_comm(u, B3), _comm(u, B2)))


def _sm_inverse(m):
    SM = m.S[m.M - 1]
    mask = ~np.eye(m.Q, dtype=bool)
    if np.any(SM[mask] == 0):
        raise NonEvolvable("S^M_ab = 0 for some a != b")
    out = np.zeros_like(SM)
    out[mask] = 1.0 / SM[mask]
    return out


def _bracket(b, u):
    # [diag(b), u]_gb = (b_g - b_b) u_gb
    return (b[:, None] - b[None, :]) * u


def nl_rate(u: np.ndarray, m: ModelSpec, grid: SpatialGrid, accuracy: int = 4) -> np.ndarray:
    """d/dx_M of u_of from the N-wave type equation.

    S^M (u_M - u_1 B^M + u [B^M, u]) + sum_{i<M} S^i (u_i - u_1 B^i + u [B^i, u]) = 0,
    off-diagonal entries, with the diagonal of u dropped.
    """
    M = m.M
    inv = _sm_inverse(m)
    uo = offdiag(u)
    u1 = fd_partial(uo, grid, 0, accuracy)
    rate = u1 * m.Bn(M) - uo @ _bracket(m.Bn(M), uo)
    acc = np.zeros_like(rate)
    for i in range(2, M):
        ui = fd_partial(uo, grid, i - 1, accuracy)
        acc = acc + m.S[i - 1] * (ui - u1 * m.Bn(i) + uo @ _bracket(m.Bn(i), uo))
    return offdiag(rate - inv * acc)


def nl_pointwise(u, du: list, m: ModelSpec):
    """Left side of the N-wave type equation; ``du[n-1]`` is d/dx_n u for n = 1..M."""
    uo = offdiag(u)
    total = np.zeros(uo.shape, dtype=complex)
    Q = m.Q
    for i in range(2, m.M + 1):
        Bi = m.Bn(i)
        term = offdiag(du[i - 1]) - offdiag(du[0]) * Bi
        quad = np.zeros_like(term)
        for a in range(Q):
            for b in range(Q):
                if a == b:
                    continue
                for g in range(Q):
                    if g in (a, b):
                        continue
                    quad[..., a, b] += uo[..., a, g] * uo[..., g, b] * (Bi[g] - Bi[b])
        total = total + m.S[i - 1] * (term + quad)
    return offdiag(total)


def ds_rate(u: np.ndarray, m: ModelSpec, grid: SpatialGrid, accuracy: int = 4,
            nonlinear: bool = True) -> np.ndarray:
    """d/dt of u_of for u_xM = Lap(u) B - u u12 u21 B with x_M = i t."""
    b = m.Bn(2)
    uo = offdiag(u)
    rate = laplacian(uo, grid, accuracy) * b
    if nonlinear:
        q = u[..., 0, 1] * u[..., 1, 0]
        rate = rate - (uo * q[..., None, None]) * b
    return offdiag(1j * rate)


def lin_u_literal_rate(Uhat: np.ndarray, u: np.ndarray, lam1: float, m: ModelSpec,
                       grid: SpatialGrid, accuracy: int = 4) -> np.ndarray:
    """d/dx_M Uhat_ab from the full linear spectral equation, every term kept.

    Includes the lambda_1 terms and the gamma = a, b products with any
    diagonal of Uhat.  Coded entry by entry as an independent reference for
    the reduced evolver right-hand side.
    """
    M, Q = m.M, m.Q
    SM = m.S[M - 1]
    d = [fd_partial(Uhat, grid, a, accuracy) for a in range(grid.ndim)]
    out = np.zeros(Uhat.shape, dtype=complex)
    for a in range(Q):
        for b in range(Q):
            if a == b:
                continue
            rest = 0
            for i in range(2, M + 1):
                Bi = m.Bn(i)
                s = 0
                if i < M:
                    s = s + d[i - 1][..., a, b]
                s = s - d[0][..., a, b] * Bi[b]
                for g in range(Q):
                    s = s + Uhat[..., a, g] * u[..., g, b] * (Bi[g] - Bi[b])
                s = s - lam1 * Uhat[..., a, b] * (Bi[a] - Bi[b])
                rest = rest + m.S[i - 1, a, b] * s
            out[..., a, b] = -rest / SM[a, b]
    return out


# ---------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    equation: str
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    dt: float = 0.0
    scheme: str = "rk4"


def integrate_direct(eq: str, u0: np.ndarray, m: ModelSpec, grid: SpatialGrid, dt: float, steps: int,
                     scheme: str = "rk4", stride: int = 1, accuracy: int = 4,
                     nonlinear: bool = True) -> Trajectory:
    """Method-of-lines trajectory of ``nl`` or ``ds`` from ``u0``.

    ``rates`` holds the right-hand side at every recorded state, so residuals
    can use the integrator's own time derivative.
    """
    if eq == "nl":
        report = validate_model(m, evolvable=True)
        if not report.ok:
            raise ModelInvalid(report)

        def rhs(v):
            return nl_rate(v, m, grid, accuracy)
    elif eq == "ds":
        report = validate_model(m)
        if not report.ok:
            raise ModelInvalid(report)

        def rhs(v):
            return ds_rate(v, m, grid, accuracy, nonlinear)
    else:
        raise ValueError(f"direct integration supports 'nl' and 'ds', not {eq!r}")

    v = offdiag(np.asarray(u0, dtype=complex))
    traj = Trajectory(eq, dt=dt, scheme=scheme)
    traj.times.append(grid.t)
    traj.states.append(v.copy())
    traj.rates.append(rhs(v))
    for n in range(1, steps + 1):
        v = step(v, rhs, dt, scheme)
        if n % stride == 0 or n == steps:
            traj.times.append(grid.t + n * dt)
            traj.states.append(v.copy())
            traj.rates.append(rhs(v))
    return traj


def snapshot_time_derivative(traj: Trajectory, k: int) -> np.ndarray:
    """Second-order central difference of recorded snapshots at index k."""
    if not 0 < k < len(traj.states) - 1:
        raise ValueError("central difference needs neighbours on both sides")
    dt = traj.times[k + 1] - traj.times[k - 1]
    return (traj.states[k + 1] - traj.states[k - 1]) / dt


# ---------------------------------------------------------------------------
# residuals


def residual(eq: str, fields: dict, m: ModelSpec, grid: SpatialGrid | None = None,
             accuracy: int = 4, time_source: str = "supplied"):
    """Pointwise residual of an equation and its norms.

    ``fields`` holds ``u`` and ``u_t`` (the evolution derivative: d/dx_M for
    ``nwave-classical``, ``nl`` and ``ds-classical``; d/dt for ``ds``).
    Spatial derivatives ``u_x1``, ``u_x2``, ... are taken from ``fields``
    when present and by finite differences on ``grid`` otherwise.
    ``ds-classical`` returns a pair of reports.
    """
    started = time.perf_counter()
    if eq not in EQUATIONS:
        raise ValueError(f"unknown equation id {eq!r}")
    if "u" not in fields:
        raise MissingDerivative("field 'u' is required")
    u = np.asarray(fields["u"], dtype=complex)
    if "u_t" not in fields:
        raise MissingDerivative(f"{eq} needs the evolution derivative 'u_t'")
    u_t = np.asarray(fields["u_t"], dtype=complex)

    def spatial(n):
        key = f"u_x{n}"
        if key in fields:
            return np.asarray(fields[key], dtype=complex)
        if grid is None:
            raise MissingDerivative(f"{key} missing and no grid to difference on")
        return fd_partial(u, grid, n - 1, accuracy)

    notes = f"time-derivative={time_source}"
    if eq == "ds-classical":
        from .nls import classical_ds_diagnostics
        return classical_ds_diagnostics(u, u_t, m, grid, accuracy)
    if eq == "nwave-classical":
        if m.M != 3:
            raise ValueError("nwave-classical residual uses the pair (2, 3) with M = 3")
        r = nwave_classical_pointwise(u, spatial(1), spatial(2), u_t, m)
    elif eq == "nl":
        du = [spatial(n) for n in range(1, m.M)] + [u_t]
        r = nl_pointwise(u, du, m)
    else:
        r = offdiag(u_t) - ds_rate(u, m, grid, accuracy)
    return make_report(eq, r, grid, stencil=accuracy, started=started, notes=notes)


def convergence_order(errors) -> list:
    """log2(e_k / e_{k+1}) for errors at successively halved spacing."""
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1 or len(e) < 2:
        raise ValueError("need at least two error norms")
    if np.any(e <= 0):
        raise ValueError("error norms must be positive")
    if np.any(np.diff(e) >= 0):
        raise NonMonotone(f"errors are not decreasing: {e.tolist()}")
    return [float(v) for v in np.log2(e[:-1] / e[1:])]
