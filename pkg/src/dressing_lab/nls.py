"""Spectral-family evolution for the multidimensional NLS variant (Q = 2).

The evolution coordinate is t with x_M = i t, so every x_M rate is
multiplied by i.  The real-x_M form is available through ``real_xm=True``;
its linear modes grow like exp(|k|^2 x_M), so keep it to short algebraic
checks.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    ModelSpec,
    SpatialGrid,
    SpectralFamily,
    fd_partial,
    fd_second,
    laplacian,
    make_report,
    offdiag,
    step,
    validate_model,
)
from .errors import ModelInvalid, VariantMismatch


@dataclass
class NlsState:
    uhat: SpectralFamily
    t: float
    model: ModelSpec


def _check(m: ModelSpec):
    if m.variant != "nls":
        raise VariantMismatch("model variant is not nls")
    report = validate_model(m)
    if not report.ok:
        raise ModelInvalid(report)


def nls_rhs(slice_: np.ndarray, u: np.ndarray, lam1: float, m: ModelSpec, grid: SpatialGrid,
            accuracy: int = 4, nonlinear: bool = True, real_xm: bool = False) -> np.ndarray:
    """d/dt of the off-diagonal Uhat(lam1) slice.

    x_M rate: Lap(U) B + B lam^2 U + 2 (lam U_1 + lam B U_2 + lam^2 U) B - U u12 u21 B,
    with B = B^2 = diag(1, -1).
    """
    if m.variant != "nls":
        raise VariantMismatch("nls_rhs needs an nls model")
    b = m.Bn(2)
    Uo = offdiag(slice_)
    rate = laplacian(Uo, grid, accuracy) * b
    if nonlinear:
        q = u[..., 0, 1] * u[..., 1, 0]
        rate = rate - (Uo * q[..., None, None]) * b
    if lam1 != 0.0:
        d1 = fd_partial(Uo, grid, 0, accuracy)
        d2 = fd_partial(Uo, grid, 1, accuracy)
        rate = rate + b[:, None] * (lam1 ** 2) * Uo
        rate = rate + 2.0 * (lam1 * d1 + lam1 * b[:, None] * d2 + lam1 ** 2 * Uo) * b
    if not real_xm:
        rate = 1j * rate
    return offdiag(rate)


def evolve_nls(state: NlsState, grid: SpatialGrid, dt: float, steps: int, scheme: str = "rk4",
               stride: int = 1, accuracy: int = 4, nonlinear: bool = True,
               frozen_u: np.ndarray | None = None) -> list:
    """Advance all slices; the closure u = offdiag Uhat(0) is recomputed at
    every stage unless ``frozen_u`` supplies it."""
    m = state.model
    _check(m)
    fam = state.uhat
    z = fam.zero_index
    nodes = fam.nodes

    def rhs(V):
        u = offdiag(V[z]) if frozen_u is None else frozen_u
        return np.stack([nls_rhs(V[k], u, nodes[k], m, grid, accuracy, nonlinear)
                         for k in range(len(nodes))])

    V = fam.values.copy()
    traj = [NlsState(fam.with_values(V.copy()), state.t, m)]
    for n in range(1, steps + 1):
        V = step(V, rhs, dt, scheme)
        if n % stride == 0 or n == steps:
            traj.append(NlsState(fam.with_values(V.copy()), state.t + n * dt, m))
    return traj


def classical_ds_diagnostics(u: np.ndarray, u_xm: np.ndarray, m: ModelSpec, grid: SpatialGrid,
                             accuracy: int = 4):
    """Residuals of the classical DS pair for a full 2x2 field ``u``.

    Returns ``(potential_report, ds_report)``: the potential equation
    phi_22 - phi_11 - 4 (u12 u21)_11 with phi = (u11 + u22)_1, and
    [u_of_xM, sigma] - Lap2(u_of) - 8 u12 u21 u_of - 4 phi u_of with
    sigma read as B^2 and Lap2 over x_1, x_2.
    """
    started = time.perf_counter()
    if grid.ndim < 2:
        raise ValueError("needs two spatial axes")
    phi = fd_partial(u[..., 0, 0] + u[..., 1, 1], grid, 0, accuracy)
    q = u[..., 0, 1] * u[..., 1, 0]
    res_a = fd_second(phi, grid, 1, accuracy) - fd_second(phi, grid, 0, accuracy) \
        - 4.0 * fd_second(q, grid, 0, accuracy)
    ra = np.zeros(u.shape, dtype=complex)
    ra[..., 0, 0] = res_a
    rep_a = make_report("ds-potential", ra, grid, stencil=accuracy, started=started)

    started = time.perf_counter()
    sigma = np.diag(m.Bn(2)).astype(complex)
    uo = offdiag(u)
    uo_t = offdiag(u_xm)
    res_b = (uo_t @ sigma - sigma @ uo_t) - fd_second(uo, grid, 0, accuracy) \
        - fd_second(uo, grid, 1, accuracy) - 8.0 * q[..., None, None] * uo \
        - 4.0 * phi[..., None, None] * uo
    rep_b = make_report("ds-classical", res_b, grid, stencil=accuracy, started=started)
    return rep_a, rep_b
