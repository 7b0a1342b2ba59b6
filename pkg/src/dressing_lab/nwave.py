"""Spectral-family evolution for the N-wave type system and the phi
representation with its Taylor-stepping construction.

The family Uhat(lambda_1; x) evolves by the linear spectral equation solved
for d/dx_M, with the shared potential u = offdiag Uhat(0; x).  Terms of the
literal equation that are proportional to lambda_1, or that multiply the
diagonal of Uhat, have coefficients sum_i S^i_ab (B^i_a - B^i_b) = 0 and are
left out here; :func:`dressing_lab.oracles.lin_u_literal_rate` keeps them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ModelSpec,
    SpatialGrid,
    SpectralFamily,
    fd_matrix,
    fd_partial,
    offdiag,
    step,
    validate_model,
)
from .errors import (
    MissingProfile,
    MissingTimeDerivative,
    ModelInvalid,
    NonEvolvable,
    SingularLineSystem,
    SingularReconstruction,
)

COND_LIMIT = 1e12


def commutator_with_diag(b: np.ndarray, u: np.ndarray) -> np.ndarray:
    """[diag(b), u] with entries (b_g - b_b) u_gb."""
    return (b[:, None] - b[None, :]) * u


def inverse_SM(m: ModelSpec) -> np.ndarray:
    """Entrywise 1/S^M_ab off the diagonal; raises NonEvolvable on a zero."""
    SM = m.S[m.M - 1]
    mask = ~np.eye(m.Q, dtype=bool)
    if np.any(SM[mask] == 0):
        raise NonEvolvable("S^M_ab = 0 for some a != b")
    out = np.zeros_like(SM)
    out[mask] = 1.0 / SM[mask]
    return out


@dataclass
class NwaveState:
    uhat: SpectralFamily
    t: float
    model: ModelSpec


def closure_u(state: NwaveState) -> np.ndarray:
    return offdiag(state.uhat.at_zero())


def nwave_rhs(slice_: np.ndarray, u: np.ndarray, m: ModelSpec, grid: SpatialGrid,
              lam1: float = 0.0, accuracy: int = 4) -> np.ndarray:
    """d/dx_M of one Uhat slice (off-diagonal part; the diagonal is inert).

    ``lam1`` is accepted for symmetry with the literal form; the reduced
    operator does not depend on it.
    """
    M = m.M
    inv = inverse_SM(m)
    Uo = offdiag(slice_)
    d1 = fd_partial(Uo, grid, 0, accuracy)
    rate = d1 * m.Bn(M) - Uo @ commutator_with_diag(m.Bn(M), u)
    acc = np.zeros_like(rate)
    for i in range(2, M):
        di = fd_partial(Uo, grid, i - 1, accuracy)
        acc = acc + m.S[i - 1] * (di - d1 * m.Bn(i) + Uo @ commutator_with_diag(m.Bn(i), u))
    return offdiag(rate - inv * acc)


def evolve_nwave(state: NwaveState, grid: SpatialGrid, dt: float, steps: int,
                 scheme: str = "rk4", stride: int = 1, accuracy: int = 4) -> list:
    """Advance every slice with the closure recomputed at each stage.

    Returns the trajectory as a list of :class:`NwaveState`, recorded every
    ``stride`` steps (the initial state included).
    """
    m = state.model
    report = validate_model(m, evolvable=True)
    if not report.ok:
        raise ModelInvalid(report)
    fam = state.uhat
    z = fam.zero_index
    nodes = fam.nodes

    def rhs(V):
        u = offdiag(V[z])
        return np.stack([nwave_rhs(V[k], u, m, grid, nodes[k], accuracy) for k in range(len(nodes))])

    V = fam.values.copy()
    t = state.t
    traj = [NwaveState(fam.with_values(V.copy()), t, m)]
    for n in range(1, steps + 1):
        V = step(V, rhs, dt, scheme)
        t = state.t + n * dt
        if n % stride == 0 or n == steps:
            traj.append(NwaveState(fam.with_values(V.copy()), t, m))
    return traj


def conjugation_drift(u: np.ndarray) -> float:
    """max |u_ba - conj(u_ab)| over the grid; monitors the reality reduction."""
    ut = np.conj(np.swapaxes(u, -1, -2))
    return float(np.max(np.abs(offdiag(u - ut)))) if u.size else 0.0


# ---------------------------------------------------------------------------
# phi representation


@dataclass
class PhiState:
    phi: SpectralFamily
    t: float
    model: ModelSpec


def _profile(m: ModelSpec, alpha: int, lam1: float):
    try:
        return m.diag_profiles[(alpha, float(lam1))]
    except KeyError:
        raise MissingProfile(f"no diagonal profile for alpha={alpha}, lambda_1={lam1}") from None


def diag_phi(alpha: int, lam1: float, x, m: ModelSpec):
    """Prescribed phi_aa(lam1; x) = f(x_1 + sum_{i>=2} B^i_a x_i)."""
    f = _profile(m, alpha, lam1)
    x = np.asarray(x, dtype=float)
    s = x @ m.B[:, alpha]
    return f(s)


def diag_phi_field(m: ModelSpec, grid: SpatialGrid, lam1: float, t: float) -> np.ndarray:
    """Diagonal matrix field of the prescribed profiles at x_M = t."""
    pts = grid.points(t)
    out = np.zeros(grid.shape + (m.Q, m.Q), dtype=complex)
    for a in range(m.Q):
        out[..., a, a] = diag_phi(a, lam1, pts, m)
    return out


def make_phi_state(m: ModelSpec, grid: SpatialGrid, nodes, offdiag_values, t: float = 0.0) -> PhiState:
    """PhiState from off-diagonal data per node; the diagonal comes from the profiles."""
    nodes = np.asarray(nodes, dtype=float)
    vals = offdiag(np.asarray(offdiag_values, dtype=complex))
    vals = vals + np.stack([diag_phi_field(m, grid, lam, t) for lam in nodes])
    return PhiState(SpectralFamily(nodes, vals, grid.at(t), "phi"), float(t), m)


def _inverse_checked(W: np.ndarray):
    cond = np.linalg.cond(W)
    bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise SingularReconstruction(f"I + phi(0) is singular at node {node}",
                                     node=node, condition=float(np.max(cond)))
    return np.linalg.inv(W)


def u_from_phi(phi0: np.ndarray, grid: SpatialGrid, accuracy: int = 4) -> np.ndarray:
    """u = (I + phi(0))^{-1} d_1 phi(0)."""
    Q = phi0.shape[-1]
    Winv = _inverse_checked(np.eye(Q) + phi0)
    return Winv @ fd_partial(phi0, grid, 0, accuracy)


def uhat_from_phi(phi: SpectralFamily, u: np.ndarray, accuracy: int = 4) -> SpectralFamily:
    """Uhat(lam1) = -phi(lam1) u + d_1 phi(lam1), slice by slice."""
    vals = np.stack([-(p @ u) + fd_partial(p, phi.grid, 0, accuracy) for p in phi.values])
    return SpectralFamily(phi.nodes.copy(), vals, phi.grid, "Uhat")


def fhat_from_phi(phi0: np.ndarray, u: np.ndarray, n: int, m: ModelSpec, grid: SpatialGrid,
                  psi0: np.ndarray | None = None, accuracy: int = 4) -> np.ndarray:
    """Fhat^n(0; x) from phi(0), u and, for n = M, psi0 = d_M phi(0).

    (I + phi)^{-1} [phi_{1n} - phi_{11} B^n - (phi_n - phi_1 B^n) u]
    """
    if not 2 <= n <= m.M:
        raise ValueError("n must lie in 2..M")
    if n == m.M:
        if psi0 is None:
            raise MissingTimeDerivative("Fhat^M needs d_M phi(0)")
        dn = psi0
    else:
        dn = fd_partial(phi0, grid, n - 1, accuracy)
    d1 = fd_partial(phi0, grid, 0, accuracy)
    Bn = m.Bn(n)
    inner = fd_partial(dn, grid, 0, accuracy) - fd_partial(d1, grid, 0, accuracy) * Bn - (dn - d1 * Bn) @ u
    Winv = _inverse_checked(np.eye(m.Q) + phi0)
    return Winv @ inner


def constraint_residual(phi_slice: np.ndarray, psi_slice: np.ndarray, lam1: float, u: np.ndarray,
                        fhat: dict, m: ModelSpec, grid: SpatialGrid, accuracy: int = 4) -> np.ndarray:
    """Left side of the linear constraint PDE on phi for one lambda_1 slice.

    ``fhat`` maps i = 2..M to Fhat^i(0; x); ``psi_slice`` stands in for
    d_M phi.  Off-diagonal entries carry the equation; the diagonal is zero.
    Written term by term, with the lambda_1 terms kept literally.
    """
    M = m.M
    d1 = fd_partial(phi_slice, grid, 0, accuracy)
    total = np.zeros_like(phi_slice)
    for i in range(2, M + 1):
        di = psi_slice if i == M else fd_partial(phi_slice, grid, i - 1, accuracy)
        Bi = m.Bn(i)
        gap = Bi[:, None] - Bi[None, :]
        transported = di - d1 * Bi
        first = fd_partial(transported - lam1 * phi_slice * gap, grid, 0, accuracy)
        bracket = phi_slice @ fhat[i] + transported @ u - lam1 * (phi_slice @ u) * gap
        total = total + m.S[i - 1] * (first - bracket)
    return offdiag(total)


def _pairs(Q):
    return [(a, b) for a in range(Q) for b in range(Q) if a != b]


def _line_operator(A_line, u_line, D):
    """Matrix of psi_of -> offdiag(A (D psi - psi u)) on one x_1 line.

    Rows are ordered (pair (a,b), node j), columns (pair (r,s), node k).
    """
    N, Q = u_line.shape[0], u_line.shape[-1]
    eyeQ, eyeN = np.eye(Q), np.eye(N)
    T = np.einsum("jar,jk,sb->abjrsk", A_line, D, eyeQ)
    T -= np.einsum("jar,jk,jsb->abjrsk", A_line, eyeN, u_line)
    T = T.reshape(Q, Q, N, Q, Q, N)
    pairs = _pairs(Q)
    rows = np.concatenate([T[a, b][None] for a, b in pairs])  # (P, N, Q, Q, N)
    L = np.concatenate([rows[:, :, r, s, :][..., None, :] for r, s in pairs], axis=-2)
    P = len(pairs)
    return L.reshape(P * N, P * N)


def _solve_lines(A, u, rhs, grid, accuracy):
    """Solve offdiag(A (D_1 psi - psi u)) = rhs line by line for psi_of."""
    Q = u.shape[-1]
    N = grid.counts[0]
    D = fd_matrix(N, grid.spacing[0], accuracy)
    pairs = _pairs(Q)
    psi = np.zeros(u.shape, dtype=complex)
    for line in np.ndindex(*grid.shape[1:]):
        idx = (slice(None),) + line
        L = _line_operator(A[idx], u[idx], D)
        r = np.concatenate([rhs[idx][:, a, b] for a, b in pairs])
        x, _, _, sv = np.linalg.lstsq(L, r, rcond=1.0 / COND_LIMIT)
        cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        if cond > COND_LIMIT:
            # singular directions were truncated; accept only a consistent system
            res = np.linalg.norm(L @ x - r)
            if res > 1e-8 * (np.linalg.norm(r) + 1e-300) and res > 1e-12:
                raise SingularLineSystem(
                    f"constraint system on line {line} is singular and inconsistent",
                    line=line, condition=float(cond))
        for p, (a, b) in enumerate(pairs):
            psi[idx + (a, b)] = x[p * N:(p + 1) * N]
    return psi


def _diag_rate(m, phi_slice, grid, accuracy):
    """d_M of the prescribed diagonal: B^M_a d_1 phi_aa."""
    d1 = fd_partial(phi_slice, grid, 0, accuracy)
    Q = m.Q
    return (d1 * np.eye(Q)) * m.Bn(m.M)


def phi_time_derivative(state: PhiState, accuracy: int = 4, return_parts: bool = False):
    """psi = d_M phi for every slice, from the linear constraint PDE.

    Stage 1 solves the lambda_1 = 0 slice, where psi(0) also enters
    Fhat^M(0).  Stage 2 solves the remaining slices with Fhat^M(0) known.
    With ``return_parts`` also returns ``(u, fhat)``.
    """
    m, fam = state.model, state.phi
    grid = fam.grid
    report = validate_model(m, evolvable=True)
    if not report.ok:
        raise ModelInvalid(report)
    inv = inverse_SM(m)
    Q, M = m.Q, m.M
    z = fam.zero_index
    phi0 = fam.values[z]
    u = u_from_phi(phi0, grid, accuracy)
    fhat = {i: fhat_from_phi(phi0, u, i, m, grid, accuracy=accuracy) for i in range(2, M)}
    Winv = np.linalg.inv(np.eye(Q) + phi0)

    # stage 1: residual at psi = known diagonal gives the affine offset
    psi_d = _diag_rate(m, phi0, grid, accuracy)
    f0 = constraint_residual(phi0, psi_d, 0.0,
                             u, {**fhat, M: fhat_from_phi(phi0, u, M, m, grid, psi_d, accuracy)},
                             m, grid, accuracy)
    psi0 = psi_d + _solve_lines(Winv, u, -f0 * inv, grid, accuracy)
    fhat[M] = fhat_from_phi(phi0, u, M, m, grid, psi0, accuracy)

    out = np.zeros_like(fam.values)
    out[z] = psi0
    ident = np.broadcast_to(np.eye(Q, dtype=complex), u.shape)
    for k, lam in enumerate(fam.nodes):
        if k == z:
            continue
        p = fam.values[k]
        pd = _diag_rate(m, p, grid, accuracy)
        f = constraint_residual(p, pd, lam, u, fhat, m, grid, accuracy)
        out[k] = pd + _solve_lines(ident, u, -f * inv, grid, accuracy)
    psi = SpectralFamily(fam.nodes.copy(), out, grid, "phi")
    if return_parts:
        return psi, u, fhat
    return psi


def taylor_step_phi(state: PhiState, dt: float, accuracy: int = 4) -> PhiState:
    """One first-order Taylor step in x_M of the off-diagonal phi; the
    diagonal is regenerated from its profiles at the new x_M."""
    if dt == 0:
        return state
    m, fam = state.model, state.phi
    psi = phi_time_derivative(state, accuracy)
    t_new = state.t + dt
    new_of = offdiag(fam.values) + dt * offdiag(psi.values)
    return make_phi_state(m, fam.grid, fam.nodes, new_of, t_new)


def reconstruct_u(state: PhiState, accuracy: int = 4) -> np.ndarray:
    return u_from_phi(state.phi.at_zero(), state.phi.grid, accuracy)
