"""Closed-form dressing functions and the Dirac-comb (degenerate kernel)
solver for the integrable limit.

All exponents are linear in ``x``, so each one is represented by its
coefficient vector over ``x_1 .. x_M``; evaluation is ``exp(x @ coeffs)``
and analytic derivatives are multiplications by a coefficient.

Points ``x`` are arrays of shape ``(..., M)``; results broadcast over the
leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ModelSpec
from .errors import NotIntegrable, PoleHit, SingularSystem

COND_LIMIT = 1e12


def _spectral(m: ModelSpec, v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.shape != (m.M + 1,):
        raise ValueError(f"spectral vectors need {m.M + 1} components, got {v.shape}")
    return v


def phi1_coeffs(m: ModelSpec, lam) -> np.ndarray:
    """Coefficients ``(Q, M)`` of x_n in the exponent of Phi^1_alpha(lam; x)."""
    lam = _spectral(m, lam)
    l2 = lam[1]
    a = np.zeros((m.Q, m.M), dtype=complex)
    a[:, 0] = l2
    if m.variant == "nwave":
        for j in range(2, m.M + 1):
            a[:, j - 1] = l2 * m.Bn(j)
    else:
        a[:, 1] += l2 * m.Bn(2)
        a[:, m.M - 1] += l2 * l2 * m.Bn(2)
    for j in range(2, m.M + 1):
        a[:, j - 1] += np.diagonal(m.g(j, lam))
    return a


def g1_coeffs(m: ModelSpec, mu1: complex) -> np.ndarray:
    """Coefficients ``(Q, M)`` of x_n in the exponent of G^1_alpha(mu_1; x)."""
    mu1 = complex(mu1)
    if m.variant == "nwave":
        return mu1 * m.B.T.astype(complex)
    a = np.zeros((m.Q, m.M), dtype=complex)
    a[:, 0] = mu1
    a[:, 1] += mu1 * m.Bn(2)
    a[:, m.M - 1] += -mu1 * mu1 * m.Bn(2)
    return a


def g2_coeffs(m: ModelSpec, mu) -> np.ndarray:
    """Coefficients ``(Q, Q, M)`` of x_n in the exponent of G^2_{ab}(mu; x)."""
    mu = _spectral(m, mu)
    a = np.zeros((m.Q, m.Q, m.M), dtype=complex)
    for j in range(2, m.M + 1):
        a[:, :, j - 1] = -m.g(j, mu)
    return a


def _exp(x, coeffs):
    x = np.asarray(x, dtype=float)
    return np.exp(np.tensordot(x, coeffs, axes=([-1], [-1])))


@dataclass
class DegenerateKernelSpec:
    """C^0(mu) = sum_j weights[j] * delta(mu - nodes[j])."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=complex))
        self.weights = np.asarray(self.weights, dtype=complex)
        if self.weights.ndim == 2:
            self.weights = self.weights[None]
        if len(self.nodes) != len(self.weights):
            raise ValueError("one weight matrix per node is required")

    @property
    def J(self) -> int:
        return len(self.nodes)

    def check_poles(self):
        """Raise PoleHit if some mu2^(j) + mu1^(k) vanishes or is purely imaginary."""
        for j in range(self.J):
            for k in range(self.J):
                kappa = self.nodes[j, 1] + self.nodes[k, 0]
                if kappa == 0 or kappa.real == 0:
                    raise PoleHit(f"mu2^({j}) + mu1^({k}) = {kappa} is not admissible")


def eval_phi1(m: ModelSpec, lam, x) -> np.ndarray:
    """diag(exp(K^{Phi^1}_alpha(lam; x)))."""
    vals = _exp(x, phi1_coeffs(m, lam))
    return vals[..., :, None] * np.eye(m.Q)


def eval_C(m: ModelSpec, comb: DegenerateKernelSpec, j: int, x) -> np.ndarray:
    """C(mu^(j); x) = G^1(mu_1^(j); x) G^2(mu^(j); x) with weight c^(j)."""
    mu = comb.nodes[j]
    g1 = _exp(x, g1_coeffs(m, mu[0]))
    g2 = _exp(x, g2_coeffs(m, mu))
    return g1[..., :, None] * g2 * comb.weights[j]


def eval_psi_continuum(m: ModelSpec, lam, comb: DegenerateKernelSpec, j: int, x) -> np.ndarray:
    """Non-delta part of Psi(lam, mu^(j); x) with the Phi^1 normalization:
    x_1-antiderivative of Phi^1(lam; x) C(mu^(j); x)."""
    lam = _spectral(m, lam)
    mu = comb.nodes[j]
    kappa = lam[1] + mu[0]
    if kappa == 0:
        raise PoleHit(f"lambda_2 + mu_1 = 0 for comb term {j}")
    coeffs = (phi1_coeffs(m, lam) + g1_coeffs(m, mu[0]))[:, None, :] + g2_coeffs(m, mu)
    return _exp(x, coeffs) * comb.weights[j] / kappa


def _block_coeffs(m, comb):
    """Exponent coefficients of every block of the collapsed system."""
    J, Q = comb.J, m.Q
    a_blocks = np.zeros((J, J, Q, Q, m.M), dtype=complex)
    kappas = np.zeros((J, J), dtype=complex)
    for j in range(J):
        p1 = phi1_coeffs(m, comb.nodes[j])
        for k in range(J):
            mu = comb.nodes[k]
            a_blocks[j, k] = (p1 + g1_coeffs(m, mu[0]))[:, None, :] + g2_coeffs(m, mu)
            kappas[j, k] = comb.nodes[j, 1] + mu[0]
    return a_blocks, kappas


def _assemble(m, comb, x):
    # overflow is detected and reported by _solve_checked
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _assemble_raw(m, comb, x)


def _assemble_raw(m, comb, x):
    J, Q = comb.J, m.Q
    a_blocks, kappas = _block_coeffs(m, comb)
    lead = np.shape(x)[:-1]
    A = np.zeros(lead + (J * Q, J * Q), dtype=complex)
    R = np.zeros(lead + (J * Q, Q), dtype=complex)
    for j in range(J):
        R[..., j * Q:(j + 1) * Q, :] = eval_phi1(m, comb.nodes[j], x)
        for k in range(J):
            A[..., j * Q:(j + 1) * Q, k * Q:(k + 1) * Q] = (
                _exp(x, a_blocks[j, k]) * comb.weights[k] / kappas[j, k])
    A += np.eye(J * Q)
    return A, R, a_blocks


def _solve_checked(A, R, x):
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(R))):
        raise SingularSystem("system overflowed (exponents too large on this domain)", x=x)
    try:
        inv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        raise SingularSystem("collapsed system is exactly singular", x=x, condition=np.inf) from None
    cond = np.linalg.norm(A, 1, axis=(-2, -1)) * np.linalg.norm(inv, 1, axis=(-2, -1))
    worst = np.unravel_index(np.argmax(cond), cond.shape) if cond.ndim else ()
    if not np.all(np.isfinite(cond)) or np.max(cond) > COND_LIMIT:
        where = np.asarray(x)[worst] if cond.ndim else np.asarray(x)
        raise SingularSystem(f"collapsed system is ill-conditioned at x={where}",
                             x=where, condition=float(np.max(cond)))
    return np.linalg.solve(A, R)


def _require_integrable(m, comb):
    if not m.integrable:
        raise NotIntegrable("the comb solver needs g_hat = 0")
    comb.check_poles()


def solve_degenerate_U(comb: DegenerateKernelSpec, m: ModelSpec, x) -> np.ndarray:
    """Spectral function at the comb nodes, shape ``(J,) + x.shape[:-1] + (Q, Q)``.

    With a finite comb, U(lam) = Phi^1(lam) - d_1^{-1}(Phi^1 C) * U
    evaluated at lam = mu^(j) is a (J Q) x (J Q) linear system per point.
    """
    _require_integrable(m, comb)
    A, R, _ = _assemble(m, comb, x)
    X = _solve_checked(A, R, x)
    Q = m.Q
    return np.stack([X[..., j * Q:(j + 1) * Q, :] for j in range(comb.J)])


def reconstruct_u_classical(comb: DegenerateKernelSpec, m: ModelSpec, x, derivatives: bool = False):
    """u(x) = sum_k C(mu^(k); x) U^(k)(x).

    With ``derivatives=True`` returns ``(u, du)`` where ``du[n-1]`` is the
    exact d/dx_n of ``u`` (n = 1..M), from differentiating the exponents and
    the linear solve.
    """
    _require_integrable(m, comb)
    J, Q = comb.J, m.Q
    A, R, a_blocks = _assemble(m, comb, x)
    X = _solve_checked(A, R, x)
    Cs = [eval_C(m, comb, k, x) for k in range(J)]
    u = sum(Cs[k] @ X[..., k * Q:(k + 1) * Q, :] for k in range(J))
    if not derivatives:
        return u

    A0 = A - np.eye(J * Q)
    du = []
    for n in range(m.M):
        dA = np.zeros_like(A)
        dR = np.zeros_like(R)
        for j in range(J):
            blk = slice(j * Q, (j + 1) * Q)
            dR[..., blk, :] = phi1_coeffs(m, comb.nodes[j])[:, n][:, None] * R[..., blk, :]
            for k in range(J):
                kb = slice(k * Q, (k + 1) * Q)
                dA[..., blk, kb] = a_blocks[j, k][..., n] * A0[..., blk, kb]
        dX = np.linalg.solve(A, dR - dA @ X)
        dn = 0
        for k in range(J):
            kb = slice(k * Q, (k + 1) * Q)
            mu = comb.nodes[k]
            cc = g1_coeffs(m, mu[0])[:, n][:, None] + g2_coeffs(m, mu)[..., n]
            dn = dn + (cc * Cs[k]) @ X[..., kb, :] + Cs[k] @ dX[..., kb, :]
        du.append(dn)
    return u, np.stack(du)
