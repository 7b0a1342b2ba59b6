"""Shared fixtures-by-function for the test modules."""

import numpy as np

from dressing_lab import DegenerateKernelSpec, ModelSpec, build_grid, solve_couplings

TWO_PI = 2 * np.pi

D1 = {2: np.array([-0.5, 0.0, 0.5]), 4: np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12])}
D2 = {2: np.array([1.0, -2.0, 1.0]), 4: np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])}


def symbol(coeffs, k, h, order):
    """Discrete symbol of a periodic central stencil acting on exp(i k x)."""
    p = len(coeffs) // 2
    return sum(c * np.exp(1j * (j - p) * k * h) for j, c in enumerate(coeffs)) / h ** order


def d1_symbol(k, h, acc=4):
    return symbol(D1[acc], k, h, 1)


def d2_symbol(k, h, acc=4):
    return symbol(D2[acc], k, h, 2)


B_Q2 = [[1.0, -1.0], [2.0, 1.0]]
B_Q3 = [[1.0, 0.0, -1.0], [0.5, -1.0, 2.0]]


def model_q2(**kw):
    return ModelSpec(3, 2, B_Q2, S=solve_couplings(B_Q2), **kw)


def model_q3(**kw):
    return ModelSpec(3, 3, B_Q3, S=solve_couplings(B_Q3), **kw)


def nls_model():
    return ModelSpec(3, 2, [[1.0, -1.0], [1.0, -1.0]], variant="nls")


def antihermitian(rng, Q, scale=0.3):
    H = rng.normal(size=(Q, Q)) + 1j * rng.normal(size=(Q, Q))
    return scale * (H - H.conj().T) / 2


def gentle_comb(Q, rank, seed=1, node_scale=1.0):
    """Bounded comb with slowly varying exponents (real nodes, anti-Hermitian weights)."""
    rng = np.random.default_rng(seed)
    nodes, weights = [], []
    for j in range(rank):
        nodes.append([node_scale * (0.15 + 0.05 * j), node_scale * (0.12 + 0.06 * j), 0, 0])
        weights.append(antihermitian(rng, Q))
    return DegenerateKernelSpec(np.array(nodes, dtype=complex), np.array(weights))


def centered_grid(N, t=0.0):
    return build_grid([TWO_PI, TWO_PI], [N, N], origin=[-np.pi, -np.pi], t=t)


def smooth_offdiag(grid, Q, rng, amp=0.3, modes=2):
    """Random smooth periodic off-diagonal field made of a few Fourier modes."""
    X, Y = grid.mesh()
    u = np.zeros(grid.shape + (Q, Q), dtype=complex)
    for a in range(Q):
        for b in range(Q):
            if a == b:
                continue
            f = np.zeros(grid.shape, dtype=complex)
            for k1 in range(-modes, modes + 1):
                for k2 in range(-modes, modes + 1):
                    c = rng.normal() + 1j * rng.normal()
                    f += c * np.exp(1j * (k1 * X + k2 * Y)) / (1 + k1 * k1 + k2 * k2) ** 2
            u[..., a, b] = amp * f / np.abs(f).max()
    return u


def random_field(grid, Q, rng):
    """Random smooth field, diagonal included."""
    u = smooth_offdiag(grid, Q, rng)
    X, Y = grid.mesh()
    for a in range(Q):
        u[..., a, a] = 0.2 * (rng.normal() * np.sin(X + a) + 1j * rng.normal() * np.cos(Y - a))
    return u


ACCEPTANCE_LINES = []


def verdict(n, ok, detail):
    """Record and print one acceptance line."""
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
