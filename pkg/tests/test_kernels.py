import numpy as np
import pytest

from dressing_lab import (
    DegenerateKernelSpec,
    ModelSpec,
    build_grid,
    eval_C,
    eval_phi1,
    eval_psi_continuum,
    reconstruct_u_classical,
    solve_couplings,
    solve_degenerate_U,
)
from dressing_lab.core import fd_sampled
from dressing_lab.errors import NotIntegrable, PoleHit, SingularSystem
from dressing_lab.oracles import nwave_classical_pointwise

from helpers import TWO_PI, centered_grid, gentle_comb, model_q2, model_q3

E = np.e


def m2_q2(variant="nwave"):
    return ModelSpec(2, 2, [[1.0, -1.0]])


# eval_phi1


def test_phi1_at_origin_is_identity():
    m = model_q3()
    lam = np.array([0.3, 0.7, 0.1, -0.2])
    assert np.allclose(eval_phi1(m, lam, np.zeros(3)), np.eye(3))


def test_phi1_zero_lambda2_is_identity():
    m = model_q2()
    x = np.random.default_rng(0).normal(size=(5, 3))
    out = eval_phi1(m, np.array([0.4, 0.0, 2.0, 1.0]), x)
    assert np.allclose(out, np.eye(2))


def test_phi1_spot_value():
    m = m2_q2()
    out = eval_phi1(m, np.array([0.0, 1.0, 0.0]), np.array([1.0, 1.0]))
    assert np.allclose(out, np.diag([E ** 2, 1.0]), rtol=1e-15)
    x = np.array([0.3, -0.8])
    assert np.allclose(eval_phi1(m, np.array([0, 1.0, 0]), x),
                       np.diag([np.exp(x[0] + x[1]), np.exp(x[0] - x[1])]))


def test_phi1_nls_exponent():
    m = ModelSpec(3, 2, [[1, -1], [1, -1]], variant="nls")
    lam = np.array([0, 0.5 + 0.2j, 0, 0])
    x = np.array([0.3, -0.4, 0.7])
    l2 = lam[1]
    b = np.array([1, -1])
    want = np.exp(l2 * (x[0] + x[1] * b) + x[2] * l2 ** 2 * b)
    assert np.allclose(np.diagonal(eval_phi1(m, lam, x)), want)


def test_phi1_separable_along_axis():
    m = model_q3()
    lam = np.array([0.1, 0.4, 0.2, 0.3])
    x = np.array([0.2, -0.5, 0.9])
    for axis in range(3):
        y = x.copy()
        y[axis] += 0.37
        ratio = np.diagonal(eval_phi1(m, lam, y)) / np.diagonal(eval_phi1(m, lam, x))
        x2 = x + np.array([1.0, 2.0, -1.0])
        y2 = x2.copy()
        y2[axis] += 0.37
        ratio2 = np.diagonal(eval_phi1(m, lam, y2)) / np.diagonal(eval_phi1(m, lam, x2))
        assert np.allclose(ratio, ratio2)


# eval_C


def test_C_zero_weight():
    m = model_q2()
    comb = DegenerateKernelSpec([[0.3, 0.4, 0, 0]], [np.zeros((2, 2))])
    assert np.all(eval_C(m, comb, 0, np.ones(3)) == 0)


def test_C_constant_when_mu1_zero():
    m = model_q2()
    c = np.array([[1, 2j], [3, 4]])
    comb = DegenerateKernelSpec([[0.0, 0.4, 0, 0]], [c])
    x = np.random.default_rng(1).normal(size=(4, 3))
    assert np.allclose(eval_C(m, comb, 0, x), c)


def test_C_spot_value():
    m = m2_q2()
    c = np.array([[1.0, 2.0], [3.0, 4.0]])
    comb = DegenerateKernelSpec([[1.0, 0.5, 0]], [c])
    out = eval_C(m, comb, 0, np.array([0.0, 1.0]))
    assert np.allclose(out, [[E, 2 * E], [3 / E, 4 / E]])


# eval_psi_continuum


def test_psi_zero_weight():
    m = model_q2()
    comb = DegenerateKernelSpec([[0.3, 0.4, 0, 0]], [np.zeros((2, 2))])
    assert np.all(eval_psi_continuum(m, [0, 0.2, 0, 0], comb, 0, np.ones(3)) == 0)


def test_psi_pole_hit():
    m = model_q2()
    comb = DegenerateKernelSpec([[0.3, 0.4, 0, 0]], [np.ones((2, 2))])
    with pytest.raises(PoleHit):
        eval_psi_continuum(m, [0, -0.3, 0, 0], comb, 0, np.ones(3))


@pytest.mark.parametrize("variant", ["nwave", "nls"])
def test_psi_x1_derivative_identity(variant):
    m = model_q3() if variant == "nwave" else ModelSpec(3, 2, [[1, -1], [1, -1]], variant="nls")
    rng = np.random.default_rng(4)
    N = 64
    h = TWO_PI / N
    x = np.zeros((N, 3))
    x[:, 0] = -np.pi + h * np.arange(N)
    x[:, 1:] = rng.uniform(-1, 1, size=2)
    lam = np.array([0, 0.3, 0, 0])
    comb = DegenerateKernelSpec([[0.25, 0.1, 0, 0]], [rng.normal(size=(m.Q, m.Q))])
    d = fd_sampled(lambda p: eval_psi_continuum(m, lam, comb, 0, p), x, 0, h)
    want = eval_phi1(m, lam, x) @ eval_C(m, comb, 0, x)
    assert np.abs(d - want).max() <= 1e-6 * np.abs(want).max()


def test_comb_pole_checks():
    comb = DegenerateKernelSpec([[0.3, -0.3, 0, 0]], [np.ones((2, 2))])
    with pytest.raises(PoleHit):
        comb.check_poles()
    comb = DegenerateKernelSpec([[0.3j, 0.2j, 0, 0]], [np.ones((2, 2))])
    with pytest.raises(PoleHit):
        comb.check_poles()


# solve_degenerate_U


def test_zero_kernel_gives_phi1():
    m = model_q2()
    comb = DegenerateKernelSpec([[0.2, 0.3, 0, 0]], [np.zeros((2, 2))])
    x = np.random.default_rng(0).normal(size=(6, 3))
    U = solve_degenerate_U(comb, m, x)
    assert np.allclose(U[0], eval_phi1(m, comb.nodes[0], x))


def test_diagonal_weight_gives_diagonal_u():
    m = model_q2()
    c = np.zeros((2, 2), complex)
    c[0, 0] = 0.4
    comb = DegenerateKernelSpec([[0.2, 0.3, 0, 0]], [c])
    pts = centered_grid(16).points(0.2)
    u, du = reconstruct_u_classical(comb, m, pts, derivatives=True)
    assert np.all(u[..., 0, 1] == 0) and np.all(u[..., 1, 0] == 0)
    assert np.abs(u[..., 0, 0]).max() > 0
    assert np.all(nwave_classical_pointwise(u, du[0], du[1], du[2], m) == 0)


def test_rank1_matches_bruteforce_dense_solve():
    m = model_q2()
    c = np.array([[0, 1.0], [0, 0]])
    mu = np.array([0.6, 0.4, 0, 0])
    comb = DegenerateKernelSpec([mu], [c])
    x = np.random.default_rng(2).normal(size=(7, 3))
    U = solve_degenerate_U(comb, m, x)[0]
    for p, Up in zip(x, U):
        A = np.eye(2) + eval_psi_continuum(m, mu, comb, 0, p)
        R = eval_phi1(m, mu, p)
        assert np.allclose(Up, np.linalg.solve(A, R), rtol=1e-13, atol=1e-14)
        u = eval_C(m, comb, 0, p) @ Up
        assert np.allclose(reconstruct_u_classical(comb, m, p), u)


def test_rank2_matches_bruteforce():
    m = model_q3()
    comb = gentle_comb(3, 2)
    p = np.array([0.4, -0.3, 0.2])
    A = np.eye(6, dtype=complex)
    R = np.zeros((6, 3), complex)
    for j in range(2):
        R[3 * j:3 * j + 3] = eval_phi1(m, comb.nodes[j], p)
        for k in range(2):
            A[3 * j:3 * j + 3, 3 * k:3 * k + 3] += eval_psi_continuum(m, comb.nodes[j], comb, k, p)
    X = np.linalg.solve(A, R)
    U = solve_degenerate_U(comb, m, p)
    assert np.allclose(U[0], X[:3]) and np.allclose(U[1], X[3:])


def test_not_integrable():
    g = np.zeros((2, 2, 2))
    g[1, 0, 1] = 1.0
    B = [[1, -1], [2, 1]]
    m = ModelSpec(3, 2, B, S=solve_couplings(B), g_hat=g)
    with pytest.raises(NotIntegrable):
        solve_degenerate_U(gentle_comb(2, 1), m, np.zeros(3))


def test_singular_system_reported():
    m = model_q2()
    # weights chosen so that I + A is singular at x = 0: A = diag(-1, 0) scaled by 1/kappa
    c = np.array([[-1.0, 0], [0, 0]])
    comb = DegenerateKernelSpec([[0.5, 0.5, 0, 0]], [c])
    with pytest.raises(SingularSystem) as exc:
        solve_degenerate_U(comb, m, np.zeros(3))
    assert exc.value.condition is None or exc.value.condition > 1e12


def test_overflow_reported_as_singular():
    m = model_q2()
    comb = DegenerateKernelSpec([[300.0, 300.0, 0, 0]], [np.ones((2, 2))])
    with pytest.raises(SingularSystem):
        solve_degenerate_U(comb, m, np.full(3, 5.0))


# reconstruct_u_classical


def test_zero_weights_zero_u():
    m = model_q3()
    comb = DegenerateKernelSpec([[0.2, 0.3, 0, 0], [0.4, 0.1, 0, 0]], np.zeros((2, 3, 3)))
    assert np.all(reconstruct_u_classical(comb, m, np.ones((4, 3))) == 0)


def test_rank1_classical_residual_fd():
    m = model_q2()
    comb = DegenerateKernelSpec([[0.2, 0.15, 0, 0]], [np.array([[0, 0.3], [-0.3, 0]])])
    pts = centered_grid(64).points(0.1)
    u, du = reconstruct_u_classical(comb, m, pts, derivatives=True)
    h = TWO_PI / 64
    d = [fd_sampled(lambda p: reconstruct_u_classical(comb, m, p), pts, a, h) for a in range(3)]
    assert np.abs(nwave_classical_pointwise(u, du[0], du[1], du[2], m)).max() <= 1e-10
    assert np.abs(nwave_classical_pointwise(u, *d, m)).max() <= 1e-6


@pytest.mark.parametrize("Q,rank", [(2, 1), (3, 1), (3, 2)])
def test_analytic_derivatives_vs_fd(Q, rank):
    m = model_q2() if Q == 2 else model_q3()
    comb = gentle_comb(Q, rank)
    pts = centered_grid(32).points(0.3)
    u, du = reconstruct_u_classical(comb, m, pts, derivatives=True)
    h = TWO_PI / 64
    for a in range(3):
        d = fd_sampled(lambda p: reconstruct_u_classical(comb, m, p), pts, a, h)
        assert np.abs(d - du[a]).max() <= 1e-6


def test_classical_residual_refines_at_fourth_order():
    m = model_q3()
    comb = gentle_comb(3, 2)
    pts = centered_grid(32).points(0.3)
    u, _ = reconstruct_u_classical(comb, m, pts, derivatives=True)
    errs = []
    for N in (32, 64, 128):
        h = TWO_PI / N
        d = [fd_sampled(lambda p: reconstruct_u_classical(comb, m, p), pts, a, h) for a in range(3)]
        errs.append(np.abs(nwave_classical_pointwise(u, *d, m)).max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(orders - 4) <= 0.3)


def test_determinism():
    m = model_q3()
    comb = gentle_comb(3, 2)
    pts = centered_grid(8).points(0.1)
    assert np.array_equal(reconstruct_u_classical(comb, m, pts), reconstruct_u_classical(comb, m, pts.copy()))
