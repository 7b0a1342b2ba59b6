import dataclasses

import numpy as np
import pytest

from dressing_lab import (
    ModelSpec,
    NwaveState,
    SpectralFamily,
    build_grid,
    evolve_nwave,
    fd_partial,
    make_phi_state,
    nwave_rhs,
    offdiag,
    phi_time_derivative,
    reconstruct_u,
    solve_couplings,
    taylor_step_phi,
    u_from_phi,
    uhat_from_phi,
)
from dressing_lab.core import fd_second
from dressing_lab.errors import (
    MissingProfile,
    MissingTimeDerivative,
    ModelInvalid,
    NonEvolvable,
    SingularReconstruction,
)
from dressing_lab.nwave import (
    closure_u,
    conjugation_drift,
    constraint_residual,
    diag_phi,
    diag_phi_field,
    fhat_from_phi,
)
from dressing_lab.oracles import integrate_direct, lin_u_literal_rate, nl_rate

from helpers import TWO_PI, d1_symbol, model_q2, model_q3, random_field, smooth_offdiag


def grid2(N):
    return build_grid([TWO_PI, TWO_PI], [N, N])


def family(grid, nodes, vals):
    return SpectralFamily(np.array(nodes, float), np.stack(vals), grid)


# closure


def test_closure_zero_and_diagonal():
    g = grid2(8)
    m = model_q2()
    z = np.zeros(g.shape + (2, 2), complex)
    assert np.all(closure_u(NwaveState(family(g, [0.0], [z]), 0, m)) == 0)
    d = z.copy()
    d[..., 0, 0] = 1.0
    d[..., 1, 1] = 2.0
    assert np.all(closure_u(NwaveState(family(g, [0.0], [d]), 0, m)) == 0)
    f = z.copy()
    f[..., 0, 1] = np.arange(64).reshape(8, 8)
    assert np.array_equal(closure_u(NwaveState(family(g, [-1.0, 0.0], [z, f]), 0, m)), f)


# nwave_rhs


def test_rhs_constant_field_zero_u():
    g = grid2(8)
    m = model_q3()
    U = np.broadcast_to(np.arange(9, dtype=complex).reshape(3, 3), g.shape + (3, 3)).copy()
    assert np.all(nwave_rhs(U, np.zeros_like(U), m, g, 0.7) == 0)


def test_rhs_q2_plane_wave_symbol():
    g = grid2(32)
    m = model_q2()
    h = g.spacing[0]
    X, Y = g.mesh()
    S2, SM = m.S[1, 0, 1], m.S[2, 0, 1]
    for k1, k2 in [(1, 0), (0, 2), (3, -1), (5, 4)]:
        U = np.zeros(g.shape + (2, 2), complex)
        U[..., 0, 1] = np.exp(1j * (k1 * X + k2 * Y))
        rate = nwave_rhs(U, U, m, g)
        K1, K2 = d1_symbol(k1, h), d1_symbol(k2, h)
        sym = K1 * m.Bn(3)[1] - (S2 / SM) * (K2 - K1 * m.Bn(2)[1])
        assert np.abs(rate[..., 0, 1] - sym * U[..., 0, 1]).max() <= 1e-10
        # continuous symbol at resolved wavenumbers
        if abs(k1) + abs(k2) <= 2:
            cont = 1j * k1 * m.Bn(3)[1] - (S2 / SM) * (1j * k2 - 1j * k1 * m.Bn(2)[1])
            assert abs(sym - cont) < 1e-3


def test_rhs_matches_literal_full_equation():
    rng = np.random.default_rng(0)
    g = grid2(16)
    m = model_q3()
    for lam in (0.0, 0.8, -1.3):
        Uhat = random_field(g, 3, rng)   # diagonal included
        u = smooth_offdiag(g, 3, rng)
        red = nwave_rhs(Uhat, u, m, g, lam)
        full = lin_u_literal_rate(Uhat, u, lam, m, g)
        assert np.abs(red - full).max() <= 1e-12 * np.abs(full).max()


def test_rhs_projects_onto_nl_at_zero():
    rng = np.random.default_rng(1)
    g = grid2(16)
    m = model_q3()
    u = smooth_offdiag(g, 3, rng)
    assert np.array_equal(nwave_rhs(u, u, m, g, 0.0), nl_rate(u, m, g))


def test_rhs_non_evolvable():
    g = grid2(8)
    m = ModelSpec(3, 2, [[1, -1], [1, -1]], S=[np.zeros((2, 2)), np.zeros((2, 2))])
    z = np.zeros(g.shape + (2, 2), complex)
    with pytest.raises(NonEvolvable):
        nwave_rhs(z, z, m, g)


# evolve_nwave


def test_evolve_zero():
    g = grid2(8)
    m = model_q3()
    z = np.zeros((2,) + g.shape + (3, 3), complex)
    tr = evolve_nwave(NwaveState(SpectralFamily([0.0, 1.0], z, g), 0.0, m), g, 0.1, 5)
    assert len(tr) == 6 and all(np.all(s.uhat.values == 0) for s in tr)
    assert tr[-1].t == pytest.approx(0.5)


def test_evolve_stride_records():
    g = grid2(8)
    m = model_q3()
    z = np.zeros((1,) + g.shape + (3, 3), complex)
    tr = evolve_nwave(NwaveState(SpectralFamily([0.0], z, g), 0.0, m), g, 0.1, 7, stride=3)
    assert [round(s.t, 10) for s in tr] == [0.0, 0.3, 0.6, 0.7]


def test_evolve_rejects_invalid_model():
    g = grid2(8)
    m = ModelSpec(3, 2, [[1, -1], [2, 1]], S=[np.eye(2)[::-1], np.eye(2)[::-1]])
    z = np.zeros((1,) + g.shape + (2, 2), complex)
    with pytest.raises(ModelInvalid):
        evolve_nwave(NwaveState(SpectralFamily([0.0], z, g), 0.0, m), g, 0.1, 1)


def _plane_wave_error(N):
    g = grid2(N)
    m = model_q2()
    X, Y = g.mesh()
    k1, k2 = 1, 1
    S2, SM = m.S[1], m.S[2]
    u0 = np.zeros(g.shape + (2, 2), complex)
    om = {}
    for a, b in [(0, 1), (1, 0)]:
        u0[..., a, b] = np.exp(1j * (k1 * X + k2 * Y) + 0.3j * a)
        om[(a, b)] = k1 * m.Bn(3)[b] - (S2[a, b] / SM[a, b]) * (k2 - k1 * m.Bn(2)[b])
    T = 0.5
    dt = 0.2 * g.spacing[0]
    steps = int(np.ceil(T / dt))
    tr = evolve_nwave(NwaveState(SpectralFamily([0.0], u0[None], g), 0.0, m), g, T / steps, steps,
                      stride=steps)
    exact = np.zeros_like(u0)
    for (a, b), w in om.items():
        exact[..., a, b] = u0[..., a, b] * np.exp(1j * w * T)
    return np.abs(tr[-1].uhat.values[0] - exact).max()


def test_evolve_q2_plane_wave_convergence():
    errs = [_plane_wave_error(N) for N in (16, 32, 64)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 3.5), (errs, orders)


def test_evolve_q3_matches_direct():
    rng = np.random.default_rng(2)
    g = grid2(32)
    m = model_q3()
    u0 = smooth_offdiag(g, 3, rng)
    vals = [u0 * 0.5, u0, u0 * 1.5]
    dt = 0.2 * g.spacing[0]
    tr = evolve_nwave(NwaveState(family(g, [-1.0, 0.0, 1.0], vals), 0.0, m), g, dt, 50, stride=50)
    od = integrate_direct("nl", u0, m, g, dt, 50)
    assert np.abs(tr[-1].uhat.at_zero() - od.states[-1]).max() <= 1e-8


def test_q2_superposition():
    rng = np.random.default_rng(3)
    g = grid2(16)
    m = model_q2()
    a, b = smooth_offdiag(g, 2, rng), smooth_offdiag(g, 2, rng)

    def run(v):
        st = NwaveState(family(g, [0.0, 0.5], [v, 2 * v]), 0.0, m)
        return evolve_nwave(st, g, 0.05, 20, stride=20)[-1].uhat.values

    assert np.abs(run(a + b) - run(a) - run(b)).max() <= 1e-10


def test_conjugation_drift():
    rng = np.random.default_rng(4)
    g = grid2(8)
    u = smooth_offdiag(g, 2, rng)
    u[..., 1, 0] = np.conj(u[..., 0, 1])
    assert conjugation_drift(u) == 0.0
    u[0, 0, 1, 0] += 0.5
    assert conjugation_drift(u) == pytest.approx(0.5)


# phi representation


def profiles(m, nodes, amp=0.2):
    return {(a, float(l)): (lambda s, a=a, l=l: amp * np.sin(s + a) + 0.05 * l * np.cos(s))
            for a in range(m.Q) for l in nodes}


def test_u_from_phi_trivial_cases():
    g = grid2(16)
    X, Y = g.mesh()
    phi = np.zeros(g.shape + (2, 2), complex)
    phi[..., 0, 1] = np.sin(X) * np.cos(Y)
    phi0 = np.zeros_like(phi)
    assert np.array_equal(u_from_phi(phi0, g), np.zeros_like(phi))
    # phi(0) = 0 gives u = d_1 phi(0) only when phi(0) itself vanishes; with
    # small phi the inverse is I, so test the identity case directly
    c = np.zeros_like(phi)
    c[..., 0, 1] = np.cos(Y)  # constant in x_1
    assert np.abs(u_from_phi(c, g)).max() == 0


def test_u_from_phi_identity_inverse():
    g = grid2(16)
    X, Y = g.mesh()
    phi = np.zeros(g.shape + (2, 2), complex)
    phi[..., 0, 1] = np.sin(X) * np.cos(Y)
    # E12 is nilpotent: (I + f E12)^{-1} d1 f E12 = d1 f E12 exactly
    u = u_from_phi(phi, g)
    assert np.abs(u - fd_partial(phi, g, 0)).max() <= 1e-14


def test_u_from_phi_tanh_closed_form():
    N = 128
    g = build_grid([TWO_PI, TWO_PI], [N, 4], origin=[-np.pi, 0])
    X, _ = g.mesh()
    phi = np.zeros(g.shape + (2, 2), complex)
    phi[..., 0, 1] = np.tanh(X)
    u = u_from_phi(phi, g)
    # closed-form inverse applied to the same discrete derivative
    inv = np.broadcast_to(np.eye(2), phi.shape) - phi
    assert np.abs(u - inv @ fd_partial(phi, g, 0)).max() <= 1e-14
    # against the analytic sech^2, away from the periodic seam of tanh
    interior = slice(3, N - 3)
    err = np.abs(u[interior, :, 0, 1] - 1 / np.cosh(X[interior]) ** 2).max()
    assert err <= 5e-6


def test_u_from_phi_singular():
    g = grid2(8)
    phi = np.zeros(g.shape + (2, 2), complex)
    phi[..., 0, 0] = -1.0
    with pytest.raises(SingularReconstruction) as exc:
        u_from_phi(phi, g)
    assert exc.value.node is not None


def test_uhat_from_phi_round_trip():
    rng = np.random.default_rng(5)
    g = grid2(16)
    phi0 = 0.3 * random_field(g, 3, rng)
    u = u_from_phi(phi0, g)
    fam = SpectralFamily([0.0, 1.0], np.stack([phi0, 0.5 * phi0]), g, "phi")
    U = uhat_from_phi(fam, u)
    assert np.abs(U.values[0] - u).max() <= 1e-13
    assert U.role == "Uhat"


def test_uhat_from_phi_entrywise():
    rng = np.random.default_rng(6)
    g = grid2(8)
    p = [random_field(g, 2, rng), random_field(g, 2, rng)]
    u = smooth_offdiag(g, 2, rng)
    U = uhat_from_phi(SpectralFamily([-1.0, 0.0], np.stack(p), g, "phi"), u)
    for k in range(2):
        d1 = fd_partial(p[k], g, 0)
        for a in range(2):
            for b in range(2):
                want = d1[..., a, b] - sum(p[k][..., a, c] * u[..., c, b] for c in range(2))
                assert np.abs(U.values[k][..., a, b] - want).max() <= 1e-14
    assert np.all(uhat_from_phi(SpectralFamily([0.0], np.zeros((1,) + g.shape + (2, 2)), g, "phi"),
                                u).values == 0)


def test_fhat_trivial_and_missing():
    g = grid2(8)
    m = model_q3()
    z = np.zeros(g.shape + (3, 3), complex)
    assert np.all(fhat_from_phi(z, z, 2, m, g) == 0)
    c = np.broadcast_to(0.1 * np.arange(9).reshape(3, 3), z.shape).astype(complex)
    assert np.all(fhat_from_phi(c, z, 2, m, g) == 0)
    with pytest.raises(MissingTimeDerivative):
        fhat_from_phi(z, z, 3, m, g)


def test_fhat_term_by_term():
    rng = np.random.default_rng(7)
    g = grid2(16)
    m = model_q3()
    phi0 = 0.3 * random_field(g, 3, rng)
    u = u_from_phi(phi0, g)
    got = fhat_from_phi(phi0, u, 2, m, g)
    d1 = fd_partial(phi0, g, 0)
    d2 = fd_partial(phi0, g, 1)
    d12 = fd_partial(d2, g, 0)
    d11 = fd_partial(d1, g, 0)
    B = m.Bn(2)
    inner = np.zeros_like(phi0)
    for a in range(3):
        for b in range(3):
            inner[..., a, b] = d12[..., a, b] - d11[..., a, b] * B[b]
            for c in range(3):
                inner[..., a, b] -= (d2[..., a, c] - d1[..., a, c] * B[c]) * u[..., c, b]
    want = np.linalg.solve(np.eye(3) + phi0, inner)
    assert np.abs(got - want).max() <= 1e-12 * max(1, np.abs(want).max())


def test_diag_phi_values():
    m = ModelSpec(3, 2, [[1, 0], [2, 0]], S=solve_couplings([[1, 0], [2, 0]]),
                  diag_profiles={(0, 0.0): lambda s: s ** 2, (1, 0.0): lambda s: 0 * s})
    assert diag_phi(0, 0.0, np.array([1.0, 2.0, 3.0]), m) == pytest.approx(81.0)
    assert diag_phi(1, 0.0, np.array([1.0, 2.0, 3.0]), m) == 0
    with pytest.raises(MissingProfile):
        diag_phi(0, 0.5, np.zeros(3), m)


def test_diag_phi_chain_rule():
    m = dataclasses.replace(model_q2(), diag_profiles=profiles(model_q2(), [0.0]))
    g = grid2(64)
    f = diag_phi_field(m, g, 0.0, 0.3)
    d1 = fd_partial(f, g, 0)
    d2 = fd_partial(f, g, 1)
    for a in range(2):
        assert np.abs(d2[..., a, a] - m.Bn(2)[a] * d1[..., a, a]).max() <= 1e-6


def test_phi_time_derivative_zero():
    m = dataclasses.replace(model_q2(), diag_profiles={(a, l): (lambda s: 0.3 + 0 * s)
                                                         for a in range(2) for l in (0.0, 1.0)})
    g = grid2(16)
    st = make_phi_state(m, g, [0.0, 1.0], np.zeros((2,) + g.shape + (2, 2)))
    psi = phi_time_derivative(st)
    assert np.abs(psi.values).max() <= 1e-14


def test_phi_time_derivative_u_zero_antiderivative():
    # phi(0) = 0 off the diagonal and constant diagonals give u = 0; the
    # constraint then fixes psi by d_1-antiderivatives of explicit data.
    m = dataclasses.replace(model_q2(), diag_profiles={(a, l): (lambda s: 0.3 + 0 * s)
                                                         for a in range(2) for l in (0.0, 0.5)})
    g = grid2(64)
    X, Y = g.mesh()
    of = np.zeros((2,) + g.shape + (2, 2), complex)
    of[1, ..., 0, 1] = 0.1 * np.sin(X + 2 * Y)
    of[1, ..., 1, 0] = 0.1 * np.cos(2 * X - Y)
    st = make_phi_state(m, g, [0.0, 0.5], of)
    psi = phi_time_derivative(st)
    assert np.abs(psi.values[0]).max() <= 1e-14
    # d_1 (psi - d_1 phi B^M_b) = -(S^2/S^M) d_1 (d_2 phi - d_1 phi B^2_b), zero mean
    phi1 = st.phi.values[1]
    d1, d2 = fd_partial(phi1, g, 0), fd_partial(phi1, g, 1)
    exact = {(0, 1): (0.1 * np.cos(X + 2 * Y), 0.2 * np.cos(X + 2 * Y)),
             (1, 0): (-0.2 * np.sin(2 * X - Y), 0.1 * np.sin(2 * X - Y))}
    for (a, b), (p1, p2) in exact.items():
        r = m.S[1, a, b] / m.S[2, a, b]
        disc = d1[..., a, b] * m.Bn(3)[b] - r * (d2[..., a, b] - d1[..., a, b] * m.Bn(2)[b])
        assert np.abs(psi.values[1][..., a, b] - disc).max() <= 1e-12
        # against analytic derivatives the gap is the stencil truncation, O(h^4)
        cont = p1 * m.Bn(3)[b] - r * (p2 - p1 * m.Bn(2)[b])
        assert np.abs(psi.values[1][..., a, b] - cont).max() <= 5e-5


def _phi_setup(N=24, nodes=(-0.5, 0.0, 0.5)):
    m0 = model_q2()
    m = dataclasses.replace(m0, diag_profiles=profiles(m0, nodes))
    g = grid2(N)
    X, Y = g.mesh()
    of = np.zeros((len(nodes),) + g.shape + (2, 2), complex)
    for k, l in enumerate(nodes):
        of[k, ..., 0, 1] = 0.2 * np.exp(1j * (X + Y)) * (1 + 0.3 * l)
        of[k, ..., 1, 0] = 0.15 * np.cos(X - Y) * (1 - 0.2 * l)
    return m, g, make_phi_state(m, g, nodes, of)


def test_phi_time_derivative_satisfies_constraint():
    m, g, st = _phi_setup()
    psi, u, fhat = phi_time_derivative(st, return_parts=True)
    for k, lam in enumerate(st.phi.nodes):
        r = constraint_residual(st.phi.values[k], psi.values[k], lam, u, fhat, m, g)
        assert np.abs(r).max() <= 1e-12
    # the diagonal of psi is the x_M transport of the prescribed profiles
    for a in range(2):
        d1 = fd_partial(st.phi.values[1], g, 0)
        assert np.array_equal(psi.values[1][..., a, a], m.Bn(3)[a] * d1[..., a, a])


def test_phi_zero_slice_projects_onto_nl():
    # the off-diagonal of d/dx_M u, computed through psi(0), approaches the nl
    # rate; the discrete product rule only holds up to stencil truncation
    errs = []
    for N in (24, 48):
        m, g, st = _phi_setup(N)
        psi = phi_time_derivative(st)
        phi0 = st.phi.values[1]
        u = u_from_phi(phi0, g)
        du = np.linalg.solve(np.eye(2) + phi0, fd_partial(psi.values[1], g, 0) - psi.values[1] @ u)
        errs.append(np.abs(offdiag(du) - nl_rate(u, m, g)).max())
    assert errs[0] <= 2e-3 and np.log2(errs[0] / errs[1]) >= 3.5, errs


def test_taylor_step_euler_consistency():
    m, g, st = _phi_setup()
    dt = 1e-3
    psi = phi_time_derivative(st)
    new = taylor_step_phi(st, dt)
    fd = (new.phi.values - st.phi.values) / dt
    assert np.abs(offdiag(fd) - offdiag(psi.values)).max() <= 1e-9
    # diagonal regenerated at t + dt: matches psi's diagonal to O(dt)
    diag_err = np.abs(fd - psi.values).max()
    assert diag_err <= 10 * dt
    assert new.t == pytest.approx(dt)


def test_taylor_step_zero_dt_and_zero_psi():
    m, g, st = _phi_setup()
    assert taylor_step_phi(st, 0.0) is st
    mz = dataclasses.replace(model_q2(), diag_profiles={(a, l): (lambda s: 0.1 + 0 * s)
                                                          for a in range(2) for l in (0.0,)})
    z = make_phi_state(mz, g, [0.0], np.zeros((1,) + g.shape + (2, 2)))
    new = taylor_step_phi(z, 0.01)
    assert np.array_equal(offdiag(new.phi.values), offdiag(z.phi.values)) and new.t == 0.01


def test_taylor_converges_to_direct():
    m, g, st = _phi_setup(N=32)
    T = 0.1
    u0 = reconstruct_u(st)
    ref = integrate_direct("nl", u0, m, g, 1e-3, 100, stride=100).states[-1]
    errs = []
    for dt in (0.025, 0.0125, 0.00625):
        s = st
        for _ in range(int(round(T / dt))):
            s = taylor_step_phi(s, dt)
        errs.append(np.abs(offdiag(reconstruct_u(s)) - ref).max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(orders - 1) <= 0.2), (errs, orders)
