"""The Taylor algorithm on the phi representation.

Diagonal profiles are prescribed functions of the transport variable; the
off-diagonal part of phi is advanced by first-order Taylor steps.  The
reconstructed u converges at first order in dt to a direct integration.
"""

import dataclasses

import numpy as np

from dressing_lab import (
    ModelSpec,
    build_grid,
    integrate_direct,
    make_phi_state,
    offdiag,
    reconstruct_u,
    solve_couplings,
    taylor_step_phi,
)

B = [[1.0, -1.0], [2.0, 1.0]]
nodes = (-0.5, 0.0, 0.5)
prof = {(a, l): (lambda s, a=a, l=l: 0.2 * np.sin(s + a) + 0.05 * l * np.cos(s))
        for a in range(2) for l in nodes}
m = dataclasses.replace(ModelSpec(3, 2, B, S=solve_couplings(B)), diag_profiles=prof)

grid = build_grid([2 * np.pi, 2 * np.pi], [32, 32])
X, Y = grid.mesh()
of = np.zeros((3,) + grid.shape + (2, 2), complex)
for k, l in enumerate(nodes):
    of[k, ..., 0, 1] = 0.2 * np.exp(1j * (X + Y)) * (1 + 0.3 * l)
    of[k, ..., 1, 0] = 0.15 * np.cos(X - Y) * (1 - 0.2 * l)
state = make_phi_state(m, grid, nodes, of)

# %% reference: direct integration from the reconstructed u(., 0)
T = 0.1
ref = integrate_direct("nl", reconstruct_u(state), m, grid, 1e-3, 100, stride=100).states[-1]

# %% halve dt twice; the error should halve too
prev = None
for dt in (1e-2, 5e-3, 2.5e-3):
    s = state
    for _ in range(int(round(T / dt))):
        s = taylor_step_phi(s, dt)
    err = np.abs(offdiag(reconstruct_u(s)) - ref).max()
    order = "" if prev is None else f"  order={np.log2(prev / err):.2f}"
    print(f"dt={dt:.1e}  error={err:.3e}{order}")
    prev = err
