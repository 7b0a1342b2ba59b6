"""Model data, periodic grids, matrix fields and the numerical primitives
(finite differences, explicit steppers) shared by every other module.

Conventions used throughout the package:

* The independent variables are ``x_1 .. x_M``.  ``x_1 .. x_{M-1}`` are
  periodic spatial axes of a :class:`SpatialGrid` (array axes ``0 .. M-2``),
  and ``x_M`` is the evolution coordinate, stored as the grid's ``t``.
* A matrix field is a plain complex ndarray of shape ``grid.shape + (Q, Q)``.
* Matrix indices ``alpha, beta`` are 0-based in code.  Coordinate numbers
  ``n, i`` keep the mathematical numbering ``1 .. M``, so ``B[n - 1]`` is the
  diagonal of ``B^n`` and ``S[i - 1]`` the coupling table ``S^i``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AxisOutOfRange,
    NonFiniteState,
    NoNonzeroSolution,
    NonPositivePeriod,
    TooFewNodes,
)

VARIANTS = ("nwave", "nls")
ROLES = ("Uhat", "phi", "Fhat")

# central first-derivative stencils, offsets -p..p
_D1 = {
    2: np.array([-1 / 2, 0.0, 1 / 2]),
    4: np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]),
}
_D2 = {
    2: np.array([1.0, -2.0, 1.0]),
    4: np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]),
}


# ---------------------------------------------------------------------------
# model data


@dataclass
class ModelSpec:
    """Dimensions and constant data of one model.

    ``B`` may be given with ``M`` rows (``B^1 .. B^M``) or with ``M - 1``
    rows (``B^2 .. B^M``; ``B^1 = I`` is then prepended).  ``S`` and
    ``g_hat`` likewise accept ``M`` or ``M - 1`` leading entries; row 0 of
    the stored arrays corresponds to ``i = 1`` and is zero.

    ``h`` is an optional callable ``h(n, lam) -> (Q,)`` for the diagonal
    exponents h^n_alpha; it only enters the raw Phi, never Phi^1.
    ``diag_profiles`` maps ``(alpha, lam1)`` to a scalar function of one real
    argument, the prescribed diagonal of the phi family.
    """

    M: int
    Q: int
    B: np.ndarray
    S: np.ndarray | None = None
    variant: str = "nwave"
    g_hat: np.ndarray | None = None
    h: Callable | None = None
    diag_profiles: dict = field(default_factory=dict)
    symmetric: bool = False

    def __post_init__(self):
        M, Q = int(self.M), int(self.Q)
        if M < 2 or Q < 1:
            raise ValueError(f"need M >= 2 and Q >= 1, got M={M}, Q={Q}")
        self.M, self.Q = M, Q
        B = np.asarray(self.B, dtype=float)
        if B.shape == (M - 1, Q):
            B = np.vstack([np.ones(Q), B])
        if B.shape != (M, Q):
            raise ValueError(f"B must have shape ({M}, {Q}) or ({M - 1}, {Q})")
        self.B = B
        self.S = self._tables(self.S, "S", float)
        self.g_hat = self._tables(self.g_hat, "g_hat", complex)
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    def _tables(self, value, name, dtype):
        M, Q = self.M, self.Q
        if value is None:
            return np.zeros((M, Q, Q), dtype=dtype)
        arr = np.asarray(value, dtype=dtype)
        if arr.shape == (M - 1, Q, Q):
            arr = np.concatenate([np.zeros((1, Q, Q), dtype=dtype), arr])
        if arr.shape != (M, Q, Q):
            raise ValueError(f"{name} must have shape ({M}, {Q}, {Q}) or ({M - 1}, {Q}, {Q})")
        return arr

    def Bn(self, n: int) -> np.ndarray:
        """Diagonal of B^n as a length-Q vector (n = 1..M)."""
        return self.B[n - 1]

    def g(self, i: int, lam) -> np.ndarray:
        """g^i(lam) = lam_{i+1} * g_hat^i for a spectral vector ``lam`` of length M+1."""
        if i == 1:
            return np.zeros((self.Q, self.Q), dtype=complex)
        return lam[i] * self.g_hat[i - 1]

    @property
    def integrable(self) -> bool:
        return not np.any(self.g_hat)


@dataclass
class Violation:
    """One violated invariant.  ``i`` is a coordinate number (2..M) and
    ``alpha, beta`` are 1-based matrix indices, as in the mathematics."""

    code: str
    message: str
    i: int | None = None
    alpha: int | None = None
    beta: int | None = None

    def __str__(self):
        idx = [f"{k}={v}" for k, v in (("i", self.i), ("alpha", self.alpha), ("beta", self.beta)) if v is not None]
        return f"[{self.code}] {self.message}" + (f" ({', '.join(idx)})" if idx else "")


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self):
        return [v.code for v in self.violations]

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def __str__(self):
        return "\n".join(str(v) for v in self.violations) or "valid"


def validate_model(m: ModelSpec, evolvable: bool = False, tol: float = 1e-12) -> ValidationReport:
    """Check the algebraic constraints on the model data.

    With ``evolvable=True`` the nwave variant additionally requires
    ``S^M_{ab} != 0`` for every off-diagonal pair, which the evolvers need.
    """
    out = []
    if not np.allclose(m.B[0], 1.0, rtol=0, atol=tol):
        out.append(Violation("B1", "B^1 must be the identity"))
    if np.any(m.g_hat[0]):
        out.append(Violation("g1", "g^1 must vanish"))
    if m.h is not None:
        for lam in (np.zeros(m.M + 1), np.ones(m.M + 1)):
            if np.any(np.asarray(m.h(1, lam)) != 0):
                out.append(Violation("h1", "h^1 must vanish"))
                break

    Q, M = m.Q, m.M
    for a in range(Q):
        for b in range(Q):
            if a == b:
                continue
            gap = m.B[1:, a] - m.B[1:, b]
            total = np.dot(m.S[1:, a, b], gap)
            scale = np.dot(np.abs(m.S[1:, a, b]), np.abs(gap)) + 1.0
            if abs(total) > tol * scale:
                out.append(Violation(
                    "lin-Ub",
                    f"sum_i S^i_ab (B^i_a - B^i_b) = {total:g}, must vanish",
                    alpha=a + 1, beta=b + 1))
            if m.symmetric and b > a:
                for i in range(2, M + 1):
                    if m.S[i - 1, a, b] != m.S[i - 1, b, a]:
                        out.append(Violation("symmetry", "S^i must be symmetric",
                                             i=i, alpha=a + 1, beta=b + 1))
            if evolvable and m.variant == "nwave" and m.S[M - 1, a, b] == 0:
                out.append(Violation("evolvable", "S^M_ab must be nonzero",
                                     i=M, alpha=a + 1, beta=b + 1))

    if m.variant == "nls":
        if Q != 2:
            out.append(Violation("nls-Q", "nls requires Q=2"))
        elif not (np.array_equal(m.B[1], [1.0, -1.0]) and np.array_equal(m.B[M - 1], [1.0, -1.0])):
            out.append(Violation("nls-B", "nls requires B^M = B^2 = diag(1, -1)"))
        if M < 3:
            out.append(Violation("nls-M", "nls requires M >= 3 (two spatial axes)"))
    return ValidationReport(out)


def solve_couplings(B, symmetric: bool = False) -> np.ndarray:
    """Coupling constants S solving sum_i S^i_ab (B^i_a - B^i_b) = 0.

    ``B`` holds the diagonals B^2 .. B^M as rows.  For every pair the
    minimum-norm solution with ``S^M_ab = 1`` is returned.  The result has
    shape ``(M, Q, Q)`` with row 0 (``i = 1``) and the diagonal zero.

    The minimum-norm choice is odd-symmetric in the gaps, so it is already
    symmetric in (a, b); ``symmetric`` is accepted for interface completeness.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] < 2:
        raise ValueError("need at least two diagonals B^2..B^M (M >= 3)")
    Mm1, Q = B.shape
    S = np.zeros((Mm1 + 1, Q, Q))
    for a in range(Q):
        for b in range(Q):
            if a == b:
                continue
            gap = B[:, a] - B[:, b]
            free, last = gap[:-1], gap[-1]
            norm2 = np.dot(free, free)
            if norm2 == 0.0:
                if last != 0.0:
                    raise NoNonzeroSolution(
                        f"pair ({a + 1},{b + 1}): only B^M separates the pair, so S^M must vanish")
                S[-1, a, b] = 1.0
                continue
            S[1:-1, a, b] = -last * free / norm2
            S[-1, a, b] = 1.0
    if symmetric:
        S = 0.5 * (S + np.swapaxes(S, 1, 2))
    return S


# ---------------------------------------------------------------------------
# grids and fields


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid over ``x_1 .. x_{M-1}``; ``t`` is ``x_M``."""

    counts: tuple
    periods: tuple
    origin: tuple = None
    t: float = 0.0

    def __post_init__(self):
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * len(self.counts))

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple:
        return tuple(self.counts)

    @property
    def spacing(self) -> tuple:
        return tuple(L / n for L, n in zip(self.periods, self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))

    def coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.counts[axis])

    def mesh(self) -> list:
        return list(np.meshgrid(*[self.coords(a) for a in range(self.ndim)], indexing="ij"))

    def points(self, t: float | None = None) -> np.ndarray:
        """All nodes as an array ``shape + (M,)`` with the last coordinate ``x_M = t``."""
        t = self.t if t is None else t
        cols = self.mesh() + [np.full(self.shape, float(t))]
        return np.stack(cols, axis=-1)

    def at(self, t: float) -> "SpatialGrid":
        return SpatialGrid(self.counts, self.periods, self.origin, float(t))


def build_grid(periods: Sequence[float], counts: Sequence[int], origin=None, t: float = 0.0) -> SpatialGrid:
    periods = tuple(float(p) for p in periods)
    counts = tuple(int(c) for c in counts)
    if len(periods) != len(counts):
        raise ValueError("periods and counts differ in length")
    for p in periods:
        if not p > 0:
            raise NonPositivePeriod(f"period {p} must be positive")
    for c in counts:
        if c < 4:
            raise TooFewNodes(f"{c} nodes per axis, need at least 4")
    if origin is not None:
        origin = tuple(float(o) for o in origin)
    return SpatialGrid(counts, periods, origin, float(t))


def zeros_field(grid: SpatialGrid, Q: int) -> np.ndarray:
    return np.zeros(grid.shape + (Q, Q), dtype=complex)


def check_field(grid: SpatialGrid, f: np.ndarray, Q: int | None = None) -> np.ndarray:
    f = np.asarray(f)
    if f.shape[: grid.ndim] != grid.shape or f.ndim != grid.ndim + 2:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    if Q is not None and f.shape[-2:] != (Q, Q):
        raise ValueError(f"field is not {Q}x{Q}")
    if not np.all(np.isfinite(f)):
        raise NonFiniteState("field contains NaN or Inf")
    return f


def offdiag(f: np.ndarray) -> np.ndarray:
    """Copy of ``f`` with the trailing matrix diagonal zeroed."""
    Q = f.shape[-1]
    return f * (1 - np.eye(Q))


def diagonal(f: np.ndarray) -> np.ndarray:
    Q = f.shape[-1]
    return f * np.eye(Q)


@dataclass
class SpectralFamily:
    """Matrix fields indexed by real lambda_1 nodes (one of which is 0)."""

    nodes: np.ndarray
    values: np.ndarray
    grid: SpatialGrid
    role: str = "Uhat"

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim != 1 or np.any(np.diff(self.nodes) <= 0):
            raise ValueError("lambda_1 nodes must be strictly increasing")
        if np.count_nonzero(self.nodes == 0.0) != 1:
            raise ValueError("lambda_1 nodes must contain 0 exactly once")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[:1 + self.grid.ndim] != (len(self.nodes),) + self.grid.shape:
            raise ValueError("family values do not match nodes and grid")

    @property
    def zero_index(self) -> int:
        return int(np.flatnonzero(self.nodes == 0.0)[0])

    @property
    def Q(self) -> int:
        return self.values.shape[-1]

    def at_zero(self) -> np.ndarray:
        return self.values[self.zero_index]

    def with_values(self, values, grid=None) -> "SpectralFamily":
        return SpectralFamily(self.nodes.copy(), values, grid or self.grid, self.role)


# ---------------------------------------------------------------------------
# finite differences


def _check_axis(grid: SpatialGrid, axis: int):
    if not 0 <= axis < grid.ndim:
        raise AxisOutOfRange(f"axis {axis} outside 0..{grid.ndim - 1}")


def _apply_stencil(f, coeffs, axis):
    # paired differences keep constants exactly in the null space
    p = len(coeffs) // 2
    out = np.zeros(f.shape, dtype=np.result_type(f, float))
    odd = coeffs[p] == 0.0 and np.allclose(coeffs, -coeffs[::-1])
    for j in range(1, p + 1):
        fwd, bwd = np.roll(f, -j, axis=axis), np.roll(f, j, axis=axis)
        if odd:
            out += coeffs[p + j] * (fwd - bwd)
        else:
            out += coeffs[p + j] * ((fwd - f) + (bwd - f))
    return out


def fd_partial(f: np.ndarray, grid: SpatialGrid, axis: int, accuracy: int = 4) -> np.ndarray:
    """Central periodic first derivative along a spatial axis (0-based,
    axis ``a`` is ``x_{a+1}``).  Grid axes must lead the array shape."""
    _check_axis(grid, axis)
    if accuracy not in _D1:
        raise ValueError("accuracy must be 2 or 4")
    return _apply_stencil(f, _D1[accuracy], axis) / grid.spacing[axis]


def fd_second(f: np.ndarray, grid: SpatialGrid, axis: int, accuracy: int = 4) -> np.ndarray:
    _check_axis(grid, axis)
    if accuracy not in _D2:
        raise ValueError("accuracy must be 2 or 4")
    return _apply_stencil(f, _D2[accuracy], axis) / grid.spacing[axis] ** 2


def laplacian(f: np.ndarray, grid: SpatialGrid, accuracy: int = 4) -> np.ndarray:
    out = fd_second(f, grid, 0, accuracy)
    for a in range(1, grid.ndim):
        out = out + fd_second(f, grid, a, accuracy)
    return out


def fd_matrix(n: int, h: float, accuracy: int = 4) -> np.ndarray:
    """Dense periodic first-derivative matrix consistent with :func:`fd_partial`."""
    coeffs = _D1[accuracy]
    p = len(coeffs) // 2
    D = np.zeros((n, n))
    for k, c in enumerate(coeffs):
        if c != 0.0:
            D += c * np.roll(np.eye(n), k - p, axis=1)
    return D / h


def fd_sampled(func: Callable, x: np.ndarray, axis: int, h: float, accuracy: int = 4):
    """Central difference of a closed-form ``func(points)`` along coordinate
    ``axis`` of the point array ``x`` (shape ``(..., dim)``).  Used where the
    sampled function is not periodic."""
    coeffs = _D1[accuracy]
    p = len(coeffs) // 2
    out = 0
    for k, c in enumerate(coeffs):
        if c != 0.0:
            shifted = x.copy()
            shifted[..., axis] += (k - p) * h
            out = out + c * func(shifted)
    return out / h


# ---------------------------------------------------------------------------
# time stepping


def step(state, rhs: Callable, dt: float, scheme: str = "rk4"):
    """One explicit step of dy/dt = rhs(y); ``euler`` or classical ``rk4``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if scheme not in ("euler", "rk4"):
        raise ValueError(f"unknown scheme {scheme!r}")
    # blow-up is reported below, not warned about on the way
    with np.errstate(over="ignore", invalid="ignore"):
        if scheme == "euler":
            new = state + dt * rhs(state)
        else:
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * dt * k1)
            k3 = rhs(state + 0.5 * dt * k2)
            k4 = rhs(state + dt * k3)
            new = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise NonFiniteState("state became non-finite (unstable step or CFL violation)")
    return new


def default_dt(grid: SpatialGrid, variant: str) -> float:
    h = min(grid.spacing)
    return 0.2 * h if variant == "nwave" else 0.2 * h * h


# ---------------------------------------------------------------------------
# residual reports


@dataclass
class ResidualReport:
    equation: str
    linf: float
    l2: float
    counts: tuple = ()
    spacing: tuple = ()
    dt: float | None = None
    stencil: int | None = None
    wall_time: float = 0.0
    notes: str = ""

    HEADER = "# equation\tLinf\tL2\th\tdt\tstencil\tnotes"

    def tsv(self) -> str:
        h = ",".join(f"{s:.17g}" for s in self.spacing) or "-"
        dt = "-" if self.dt is None else f"{self.dt:.17g}"
        st = "-" if self.stencil is None else str(self.stencil)
        return f"{self.equation}\t{self.linf:.17g}\t{self.l2:.17g}\t{h}\t{dt}\t{st}\t{self.notes or '-'}"


def norms(r: np.ndarray, cell_volume: float = 1.0, ndim: int | None = None) -> tuple:
    """Pointwise Frobenius norm of a residual field, then (max, grid L2)."""
    pw = np.sqrt(np.sum(np.abs(r) ** 2, axis=(-2, -1)))
    linf = float(pw.max()) if pw.size else 0.0
    l2 = float(np.sqrt(np.sum(pw ** 2) * cell_volume))
    return linf, l2


def make_report(equation: str, r: np.ndarray, grid: SpatialGrid | None = None, *, dt=None,
                stencil=None, started: float | None = None, notes: str = "") -> ResidualReport:
    vol = grid.cell_volume if grid is not None else 1.0
    linf, l2 = norms(r, vol)
    wall = time.perf_counter() - started if started is not None else 0.0
    return ResidualReport(
        equation, linf, l2,
        counts=grid.counts if grid is not None else (),
        spacing=grid.spacing if grid is not None else (),
        dt=dt, stencil=stencil, wall_time=wall, notes=notes)
