"""Radial grids, sampled fields and energy functionals.

Everything downstream (transforms, solvers, norms) works on the three value
types defined here:

    RadialGrid   -- uniform grid on [r_min, r_max]
    RadialState  -- sampled pair (u, u_t) at one time
    Trajectory   -- time-ordered sequence of states sharing one grid

plus the basic quadrature/derivative operations for radial functions in three
space dimensions, where the volume element is 4*pi*r^2 dr.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import numpy.typing as npt

from .errors import ContractViolation, UnsupportedOperation

__all__ = [
    "RadialGrid",
    "RadialState",
    "Trajectory",
    "radial_derivative",
    "quad_radial",
    "exterior_energy",
    "conserved_energy",
    "integral_between",
]


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid with n nodes on [r_min, r_max]."""

    r_min: float
    r_max: float
    n: int

    def __post_init__(self):
        if not self.r_max > self.r_min >= 0.0:
            raise ContractViolation(
                f"need r_max > r_min >= 0, got [{self.r_min}, {self.r_max}]")
        if self.n < 2:
            raise ContractViolation(f"need at least 2 nodes, got n={self.n}")

    @property
    def h(self) -> float:
        return (self.r_max - self.r_min) / (self.n - 1)

    @cached_property
    def r(self) -> npt.NDArray[np.float64]:
        return np.linspace(self.r_min, self.r_max, self.n)

    @property
    def touches_origin(self) -> bool:
        return self.r_min == 0.0

    def index_at(self, radius: float) -> int:
        """Index of the grid node nearest to the given radius."""
        if not (self.r_min <= radius <= self.r_max):
            raise ContractViolation(
                f"radius {radius} outside grid [{self.r_min}, {self.r_max}]")
        return int(round((radius - self.r_min) / self.h))

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Grid with the same range and spacing h/factor (nodes nest)."""
        return RadialGrid(self.r_min, self.r_max, (self.n - 1) * factor + 1)


@dataclass
class RadialState:
    """Sampled radial data (u, u_t) at one instant.

    u and ut must be finite and match the grid length. For grids touching the
    origin the combination w = r*u is the well-behaved unknown; helpers below
    expose it with w(0) = 0.
    """

    grid: RadialGrid
    u: npt.NDArray[np.float64]
    ut: npt.NDArray[np.float64]
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.ut = np.asarray(self.ut, dtype=float)
        if self.u.shape != (self.grid.n,) or self.ut.shape != (self.grid.n,):
            raise ContractViolation(
                f"field length mismatch: grid n={self.grid.n}, "
                f"u {self.u.shape}, ut {self.ut.shape}")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.ut))):
            raise ContractViolation("non-finite field values")

    @property
    def w(self) -> npt.NDArray[np.float64]:
        return self.grid.r * self.u

    @property
    def wt(self) -> npt.NDArray[np.float64]:
        return self.grid.r * self.ut

    def copy(self) -> "RadialState":
        return RadialState(self.grid, self.u.copy(), self.ut.copy(), self.t)

    @staticmethod
    def zero(grid: RadialGrid, t: float = 0.0) -> "RadialState":
        z = np.zeros(grid.n)
        return RadialState(grid, z, z.copy(), t)


@dataclass
class BlowupReport:
    time: float
    radius: float
    masked: bool = False  # True when the excess sits outside the trusted cone


@dataclass
class Trajectory:
    """Time-ordered states on a common grid with uniform step between frames.

    cone_origin, when set to a radius R, marks the run as an exterior problem:
    only the region r > |t| + R is authoritative and mask() reports it.
    """

    states: Sequence[RadialState]
    dt: float
    cone_origin: Optional[float] = None
    scheme: str = "leapfrog"
    blowup: Optional[BlowupReport] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.states) < 1:
            raise ContractViolation("trajectory needs at least one state")
        g = self.states[0].grid
        times = np.array([s.t for s in self.states])
        if len(times) > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise ContractViolation("states must be strictly time-ordered")
            if not np.allclose(steps, self.dt, rtol=1e-9, atol=1e-12):
                raise ContractViolation("non-uniform frame spacing")
        for s in self.states:
            if s.grid is not g and s.grid != g:
                raise ContractViolation("states live on different grids")

    @property
    def grid(self) -> RadialGrid:
        return self.states[0].grid

    @property
    def times(self) -> npt.NDArray[np.float64]:
        return np.array([s.t for s in self.states])

    def state_at(self, t: float) -> RadialState:
        """Stored frame nearest to time t."""
        times = self.times
        i = int(np.argmin(np.abs(times - t)))
        return self.states[i]

    def mask(self, t: float) -> npt.NDArray[np.bool_]:
        """Authoritative nodes at time t (everything, or r > |t| + R)."""
        if self.cone_origin is None:
            return np.ones(self.grid.n, dtype=bool)
        return self.grid.r > abs(t) + self.cone_origin


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def radial_derivative(f: npt.NDArray[np.float64], grid: RadialGrid) -> npt.NDArray[np.float64]:
    """d/dr of sampled values: centered differences inside, one-sided (second
    order) at the two endpoints. Exact for polynomials up to degree 2."""
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise ContractViolation(f"length mismatch: {f.shape} vs grid n={grid.n}")
    return np.gradient(f, grid.h, edge_order=2)


def integral_between(g: npt.NDArray[np.float64], grid: RadialGrid,
                     a: float, b: float) -> float:
    """Trapezoid integral of sampled g(r) dr over [a, b] clipped to the grid.

    Partial end cells use linear interpolation of g at the cut radii, so the
    result is continuous and monotone in the limits.
    """
    a = max(a, grid.r_min)
    b = min(b, grid.r_max)
    if b <= a:
        return 0.0
    r = grid.r
    ga = float(np.interp(a, r, g))
    gb = float(np.interp(b, r, g))
    inside = (r > a) & (r < b)
    pts_r = np.concatenate(([a], r[inside], [b]))
    pts_g = np.concatenate(([ga], g[inside], [gb]))
    return float(np.trapezoid(pts_g, pts_r))


def quad_radial(f: npt.NDArray[np.float64], grid: RadialGrid) -> float:
    """Integral of f over R^3 for radial f: int f(r) 4 pi r^2 dr, trapezoid rule."""
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise ContractViolation(f"length mismatch: {f.shape} vs grid n={grid.n}")
    if not np.all(np.isfinite(f)):
        raise ContractViolation("non-finite integrand")
    return float(np.trapezoid(f * 4.0 * np.pi * grid.r ** 2, grid.r))


def _energy_density(state: RadialState) -> npt.NDArray[np.float64]:
    """(u_r^2 + u_t^2) * 4 pi r^2, the radial density of the energy norm."""
    ur = radial_derivative(state.u, state.grid)
    return (ur ** 2 + state.ut ** 2) * 4.0 * np.pi * state.grid.r ** 2


def exterior_energy(state: RadialState, R: float) -> float:
    """Energy norm of the data restricted to r > R:
    sqrt( int_{r>R} (|u_r|^2 + |u_t|^2) 4 pi r^2 dr ), truncated at the grid
    edge (the tail beyond r_max is not tracked here)."""
    g = state.grid
    if not (g.r_min <= R < g.r_max):
        raise ContractViolation(
            f"R={R} outside grid [{g.r_min}, {g.r_max}); integral is truncated "
            f"at r_max={g.r_max} so R must sit below it")
    dens = _energy_density(state)
    return float(np.sqrt(max(integral_between(dens, g, R, g.r_max), 0.0)))


def conserved_energy(state: RadialState, F) -> float:
    """Total energy E = int( u_t^2/2 + u_r^2/2 + V(r,u) ) dx for a nonlinearity
    F carrying its potential V(r,u) = -int_0^u F(r,v) dv."""
    if getattr(F, "potential", None) is None:
        raise UnsupportedOperation("nonlinearity carries no potential V")
    g = state.grid
    ur = radial_derivative(state.u, g)
    dens = 0.5 * (ur ** 2 + state.ut ** 2) + F.potential(g.r, state.u)
    return quad_radial(dens, g)
