"""Exact linear theory for radial free waves in three dimensions.

A free wave u(r, t) is represented by its radiation profile G (an L^2 function
of retarded time s). The propagator, its inverse, and the energy identity are
all closed formulas:

    u(r, t)  = (1/r) * int_{t-r}^{t+r} G(s) ds
    u_t(r,t) = (G(t+r) - G(t-r)) / r
    u0(r)    = (1/r) * int_{-r}^{r} G(s) ds
    u1(r)    = (G(r) - G(-r)) / r
    G(r)     = ((r u0)'(r) + r u1(r)) / 2,   G(-r) = ((r u0)'(r) - r u1(r)) / 2

    ||(u0, u1)||^2_{H1 x L2} = 8 pi ||G||^2_{L2(R)}

The sign in u1 follows from differentiating the propagator in t at t = 0; the
formulas above are mutually consistent (the t = 0 slice of the propagator is
exactly the data reconstruction).

Profiles are extended by zero outside their declared range.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import numpy.typing as npt
from scipy.integrate import cumulative_trapezoid

from .errors import ContractViolation
from .field_core import RadialGrid, RadialState, radial_derivative

__all__ = [
    "RadiationProfile",
    "profile_from_data",
    "data_from_profile",
    "linear_evolve",
    "plus_profile",
    "profile_energy",
    "random_smooth_profile",
]


@dataclass
class RadiationProfile:
    """Sampled retarded-time profile G(s) on a uniform grid over [s_min, s_max]."""

    s_min: float
    s_max: float
    G: npt.NDArray[np.float64]

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        if self.s_max <= self.s_min:
            raise ContractViolation("need s_max > s_min")
        if self.G.ndim != 1 or self.G.size < 2:
            raise ContractViolation("profile needs at least 2 samples")
        if not np.all(np.isfinite(self.G)):
            raise ContractViolation("non-finite profile values")

    @property
    def n(self) -> int:
        return self.G.size

    @property
    def h(self) -> float:
        return (self.s_max - self.s_min) / (self.n - 1)

    @cached_property
    def s(self) -> npt.NDArray[np.float64]:
        return np.linspace(self.s_min, self.s_max, self.n)

    @cached_property
    def _cumulative(self) -> npt.NDArray[np.float64]:
        # int_{s_min}^{s} G, used by the propagator
        return cumulative_trapezoid(self.G, self.s, initial=0.0)

    def __call__(self, x) -> npt.NDArray[np.float64]:
        """Pointwise values with zero extension outside the declared range."""
        return np.interp(x, self.s, self.G, left=0.0, right=0.0)

    def integral(self, a: float, b: float) -> npt.NDArray[np.float64]:
        """int_a^b G(s) ds with zero extension outside the range."""
        c = self._cumulative
        cb = np.interp(b, self.s, c)  # clamps to end values = zero extension
        ca = np.interp(a, self.s, c)
        return cb - ca

    def total_integral(self) -> float:
        return float(self._cumulative[-1])

    def l2_norm_sq(self) -> float:
        return float(np.trapezoid(self.G ** 2, self.s))

    def shifted(self, t0: float) -> "RadiationProfile":
        """Profile s -> G(s + t0), i.e. the same samples on a shifted axis."""
        return RadiationProfile(self.s_min - t0, self.s_max - t0, self.G.copy())

    @staticmethod
    def zero(half_range: float = 1.0, n: int = 257) -> "RadiationProfile":
        return RadiationProfile(-half_range, half_range, np.zeros(n))


def profile_from_data(state: RadialState) -> RadiationProfile:
    """Radiation profile of the free wave with data (u0, u1) at t = 0.

    Inverts the data reconstruction formulas; the result lives on the
    symmetric grid s in [-r_max, r_max] at the grid spacing of the state.
    """
    g = state.grid
    if state.t != 0.0:
        raise ContractViolation("profile_from_data expects a t=0 state")
    if not g.touches_origin:
        raise ContractViolation("data grid must include the origin")
    dw0 = radial_derivative(state.w, g)
    w1 = g.r * state.ut
    G = np.empty(2 * g.n - 1)
    G[g.n - 1:] = 0.5 * (dw0 + w1)
    G[g.n - 1::-1] = 0.5 * (dw0 - w1)
    return RadiationProfile(-g.r_max, g.r_max, G)


def linear_evolve(G: RadiationProfile, t: float, grid: RadialGrid) -> RadialState:
    """Free wave generated by profile G, sampled on the grid at time t.

    Exact up to the quadrature of G; the profile is treated as zero outside
    its declared range.
    """
    r = grid.r
    u = np.empty(grid.n)
    ut = np.empty(grid.n)
    pos = r > 0
    rp = r[pos]
    u[pos] = G.integral(t - rp, t + rp) / rp
    ut[pos] = (G(t + rp) - G(t - rp)) / rp
    if grid.touches_origin:
        # r -> 0 limits: 2 G(t) and 2 G'(t)
        u[0] = 2.0 * float(G(t))
        ut[0] = float(G(t + G.h) - G(t - G.h)) / G.h
    return RadialState(grid, u, ut, t=t)


def data_from_profile(G: RadiationProfile, grid: Optional[RadialGrid] = None) -> RadialState:
    """Initial data (u0, u1) of the free wave with profile G.

    This is the t = 0 slice of the propagator, so linear_evolve(G, 0, grid)
    agrees with it exactly. Default grid: [0, s_max] at the profile spacing.
    """
    if grid is None:
        s_max = max(abs(G.s_min), abs(G.s_max))
        n = max(int(round(s_max / G.h)) + 1, 2)
        grid = RadialGrid(0.0, s_max, n)
    return linear_evolve(G, 0.0, grid)


def plus_profile(Gm: RadiationProfile) -> RadiationProfile:
    """The opposite-direction profile G+(s) = -G-(-s); an involution."""
    return RadiationProfile(-Gm.s_max, -Gm.s_min, -Gm.G[::-1].copy())


def profile_energy(G: RadiationProfile) -> float:
    """8 pi ||G||^2_{L2}; equals the H1 x L2 energy of the matching data."""
    return 8.0 * np.pi * G.l2_norm_sq()


def random_smooth_profile(seed: int, n: int = 4097, support: float = 1.0,
                          modes: int = 6, amplitude: float = 1.0) -> RadiationProfile:
    """Seeded smooth profile, compactly supported in [-support, support].

    A band-limited trigonometric sum under a C-infinity bump window; used by
    the verify suite and the property sweeps.
    """
    rng = np.random.default_rng(seed)
    s = np.linspace(-support, support, n)
    x = s / support
    window = np.zeros(n)
    inner = np.abs(x) < 1.0
    window[inner] = np.exp(1.0 - 1.0 / (1.0 - x[inner] ** 2))
    a = rng.standard_normal(modes)
    b = rng.standard_normal(modes)
    G = np.zeros(n)
    for j in range(modes):
        G += a[j] * np.cos((j + 1) * np.pi * x) + b[j] * np.sin((j + 1) * np.pi * x)
    G *= amplitude * window / np.sqrt(modes)
    return RadiationProfile(-support, support, G)
