"""Region-restricted space-time norms.

The scattering-size functional is the Y norm, L^5 in time of L^10 in space,
evaluated over moving regions of the (r, t) half-plane:

    Exterior(R)   {r > |t| + R}
    Annulus(a, b) {|t| + a < r < |t| + b}
    Channel(R)    {|t| + R < r < |t| + 2R}

Time integration uses the trajectory's stored frames (trapezoid of the slice
norms raised to the fifth power); spatial slices use the shared partial-cell
trapezoid so values are continuous in the region parameters. Regions are
clipped to the grid and the clipping is reported in the returned diagnostics
rather than silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from .errors import ContractViolation
from .field_core import Trajectory, integral_between

__all__ = [
    "RegionSpec",
    "y_norm",
    "y_norm_detailed",
    "dyadic_channel_norms",
    "source_l1l2_norm",
    "ChannelNorms",
]


@dataclass(frozen=True)
class RegionSpec:
    """Moving radial window (inner + |t|, outer + |t|), outer may be inf."""

    kind: str
    inner: float
    outer: float

    def __post_init__(self):
        if self.inner < 0 or not self.outer > self.inner:
            raise ContractViolation(
                f"need 0 <= inner < outer, got ({self.inner}, {self.outer})")

    @staticmethod
    def exterior(R: float) -> "RegionSpec":
        return RegionSpec("exterior", R, np.inf)

    @staticmethod
    def annulus(a: float, b: float) -> "RegionSpec":
        return RegionSpec("annulus", a, b)

    @staticmethod
    def channel(R: float) -> "RegionSpec":
        if R <= 0:
            raise ContractViolation("channel needs R > 0")
        return RegionSpec("channel", R, 2.0 * R)

    def window(self, t: float) -> Tuple[float, float]:
        return self.inner + abs(t), self.outer + abs(t)

    def label(self) -> str:
        if self.kind == "exterior":
            return f"exterior({self.inner:g})"
        return f"{self.kind}({self.inner:g},{self.outer:g})"


def _slice_integral(state, power: int, lo: float, hi: float) -> float:
    """int_{lo<r<hi} |u|^power 4 pi r^2 dr on one frame."""
    g = state.grid
    dens = np.abs(state.u) ** power * 4.0 * np.pi * g.r ** 2
    return integral_between(dens, g, lo, hi)


def y_norm_detailed(traj: Trajectory, region: RegionSpec) -> Tuple[float, dict]:
    """Y = ( int ( int_{region(t)} |u|^10 dx )^{1/2} dt )^{1/5} plus clipping
    diagnostics. Raises when the region lies entirely off the grid at some
    frame."""
    g = traj.grid
    times = traj.times
    fifth_powers = np.empty(len(times))
    clipped = 0
    for j, s in enumerate(traj.states):
        lo, hi = region.window(s.t)
        if lo >= g.r_max:
            raise ContractViolation(
                f"region {region.label()} at t={s.t:g} starts at r={lo:g}, "
                f"beyond the grid edge r_max={g.r_max:g}")
        if hi > g.r_max and not np.isinf(hi):
            clipped += 1
        fifth_powers[j] = _slice_integral(s, 10, lo, min(hi, g.r_max)) ** 0.5
    y5 = float(np.trapezoid(fifth_powers, times)) if len(times) > 1 else 0.0
    diag = {
        "clipped_frames": clipped,
        "frames": len(times),
        "y5": y5,
    }
    return y5 ** 0.2, diag


def y_norm(traj: Trajectory, region: RegionSpec) -> float:
    return y_norm_detailed(traj, region)[0]


@dataclass
class ChannelNorms:
    k: npt.NDArray[np.int64]
    b: npt.NDArray[np.float64]

    @property
    def l2_sum(self) -> float:
        return float(np.sum(self.b ** 2))

    def tail_p4(self, k_from: int) -> float:
        """sum of b_j^4 over j >= k_from (the construction's tail control)."""
        return float(np.sum(self.b[self.k >= k_from] ** 4))


def dyadic_channel_norms(traj: Trajectory, k_min: int, k_max: int) -> ChannelNorms:
    """b_k = Y norm over Channel(2^k) for k = k_min .. k_max."""
    if k_max < k_min:
        raise ContractViolation("need k_max >= k_min")
    ks = np.arange(k_min, k_max + 1)
    b = np.array([y_norm(traj, RegionSpec.channel(2.0 ** int(k))) for k in ks])
    return ChannelNorms(ks, b)


def source_l1l2_norm(traj: Trajectory, F, region: RegionSpec) -> float:
    """|| chi F(r, t, u) ||_{L1_t L2_x} over the region.

    F may be a Nonlinearity or any object with eval(r, t, u).
    """
    g = traj.grid
    feval = F.eval if hasattr(F, "eval") else F
    times = traj.times
    slice_l2 = np.empty(len(times))
    for j, s in enumerate(traj.states):
        lo, hi = region.window(s.t)
        if lo >= g.r_max:
            raise ContractViolation(
                f"region {region.label()} at t={s.t:g} lies beyond the grid")
        f = np.asarray(feval(g.r, s.t, s.u), dtype=float)
        dens = f ** 2 * 4.0 * np.pi * g.r ** 2
        slice_l2[j] = integral_between(dens, g, lo, min(hi, g.r_max)) ** 0.5
    return float(np.trapezoid(slice_l2, times)) if len(times) > 1 else 0.0
