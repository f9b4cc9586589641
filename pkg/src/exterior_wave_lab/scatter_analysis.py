"""Radiation-profile extraction and scattering diagnostics for finished runs.

The reduced field w = r u of a free wave splits into null components,
w = G(t + r) - G(t - r), so the two null derivatives isolate one component
each:

    (w_t - w_r) / 2 = -G(t - r)   read at r = s + t   ->  -G(-s) =: G_plus(s)
    (w_t + w_r) / 2 =  G(t + r)   read at r = s - t   ->   G(s)

The first line is the outgoing reading (direction "+", late positive times),
the second the incoming one (direction "-", early negative times). For a free
wave the readings are exact at every probe time; for a nonlinear run the
source contributes along the cone, and stabilization of the reading across
dyadic probe times is the convergence proxy. The raw probes r u_t and
-+ r u_r bracket the reading (they differ from it by u, an O(1/r) term), and
their gap is recorded per probe time as a convergence diagnostic.

A source F acting over the exterior region perturbs the outgoing reading by
at most PROFILE_SOURCE_CONSTANT times its L1_t L2_x norm there; the constant
comes from the Duhamel formula for the reduced field and energy flux through
the cone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt

from .errors import ContractViolation
from .field_core import RadialState, Trajectory, exterior_energy, radial_derivative
from .linear_radiation import (
    RadiationProfile,
    linear_evolve,
    plus_profile,
    profile_from_data,
)
from .spacetime_norms import RegionSpec, y_norm

__all__ = [
    "PROFILE_SOURCE_CONSTANT",
    "CharacteristicNumber",
    "ProfileEstimate",
    "ResidualCurve",
    "VerdictConfig",
    "characteristic_number",
    "equiv_residual",
    "extract_profile",
    "scattering_verdict",
    "time_slice",
]

# L2 growth of the outgoing reading per unit L1_t L2_x of source,
# 1 / (2 sqrt(2 pi)).
PROFILE_SOURCE_CONSTANT = 1.0 / (2.0 * np.sqrt(2.0 * np.pi))


@dataclass
class ProfileEstimate:
    """Profile reading stabilized over dyadic probe times.

    G is the reading at the last (largest |t|) probe time on the common
    retarded-time window. discrepancies[i] is the L2 gap between the two raw
    probes at probe_times[i]; changes[i] is the relative L2 change of the
    reading from probe i to probe i+1. converged is set only when the last
    change is below the tolerance the extraction ran with.
    """

    G: RadiationProfile
    direction: str
    probe_times: npt.NDArray[np.float64]
    discrepancies: npt.NDArray[np.float64]
    changes: npt.NDArray[np.float64]
    converged: bool
    rel_tol: float


def _l2(vals: npt.NDArray[np.float64], s: npt.NDArray[np.float64]) -> float:
    return float(np.sqrt(np.trapezoid(vals ** 2, s)))


def _cone_split_derivative(w, grid, t, cone_origin):
    """d/dr of w with stencils kept on one side of the cone r = |t| + R.

    Exterior runs switch the source on across that surface and carry any kink
    of the correction data along it, so a centered stencil straddling it
    degrades to first order exactly where the reading is used. Both one-sided
    pieces stay second order.
    """
    if cone_origin is None:
        return radial_derivative(w, grid)
    j = int(np.searchsorted(grid.r, cone_origin + abs(t) - 0.5 * grid.h))
    if j < 3 or j > grid.n - 3:
        return radial_derivative(w, grid)
    wr = np.empty_like(w)
    wr[:j] = np.gradient(w[:j], grid.h, edge_order=2)
    wr[j:] = np.gradient(w[j:], grid.h, edge_order=2)
    return wr


def extract_profile(traj: Trajectory, direction: str = "+",
                    R_restrict: Optional[float] = None,
                    rel_tol: float = 1e-2,
                    n_times: int = 3) -> ProfileEstimate:
    """Read the radiation profile of a run along its outgoing or incoming rays.

    direction "+" probes the latest positive times and returns the outgoing
    profile G_plus(s) on s = r - t; direction "-" probes the most negative
    times and returns G(s) on s = r + t. Probe times are dyadic fractions of
    the run length, snapped to stored frames. The returned window is the
    intersection of the per-time valid windows:

      s >= grid.r_min - |t|, s >= cone radius (exterior runs), s >= R_restrict,
      s <= r_max - |t| - 2h  (the reading needs r = s + |t| on the grid).

    The caller is responsible for sizing the grid so the window covers the
    support of interest; the outer boundary holds the reduced field fixed,
    which is exact until the field arrives there.
    """
    if direction not in ("+", "-"):
        raise ContractViolation(f"direction must be '+' or '-', got {direction!r}")
    if n_times < 2:
        raise ContractViolation("need at least two probe times")
    times = traj.times
    if direction == "+":
        horizon = float(times.max())
        if horizon <= 0.0:
            raise ContractViolation("'+' extraction needs frames at positive times")
    else:
        horizon = float(times.min())
        if horizon >= 0.0:
            raise ContractViolation("'-' extraction needs frames at negative times")
    candidates = [horizon / 2.0 ** k for k in range(n_times - 1, -1, -1)]
    idx = []
    for c in candidates:
        i = int(np.argmin(np.abs(times - c)))
        if i not in idx:
            idx.append(i)
    probe_times = times[idx]
    if len(idx) < 2:
        raise ContractViolation(
            "probe times collapse onto a single stored frame; store more frames")

    g = traj.grid
    lo = g.r_min - np.abs(probe_times)
    if traj.cone_origin is not None:
        lo = np.maximum(lo, traj.cone_origin)
    if R_restrict is not None:
        lo = np.maximum(lo, R_restrict)
    hi = g.r_max - np.abs(probe_times) - 2.0 * g.h
    s_lo = float(lo.max())
    s_hi = float(hi.min())
    if s_hi - s_lo < 8.0 * g.h:
        raise ContractViolation(
            f"common probe window [{s_lo:.3g}, {s_hi:.3g}] too small; enlarge "
            f"r_max or shorten the probe horizon")
    n_s = int(np.floor((s_hi - s_lo) / g.h)) + 1
    s = s_lo + g.h * np.arange(n_s)

    readings = []
    discrepancies = []
    sign = -1.0 if direction == "+" else 1.0
    for t in probe_times:
        state = traj.state_at(float(t))
        w = state.w
        wt = state.wt
        wr = _cone_split_derivative(w, g, float(t), traj.cone_origin)
        reading = 0.5 * (wt + sign * wr)
        probe_a = wt                              # r u_t
        probe_b = sign * (wr - state.u)           # -+ r u_r
        r_query = s + abs(t)
        readings.append(np.interp(r_query, g.r, reading))
        a = np.interp(r_query, g.r, probe_a)
        b = np.interp(r_query, g.r, probe_b)
        discrepancies.append(_l2(a - b, s))

    changes = []
    for prev, cur in zip(readings, readings[1:]):
        scale = max(_l2(cur, s), 1e-300)
        changes.append(_l2(cur - prev, s) / scale)
    converged = bool(changes[-1] < rel_tol)

    return ProfileEstimate(
        G=RadiationProfile(float(s[0]), float(s[-1]), readings[-1]),
        direction=direction,
        probe_times=np.asarray(probe_times, dtype=float),
        discrepancies=np.asarray(discrepancies, dtype=float),
        changes=np.asarray(changes, dtype=float),
        converged=converged,
        rel_tol=rel_tol,
    )


@dataclass
class ResidualCurve:
    """t -> squared energy of (u - v) restricted to r > |t| + R."""

    times: npt.NDArray[np.float64]
    values: npt.NDArray[np.float64]
    R: float

    def at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def final(self) -> float:
        return float(self.values[-1])

    def dyadic_samples(self, levels: int = 3) -> npt.NDArray[np.float64]:
        """Curve values at the times T/2^(levels-1), ..., T/2, T."""
        T = float(np.max(np.abs(self.times)))
        out = []
        for k in range(levels - 1, -1, -1):
            target = np.sign(self.times[-1]) * T / 2.0 ** k
            i = int(np.argmin(np.abs(self.times - target)))
            out.append(self.values[i])
        return np.asarray(out)

    def dyadic_decreasing(self, levels: int = 3, slack: float = 1.0) -> bool:
        v = self.dyadic_samples(levels)
        return bool(np.all(v[1:] <= v[:-1] * slack + 1e-300))


def equiv_residual(u_traj: Trajectory, v_traj: Trajectory, R: float) -> ResidualCurve:
    """Exterior energy gap between two runs, squared, frame by frame.

    Both runs must share the grid and the frame times. The curve decaying to
    zero is the numerical witness that the runs are asymptotically
    equivalent outside the R-cone.
    """
    if u_traj.grid != v_traj.grid:
        raise ContractViolation("runs live on different grids")
    tu, tv = u_traj.times, v_traj.times
    if len(tu) != len(tv) or not np.allclose(tu, tv, rtol=1e-9, atol=1e-12):
        raise ContractViolation("runs store different frame times")
    g = u_traj.grid
    values = np.empty(len(tu))
    for i, (su, sv) in enumerate(zip(u_traj.states, v_traj.states)):
        radius = abs(su.t) + R
        if radius >= g.r_max:
            raise ContractViolation(
                f"cone r > |t|+R leaves the grid at t={su.t:.3g}; enlarge r_max")
        diff = RadialState(g, su.u - sv.u, su.ut - sv.ut, t=su.t)
        values[i] = exterior_energy(diff, radius) ** 2
    return ResidualCurve(times=np.asarray(tu, dtype=float), values=values, R=R)


@dataclass
class CharacteristicNumber:
    """Two independent estimates of the 1/r-tail coefficient of u - v.

    alpha_fit is the windowed mean of r (u - v); alpha_int integrates the
    profile of the difference data over the resolved retarded-time range.
    missed_tail_bound scales the profile magnitude at the window edge by the
    resolved half-range, a crude continuation bound on what the truncation
    drops; reliable_int requires it to stay below 5% of the estimate.
    """

    alpha_fit: float
    alpha_int: float
    agreement: float
    fit_residual: float
    missed_tail_bound: float
    reliable_fit: bool
    reliable_int: bool
    window: tuple


def characteristic_number(u_state: RadialState, v_state: RadialState,
                          fit_window: Optional[tuple] = None,
                          noise_frac: float = 0.1,
                          edge_frac: float = 0.05) -> CharacteristicNumber:
    """Estimate the tail coefficient alpha of u relative to v two ways.

    Both states must share the grid (touching the origin) and the time. The
    fit window defaults to [0.5 r_max, 0.9 r_max]; when the states carry an
    outgoing wave, pass a window that excludes it.
    """
    if u_state.grid != v_state.grid:
        raise ContractViolation("states live on different grids")
    if abs(u_state.t - v_state.t) > 1e-12:
        raise ContractViolation("states must be simultaneous")
    g = u_state.grid
    if not g.touches_origin:
        raise ContractViolation(
            "profile route needs an origin grid; fill the interior first")
    r1, r2 = fit_window if fit_window is not None else (0.5 * g.r_max, 0.9 * g.r_max)
    if not (g.r_min <= r1 < r2 <= g.r_max):
        raise ContractViolation(f"fit window [{r1}, {r2}] outside grid")
    sel = (g.r >= r1) & (g.r <= r2)
    if int(sel.sum()) < 8:
        raise ContractViolation("fit window holds fewer than 8 samples")

    wdiff = g.r * (u_state.u - v_state.u)
    alpha_fit = float(np.mean(wdiff[sel]))
    fit_residual = float(np.sqrt(np.mean((wdiff[sel] - alpha_fit) ** 2)))
    reliable_fit = fit_residual <= noise_frac * max(abs(alpha_fit), 1e-12)

    diff_now = RadialState(g, u_state.u - v_state.u, u_state.ut - v_state.ut, t=0.0)
    G = profile_from_data(diff_now)
    alpha_int = float(G.total_integral())
    edge = (1.0 - edge_frac) * g.r_max
    tail_density = float(np.max(np.abs(G.G[np.abs(G.s) >= edge]), initial=0.0))
    missed_tail_bound = tail_density * g.r_max
    reliable_int = missed_tail_bound <= 0.05 * max(abs(alpha_int), 1e-12)

    agreement = abs(alpha_fit - alpha_int) / max(abs(alpha_fit), abs(alpha_int), 1e-12)
    return CharacteristicNumber(
        alpha_fit=alpha_fit,
        alpha_int=alpha_int,
        agreement=float(agreement),
        fit_residual=fit_residual,
        missed_tail_bound=missed_tail_bound,
        reliable_fit=bool(reliable_fit),
        reliable_int=bool(reliable_int),
        window=(float(r1), float(r2)),
    )


def time_slice(traj: Trajectory, t0: float, t1: float) -> Trajectory:
    """Sub-trajectory of the stored frames with t0 <= t <= t1 (inclusive)."""
    if t1 <= t0:
        raise ContractViolation("need t1 > t0")
    pad = 1e-9 * max(traj.dt, 1.0)
    states = [s for s in traj.states if t0 - pad <= s.t <= t1 + pad]
    if not states:
        raise ContractViolation(f"no stored frames in [{t0}, {t1}]")
    return Trajectory(states=states, dt=traj.dt, cone_origin=traj.cone_origin,
                      scheme=traj.scheme, blowup=traj.blowup,
                      diagnostics=dict(traj.diagnostics))


@dataclass(frozen=True)
class VerdictConfig:
    """Heuristic thresholds behind the tri-state verdict; all tunable.

    tail_frac bounds the share of the total Y^5 mass the last dyadic time
    window may carry; resid_frac bounds the final residual against the
    initial exterior energy (squared). Neither is a proved rate.
    """

    tail_frac: float = 0.1
    resid_frac: float = 0.01
    n_windows: int = 4
    n_probe_times: int = 3


def scattering_verdict(traj: Trajectory, R: float,
                       config: VerdictConfig = VerdictConfig()) -> str:
    """Classify a finished forward run outside the R-cone.

    Returns "blowup" when the amplitude cap tripped in the authoritative
    region; "scatters" when the dyadic Y-norm windows look summable AND the
    run is asymptotically close to its own extracted free wave; otherwise
    "undecided".
    """
    if traj.blowup is not None and not traj.blowup.masked:
        return "blowup"
    times = traj.times
    T = float(times.max())
    if T <= 0.0:
        raise ContractViolation("verdict needs a forward run")

    region = RegionSpec.exterior(R)
    edges = [0.0] + [T / 2.0 ** k for k in range(config.n_windows - 1, -1, -1)]
    inc5 = []
    for a, b in zip(edges, edges[1:]):
        window = time_slice(traj, a, b)
        inc5.append(y_norm(window, region) ** 5)
    total5 = float(sum(inc5))
    if total5 == 0.0:
        return "scatters"
    tail_ok = inc5[-1] <= config.tail_frac * total5

    # Full-window extraction: the reading must keep the profile mass at small
    # s, since lim w = integral of G sets the 1/r tail of the comparison wave.
    # Exterior runs are already restricted to their authoritative cone.
    est = extract_profile(traj, "+", n_times=config.n_probe_times)
    G_free = plus_profile(est.G)
    g = traj.grid
    v_states = [linear_evolve(G_free, float(t), g) for t in times]
    v_traj = Trajectory(states=v_states, dt=traj.dt, scheme="synthetic")
    curve = equiv_residual(traj, v_traj, R)

    e0_sq = exterior_energy(traj.states[0], R) ** 2
    if e0_sq == 0.0:
        return "scatters"
    resid_ok = curve.final() <= config.resid_frac * e0_sq
    decay_ok = (curve.dyadic_decreasing()
                or curve.final() <= 0.1 * config.resid_frac * e0_sq)
    if tail_ok and resid_ok and decay_ok:
        return "scatters"
    return "undecided"
