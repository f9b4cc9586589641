"""Time evolution of the radial semilinear wave equation.

The radial problem u_tt - u_rr - (2/r) u_r = F(r, t, u) is evolved in the
reduced unknown w = r u, for which

    w_tt - w_rr = r F(r, t, w / r),      w(0, t) = 0.

The factor r on the source follows from Delta u = w_rr / r; equivalently the
static identity w_r(r) = int_r^inf tau F(tau, w/tau) dtau, which the rest of
the laboratory relies on.

Scheme: explicit leapfrog, second order in space and time. The outer boundary
is causal padding: the grid must extend past (data support) + T so nothing
ever reaches it, and the last node is simply held. Exterior problems are run
on the whole grid with the source cut off by the indicator of
{r > |t| + R} and the interior filled by a C^1 clamp of the boundary value;
finite speed of propagation makes the fill irrelevant in the trusted region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import numpy.typing as npt
from scipy.interpolate import CubicSpline

from .errors import ContractViolation
from .field_core import BlowupReport, RadialGrid, RadialState, Trajectory

__all__ = [
    "Nonlinearity",
    "evolve",
    "evolve_exterior",
    "duhamel_linear",
    "self_convergence",
    "ConvergenceReport",
]

_CAP_DEFAULT = 1.0e6


@dataclass
class Nonlinearity:
    """Evaluator for the source F(r, t, u) with its structural flags.

    eval(r, t, u) must be vectorized over r and u. potential, when present,
    is V(r, u) = -int_0^u F(r, v) dv and enables conserved_energy. gamma is
    the growth constant in |F| <= gamma |u|^5; the bound (and the defocusing
    sign u F <= 0 when flagged) is spot-checked on construction.
    """

    name: str
    eval: Callable
    potential: Optional[Callable] = None
    gamma: float = 1.0
    defocusing: bool = False
    autonomous: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise ContractViolation("gamma must be nonnegative")
        self._spot_check()

    def _spot_check(self, n: int = 64):
        rng = np.random.default_rng(12345)
        r = 10.0 ** rng.uniform(-3, 3, n)
        u = np.sign(rng.standard_normal(n)) * 10.0 ** rng.uniform(-4, 2, n)
        for t in (0.0, 1.0, -2.5):
            f = np.asarray(self.eval(r, t, u), dtype=float)
            bound = self.gamma * np.abs(u) ** 5
            if np.any(np.abs(f) > bound * (1 + 1e-9) + 1e-300):
                raise ContractViolation(
                    f"nonlinearity '{self.name}' violates |F| <= gamma |u|^5")
            if self.defocusing and np.any(u * f > 1e-12 * np.abs(u * f).max(initial=0.0)):
                raise ContractViolation(
                    f"nonlinearity '{self.name}' flagged defocusing but u*F > 0")

    # ---- built-ins -------------------------------------------------------

    @staticmethod
    def zero() -> "Nonlinearity":
        return Nonlinearity(
            name="zero",
            eval=lambda r, t, u: np.zeros_like(np.asarray(u, dtype=float)),
            potential=lambda r, u: np.zeros_like(np.asarray(u, dtype=float)),
            gamma=0.0)

    @staticmethod
    def focusing_quintic() -> "Nonlinearity":
        return Nonlinearity(
            name="focusing_quintic",
            eval=lambda r, t, u: u ** 5,
            potential=lambda r, u: -u ** 6 / 6.0,
            gamma=1.0)

    @staticmethod
    def defocusing_quintic() -> "Nonlinearity":
        return Nonlinearity(
            name="defocusing_quintic",
            eval=lambda r, t, u: -u ** 5,
            potential=lambda r, u: u ** 6 / 6.0,
            gamma=1.0,
            defocusing=True)

    @staticmethod
    def weighted_power(c: Callable, gamma: float) -> "Nonlinearity":
        """F = c(r) |u|^4 u with |c| <= gamma."""
        return Nonlinearity(
            name="weighted_power",
            eval=lambda r, t, u: c(r) * np.abs(u) ** 4 * u,
            potential=lambda r, u: -c(r) * np.abs(u) ** 6 / 6.0,
            gamma=gamma,
            autonomous=True)

    @staticmethod
    def from_selector(sel: str, gamma: float = 1.0) -> "Nonlinearity":
        table = {
            "zero": Nonlinearity.zero,
            "focusing_quintic": Nonlinearity.focusing_quintic,
            "defocusing_quintic": Nonlinearity.defocusing_quintic,
        }
        if sel == "weighted_power":
            return Nonlinearity.weighted_power(
                lambda r: -gamma / (1.0 + r ** 2), gamma)
        if sel not in table:
            raise ContractViolation(f"unknown nonlinearity selector '{sel}'")
        return table[sel]()


# ---------------------------------------------------------------------------
# leapfrog core
# ---------------------------------------------------------------------------

def _u_from_w(w: npt.NDArray, r: npt.NDArray) -> npt.NDArray:
    # u = w/r; at the origin u is even in r so u(0) = u(h) + O(h^2)
    u = np.empty_like(w)
    u[1:] = w[1:] / r[1:]
    u[0] = u[1] if r[0] == 0.0 else w[0] / r[0]
    return u


def _leapfrog(state: RadialState, source_term: Callable, T: float,
              dt: Optional[float], cfl: float, cap: float,
              store_every: int, cone_origin: Optional[float],
              scheme_label: str) -> Trajectory:
    """Shared integrator. source_term(r, t, w) returns the w-equation source
    (already including every r factor and cutoff)."""
    g = state.grid
    if not g.touches_origin:
        raise ContractViolation(
            "evolution grids must touch the origin; exterior problems use an "
            "interior fill instead of an inner boundary")
    if T <= 0:
        raise ContractViolation("T must be positive here")
    if state.t != 0.0:
        raise ContractViolation("evolution starts from a t=0 state")
    h = g.h
    if dt is None:
        steps = max(int(math.ceil(T / (cfl * h))), 1)
    else:
        if dt > cfl * h * (1 + 1e-12):
            raise ContractViolation(
                f"CFL violation: dt={dt} exceeds cfl*h={cfl * h}")
        steps = max(int(math.ceil(T / dt - 1e-9)), 1)
    # keep the stored frames uniformly spaced; the storage cadence must not
    # change the integration, so a stride past the step count stores just
    # the first and final frames instead of inflating the run
    stride = max(1, min(store_every, steps))
    steps = int(math.ceil(steps / stride)) * stride
    dt = T / steps

    r = g.r
    lam = (dt / h) ** 2
    w_prev = state.w.copy()
    w_prev[0] = 0.0
    wt0 = state.wt
    # second-order Taylor start
    w_cur = w_prev + dt * wt0 + 0.5 * dt ** 2 * (
        _second_diff(w_prev, h) + source_term(r, 0.0, w_prev))
    w_cur[0] = 0.0
    w_cur[-1] = w_prev[-1]

    states = [RadialState(g, state.u.copy(), state.ut.copy(), t=0.0)]
    blowup: Optional[BlowupReport] = None

    def step(wm, w, t):
        wn = np.empty_like(w)
        wn[1:-1] = (2.0 * w[1:-1] - wm[1:-1]
                    + lam * (w[2:] - 2.0 * w[1:-1] + w[:-2])
                    + dt ** 2 * source_term(r, t, w)[1:-1])
        wn[0] = 0.0
        wn[-1] = w[-1]
        return wn

    # the loop advances one step past each stored frame so its time
    # derivative can be centered
    for k in range(1, steps + 1):
        t_k = k * dt
        w_next = step(w_prev, w_cur, t_k)

        bad = np.abs(w_next) > cap
        if bad.any():
            idx = int(np.argmax(bad))
            masked = (cone_origin is not None
                      and not bool(bad[r > t_k + cone_origin].any()))
            report = BlowupReport(time=t_k, radius=float(r[idx]), masked=masked)
            if masked:
                # contained in the untrusted cone: clamp and carry on
                np.clip(w_next, -cap, cap, out=w_next)
                if blowup is None:
                    blowup = report
            else:
                blowup = report
                break

        if k % stride == 0:
            wt_k = (w_next - w_prev) / (2.0 * dt)
            states.append(RadialState(g, _u_from_w(w_cur, r),
                                      _u_from_w(wt_k, r), t=t_k))
        w_prev, w_cur = w_cur, w_next

    traj = Trajectory(states, dt=stride * dt, cone_origin=cone_origin,
                      scheme=scheme_label, blowup=blowup)
    traj.diagnostics["dt_step"] = dt
    traj.diagnostics["steps"] = steps
    return traj


def _second_diff(w: npt.NDArray, h: float) -> npt.NDArray:
    d = np.zeros_like(w)
    d[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / h ** 2
    return d


def _reflect(traj: Trajectory) -> Trajectory:
    """Map the forward run of (u0, -u1) to the backward run of (u0, u1)."""
    states = [RadialState(s.grid, s.u.copy(), -s.ut, t=-s.t)
              for s in reversed(traj.states)]
    out = Trajectory(states, dt=traj.dt, cone_origin=traj.cone_origin,
                     scheme=traj.scheme, blowup=traj.blowup)
    out.diagnostics.update(traj.diagnostics)
    if out.blowup is not None:
        out.blowup = BlowupReport(-traj.blowup.time, traj.blowup.radius,
                                  traj.blowup.masked)
    return out


def evolve(state: RadialState, F: Nonlinearity, T: float,
           dt: Optional[float] = None, cfl: float = 0.5,
           cap: float = _CAP_DEFAULT, store_every: int = 1) -> Trajectory:
    """Whole-space evolution of u_tt - Delta u = F(r, t, u) from the state.

    Negative T runs backwards (implemented by reflecting u_t and time).
    Preconditions: dt <= cfl*h; the grid extends past data support + |T|.
    """
    if T < 0:
        if not F.autonomous:
            raise ContractViolation("backward runs need autonomous F here")
        flipped = RadialState(state.grid, state.u.copy(), -state.ut, t=0.0)
        fwd = evolve(flipped, F, -T, dt=dt, cfl=cfl, cap=cap,
                     store_every=store_every)
        return _reflect(fwd)

    def src(r, t, w):
        return r * np.asarray(F.eval(r, t, _u_from_w(w, r)), dtype=float)

    return _leapfrog(state, src, T, dt, cfl, cap, store_every, None, "leapfrog")


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def fill_interior(state: RadialState, R: float, blend: float = 0.25) -> RadialState:
    """Replace r < R by the C^1 clamp of the boundary value (u(R), 0).

    Inside [R(1-blend), R] the slope is tapered to zero with a quintic
    smoothstep; below that the data is the constant u(R). The time derivative
    is tapered to zero the same way.
    """
    g = state.grid
    if not (g.r_min <= R < g.r_max):
        raise ContractViolation(f"fill radius {R} outside grid")
    r = g.r
    uR = float(np.interp(R, r, state.u))
    urR = float(np.interp(R, r, np.gradient(state.u, g.h, edge_order=2)))
    delta = max(blend * R, 4 * g.h)
    s = _smoothstep((r - (R - delta)) / delta)
    utR = float(np.interp(R, r, state.ut))
    u = np.where(r >= R, state.u, uR + urR * (r - R) * s)
    ut = np.where(r >= R, state.ut, utR * s)
    return RadialState(g, u, ut, t=state.t)


def evolve_exterior(state: RadialState, F: Nonlinearity, R: float, T: float,
                    dt: Optional[float] = None, cfl: float = 0.5,
                    cap: float = _CAP_DEFAULT, store_every: int = 1,
                    fill: str = "clamp") -> Trajectory:
    """Exterior evolution on Omega_R: source cut to {r > |t| + R}, interior
    filled (fill="clamp") or taken as given (fill="keep"). Only r > |t| + R
    is authoritative; the trajectory mask marks it.
    """
    if fill not in ("clamp", "keep"):
        raise ContractViolation(f"unknown fill mode '{fill}'")
    data = fill_interior(state, R) if fill == "clamp" else state

    if T < 0:
        if not F.autonomous:
            raise ContractViolation("backward runs need autonomous F here")
        flipped = RadialState(data.grid, data.u.copy(), -data.ut, t=0.0)
        fwd = evolve_exterior(flipped, F, R, -T, dt=dt, cfl=cfl, cap=cap,
                              store_every=store_every, fill="keep")
        return _reflect(fwd)

    def src(r, t, w):
        chi = r > (abs(t) + R)
        out = r * np.asarray(F.eval(r, t, _u_from_w(w, r)), dtype=float)
        out[~chi] = 0.0
        return out

    return _leapfrog(data, src, T, dt, cfl, cap, store_every, R,
                     "leapfrog-exterior")


def duhamel_linear(state: RadialState, source: Callable, T: float,
                   dt: Optional[float] = None, cfl: float = 0.5,
                   cap: float = _CAP_DEFAULT, store_every: int = 1) -> Trajectory:
    """Linear wave with a prescribed source: u_tt - Delta u = source(r, t)."""

    def src(r, t, w):
        return r * np.asarray(source(r, t), dtype=float)

    return _leapfrog(state, src, T, dt, cfl, cap, store_every, None,
                     "leapfrog-duhamel")


# ---------------------------------------------------------------------------
# verification helper
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    order: float
    errors: list
    verdict: str  # "pass" | "fail" | "inconclusive"

    def passed(self) -> bool:
        return self.verdict == "pass"


def self_convergence(state: RadialState, F: Nonlinearity, T: float,
                     cfl: float = 0.5, threshold: float = 1.8) -> ConvergenceReport:
    """Richardson self-convergence of evolve: runs at h, h/2, h/4 (dt scaled
    along) and estimates the order from the two successive differences at
    time T on the coarse nodes."""
    g = state.grid
    spline_u = CubicSpline(g.r, state.u)
    spline_ut = CubicSpline(g.r, state.ut)
    finals = []
    for factor in (1, 2, 4):
        gf = g.refined(factor)
        sf = RadialState(gf, spline_u(gf.r), spline_ut(gf.r))
        traj = evolve(sf, F, T, cfl=cfl, store_every=max(1, traj_steps(gf, T, cfl)))
        finals.append(traj.states[-1])
    w0 = finals[0].w
    w1 = finals[1].w[::2]
    w2 = finals[2].w[::4]
    e1 = float(np.sqrt(np.trapezoid((w0 - w1) ** 2, g.r)))
    e2 = float(np.sqrt(np.trapezoid((w1 - w2) ** 2, g.r)))
    if e2 <= 0 or e1 <= 0:
        return ConvergenceReport(float("inf"), [e1, e2], "pass")
    order = float(np.log2(e1 / e2))
    if e2 >= e1:
        verdict = "inconclusive"
    else:
        verdict = "pass" if order >= threshold else "fail"
    return ConvergenceReport(order, [e1, e2], verdict)


def traj_steps(grid: RadialGrid, T: float, cfl: float) -> int:
    return max(int(math.ceil(T / (cfl * grid.h))), 1)
