"""Stationary non-radiative branches via a tail fixed point and inward ODE
integration.

Every time-independent solution with far-field offset alpha satisfies, in
w = r u form,

    w_rr = -r F(r, w/r),        w(r) -> alpha as r -> infinity,

equivalently the integral equation

    w(r) = alpha - int_r^inf int_rho^inf tau F(tau, w(tau)/tau) dtau drho
    w_r(r) = int_r^inf tau F(tau, w(tau)/tau) dtau

The tau weight comes from reducing -Delta u = F with the radial Laplacian
u_rr + (2/r) u_r; the unweighted form sometimes quoted drops it and does
not reproduce the closed-form steady states.

The map above contracts on {|w - alpha| <= alpha} once

    16 gamma alpha^4 / (3 R^2) < 1,

which fixes the default matching radius R_start below. The tail domain is
truncated at R_far = 100 R_start; the neglected remainder is bounded by
gamma (2 alpha)^5 / (6 R_far^2) using the growth bound |F| <= gamma |u|^5
and reported, not silently absorbed.

Inward from R_start the branch either reaches the origin with w = kappa r
+ O(r^3) (global member) or leaves every bounded set at a positive radius
R_alpha (blow-up member). A bounded w with nonzero origin limit, such as
w = alpha for F = 0, means u ~ alpha/r: finite everywhere except the
origin but with infinite energy there; that is classified as blow-up at
radius zero with reason "singular_origin".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import numpy.typing as npt
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .errors import ContractViolation, NumericalFailure
from .field_core import RadialGrid, RadialState, exterior_energy
from .nonlinear_evolve import Nonlinearity, evolve, evolve_exterior

__all__ = [
    "NonradiativeBranch",
    "TailResult",
    "branch_state",
    "default_R_start",
    "ground_state_reference",
    "integrate_inward",
    "nonradiative_branch",
    "radius_for_target",
    "static_evolution_check",
    "tail_energy",
    "tail_fixed_point",
]

_W_CAP = 1.0e6


def default_R_start(alpha: float, gamma: float) -> float:
    """Smallest safe tail-matching radius: 4 max(1, sqrt(16 gamma / 3)) (1 + alpha^2)."""
    return 4.0 * max(1.0, math.sqrt(16.0 * gamma / 3.0)) * (1.0 + alpha ** 2)


@dataclass
class TailResult:
    """Converged tail of the integral equation on [R_start, R_far]."""

    r: npt.NDArray[np.float64]  # increasing
    w: npt.NDArray[np.float64]
    w_r: npt.NDArray[np.float64]
    alpha: float
    R_start: float
    R_far: float
    history: list  # sup-norm update sizes per iteration
    ratios: list  # successive update ratios
    contraction_bound: float
    remainder_bound: float

    @property
    def w_at_start(self) -> float:
        return float(self.w[0])

    @property
    def w_r_at_start(self) -> float:
        return float(self.w_r[0])


def _log_grid(a: float, b: float, n: int) -> npt.NDArray[np.float64]:
    return np.geomspace(a, b, n)


def _reverse_cumtrapz(g, x):
    """I(x_i) = int_{x_i}^{x_end} g dx on an increasing nonuniform grid."""
    c = cumulative_trapezoid(g, x, initial=0.0)
    return c[-1] - c


def tail_fixed_point(F: Nonlinearity, alpha: float,
                     R_start: Optional[float] = None,
                     tol: float = 1e-12, max_iter: int = 60,
                     n_tail: int = 4001) -> TailResult:
    """Solve the tail integral equation on [R_start, 100 R_start].

    Starts from w = alpha and iterates the integral map; refuses when the
    contraction estimate 16 gamma alpha^4 / (3 R_start^2) reaches 1.
    """
    gamma = F.gamma
    if R_start is None:
        R_start = default_R_start(alpha, gamma)
    if R_start <= 0:
        raise ContractViolation("R_start must be positive")
    bound = 16.0 * gamma * alpha ** 4 / (3.0 * R_start ** 2)
    if bound >= 1.0:
        raise NumericalFailure(
            f"tail map is not a contraction at R_start={R_start:g} "
            f"(estimate {bound:.3g} >= 1); increase R_start to at least "
            f"{math.sqrt(16.0 * gamma * alpha ** 4 / 3.0):.3g}")
    R_far = 100.0 * R_start
    r = _log_grid(R_start, R_far, n_tail)

    w = np.full(n_tail, float(alpha))
    history, ratios = [], []
    w_r = np.zeros(n_tail)
    for _ in range(max_iter):
        src = r * np.asarray(F.eval(r, 0.0, w / r), dtype=float)
        w_r = _reverse_cumtrapz(src, r)
        w_new = alpha - _reverse_cumtrapz(w_r, r)
        step = float(np.max(np.abs(w_new - w)))
        if history and history[-1] > 0:
            ratios.append(step / history[-1])
        history.append(step)
        w = w_new
        if step < tol * max(1.0, abs(alpha)):
            break
    else:
        raise NumericalFailure(
            f"tail iteration did not reach tol={tol:g} in {max_iter} sweeps "
            f"(last update {history[-1]:.3g}); increase R_start")
    if len(ratios) > 1 and min(ratios[:-1]) >= 1.0:
        raise NumericalFailure(
            "tail iteration is not contracting; increase R_start")
    if np.max(np.abs(w - alpha)) > abs(alpha) + tol:
        raise NumericalFailure(
            "tail solution left the ball |w - alpha| <= alpha; "
            "increase R_start")
    remainder = gamma * (2.0 * abs(alpha)) ** 5 / (6.0 * R_far ** 2)
    return TailResult(r=r, w=w, w_r=w_r, alpha=alpha, R_start=float(R_start),
                      R_far=R_far, history=history, ratios=ratios,
                      contraction_bound=bound, remainder_bound=remainder)


@dataclass
class NonradiativeBranch:
    """Sampled stationary branch, radii decreasing from R_far inward."""

    alpha: float
    r: npt.NDArray[np.float64]  # strictly decreasing
    w: npt.NDArray[np.float64]
    w_r: npt.NDArray[np.float64]
    R_alpha: float
    classification: str  # "global" | "blowup"
    central_slope: Optional[float]  # kappa, global case only
    R_start: float
    R_far: float
    reason: str = ""
    F_name: str = ""
    gamma: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.classification not in ("global", "blowup"):
            raise ContractViolation(
                f"unknown classification '{self.classification}'")
        if np.any(np.diff(self.r) >= 0):
            raise ContractViolation("branch radii must decrease")

    @property
    def u(self) -> npt.NDArray[np.float64]:
        return self.w / self.r

    @property
    def u_r(self) -> npt.NDArray[np.float64]:
        return self.w_r / self.r - self.w / self.r ** 2

    @property
    def r_trust(self) -> float:
        """Smallest sampled radius; the branch is authoritative above it."""
        return float(self.r[-1])

    def interp(self, radii) -> npt.NDArray[np.float64]:
        asc = self.r[::-1]
        return np.interp(radii, asc, self.w[::-1])

    def interp_w_r(self, radii) -> npt.NDArray[np.float64]:
        asc = self.r[::-1]
        return np.interp(radii, asc, self.w_r[::-1])


def integrate_inward(F: Nonlinearity, w0: float, w0_r: float,
                     R_start: float, alpha: Optional[float] = None,
                     r_floor: float = 1e-6, n_samples: int = 800,
                     rtol: float = 1e-8) -> NonradiativeBranch:
    """Integrate w_rr = -r F(r, w/r) from (w0, w0_r) at R_start down toward 0.

    Classification: reaching the floor with w -> 0 linearly is the global
    case (kappa extracted from the innermost samples); a bounded w with a
    nonzero origin limit is u ~ w(0)/r, blow-up at radius zero with reason
    "singular_origin"; exceeding |w| = 1e6 stops the run at R_alpha > 0.
    """
    if not F.autonomous:
        raise ContractViolation("stationary branches need autonomous F")
    if alpha is None:
        alpha = w0

    def rhs(r, y):
        w, wr = y
        return [wr, -r * float(F.eval(r, 0.0, w / r))]

    def cap_event(r, y):
        return abs(y[0]) - _W_CAP

    cap_event.terminal = True

    t_eval = _log_grid(r_floor, R_start, n_samples)[::-1]  # decreasing
    sol = solve_ivp(rhs, (R_start, r_floor), [w0, w0_r], method="RK45",
                    t_eval=t_eval, events=cap_event, rtol=rtol, atol=1e-12)

    r_s = sol.t
    w_s = sol.y[0]
    wr_s = sol.y[1]
    reason = ""
    kappa = None

    if sol.t_events[0].size > 0:
        R_alpha = float(sol.t_events[0][0])
        classification = "blowup"
        reason = "finite_radius"
        keep = r_s > R_alpha
        r_s, w_s, wr_s = r_s[keep], w_s[keep], wr_s[keep]
    elif not sol.success:
        # stiffness stop: partial branch, trust ends at the last good radius
        R_alpha = float(r_s[-1]) if r_s.size else R_start
        classification = "blowup"
        reason = "stiffness"
    else:
        scale = max(abs(alpha), float(np.max(np.abs(w_s))) if w_s.size else 0.0)
        if abs(w_s[-1]) < 1e-3 * max(scale, 1e-30):
            classification = "global"
            R_alpha = 0.0
            # w = kappa r + O(r^3): the slope is clean within a couple of
            # decades of the floor
            inner = r_s <= 100.0 * r_floor
            if inner.sum() < 4:
                inner = np.zeros_like(r_s, dtype=bool)
                inner[-4:] = True
            kappa = float(np.mean(wr_s[inner]))
        else:
            classification = "blowup"
            R_alpha = 0.0
            reason = "singular_origin"

    return NonradiativeBranch(
        alpha=float(alpha), r=r_s, w=w_s, w_r=wr_s, R_alpha=R_alpha,
        classification=classification, central_slope=kappa,
        R_start=float(R_start), R_far=float("nan"), reason=reason,
        F_name=F.name, gamma=F.gamma,
        diagnostics={"solver_status": sol.status,
                     "solver_message": sol.message})


def nonradiative_branch(F: Nonlinearity, alpha: float,
                        R_start: Optional[float] = None,
                        r_floor: float = 1e-6,
                        rtol: float = 1e-8) -> NonradiativeBranch:
    """Tail fixed point + inward integration, glued at R_start."""
    if alpha == 0.0:
        R0 = R_start if R_start is not None else default_R_start(0.0, F.gamma)
        r = np.concatenate([_log_grid(R0, 100.0 * R0, 1001)[::-1],
                            _log_grid(r_floor, R0, 400)[::-1][1:]])
        z = np.zeros_like(r)
        return NonradiativeBranch(
            alpha=0.0, r=r, w=z, w_r=z.copy(), R_alpha=0.0,
            classification="global", central_slope=0.0,
            R_start=R0, R_far=100.0 * R0, F_name=F.name, gamma=F.gamma)
    tail = tail_fixed_point(F, alpha, R_start)
    inner = integrate_inward(F, tail.w_at_start, tail.w_r_at_start,
                             tail.R_start, alpha=alpha, r_floor=r_floor,
                             rtol=rtol)
    r_all = np.concatenate([tail.r[::-1][:-1], inner.r])
    w_all = np.concatenate([tail.w[::-1][:-1], inner.w])
    wr_all = np.concatenate([tail.w_r[::-1][:-1], inner.w_r])
    out = NonradiativeBranch(
        alpha=float(alpha), r=r_all, w=w_all, w_r=wr_all,
        R_alpha=inner.R_alpha, classification=inner.classification,
        central_slope=inner.central_slope, R_start=tail.R_start,
        R_far=tail.R_far, reason=inner.reason, F_name=F.name, gamma=F.gamma,
        diagnostics=dict(inner.diagnostics))
    out.diagnostics["tail_iterations"] = len(tail.history)
    out.diagnostics["tail_contraction_bound"] = tail.contraction_bound
    out.diagnostics["tail_remainder_bound"] = tail.remainder_bound
    return out


def tail_energy(branch: NonradiativeBranch, R: float) -> float:
    """Exterior energy seminorm sqrt(int_R^inf u_r^2 4 pi r^2 dr).

    Uses u_r r = w_r - w/r on the branch samples up to the outermost
    radius, then the analytic 1/r continuation 4 pi w_end^2 / r_end.
    """
    asc = branch.r[::-1]
    if R < branch.r_trust * (1.0 - 1e-12):
        raise ContractViolation(
            f"R={R:g} below the branch trust radius {branch.r_trust:g}")
    if R >= asc[-1]:
        raise ContractViolation(f"R={R:g} beyond the sampled tail {asc[-1]:g}")
    w_asc = branch.w[::-1]
    wr_asc = branch.w_r[::-1]
    dens = (wr_asc - w_asc / asc) ** 2
    mask = asc > R
    rr = np.concatenate([[R], asc[mask]])
    dd = np.concatenate([[np.interp(R, asc, dens)], dens[mask]])
    core = 4.0 * np.pi * np.trapezoid(dd, rr)
    completion = 4.0 * np.pi * w_asc[-1] ** 2 / asc[-1]
    return float(np.sqrt(core + completion))


def radius_for_target(branch: NonradiativeBranch, A: float,
                      rel_tol: float = 1e-6) -> float:
    """Bisection solve of tail_energy(branch, r) = A for r."""
    if A <= 0:
        raise ContractViolation("target energy must be positive")
    lo = branch.r_trust * (1.0 + 1e-9)
    hi = branch.r[0] * 0.5
    e_lo = tail_energy(branch, lo)
    e_hi = tail_energy(branch, hi)
    if A > e_lo:
        raise ContractViolation(
            f"target {A:g} unattainable; max attainable {e_lo:g} "
            f"at the trust radius {lo:g}")
    if A < e_hi:
        raise ContractViolation(
            f"target {A:g} below the sampled range; min attainable {e_hi:g}")
    while (hi - lo) > rel_tol * max(lo, 1e-30):
        mid = 0.5 * (lo + hi)
        if tail_energy(branch, mid) >= A:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ground_state_reference(alpha: float, grid: RadialGrid):
    """Closed-form focusing steady state (1/alpha)(1/3 + r^2/alpha^4)^(-1/2).

    Returns (state, residual): the sampled state with zero velocity and the
    discrete L^2 residual of w_rr + r u^5 over interior nodes.
    """
    if alpha == 0.0:
        raise ContractViolation("ground state needs alpha != 0")
    r = grid.r
    u = (1.0 / alpha) * (1.0 / 3.0 + r ** 2 / alpha ** 4) ** -0.5
    state = RadialState(grid, u, np.zeros(grid.n), t=0.0)
    w = state.w
    h = grid.h
    resid_nodes = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / h ** 2 + r[1:-1] * u[1:-1] ** 5
    residual = float(np.sqrt(np.trapezoid(resid_nodes ** 2, r[1:-1])))
    return state, residual


def branch_state(branch: NonradiativeBranch, grid: RadialGrid,
                 r_cut: Optional[float] = None) -> RadialState:
    """Sample the branch as initial data (u, 0) on a uniform grid.

    Below r_cut (default: just above the trust radius) the data continues
    with the constant u(r_cut); exterior evolutions overwrite that region
    through their interior fill anyway.
    """
    if r_cut is None:
        r_cut = max(branch.r_trust * 1.05, grid.h)
    asc = branch.r[::-1]
    if grid.r_max > asc[-1]:
        raise ContractViolation(
            f"grid extends to {grid.r_max:g}, beyond the sampled tail "
            f"{asc[-1]:g}")
    r = grid.r
    rq = np.maximum(r, r_cut)
    u = np.interp(rq, asc, branch.w[::-1]) / rq
    return RadialState(grid, u, np.zeros(grid.n), t=0.0)


def static_evolution_check(branch: NonradiativeBranch, F: Nonlinearity,
                           T: Optional[float] = None,
                           R: Optional[float] = None,
                           h: float = 0.02, cfl: float = 0.5,
                           frames: int = 8, margin: float = 0.0) -> float:
    """Evolve branch data on the exterior region and report the worst
    relative deviation from staticity.

    deviation(t) = energy of (u(t) - u(0), u_t(t)) over {r > |t| + R +
    margin}, relative to the data energy over {r > R}. Returns max over
    stored frames. A margin of a few h excludes the interior-fill front
    smeared across the cone boundary by the scheme.
    """
    if R is None:
        R = branch.R_start
    if T is None:
        T = R
    if branch.classification == "blowup" and R <= branch.R_alpha:
        raise ContractViolation(
            f"need R > R_alpha={branch.R_alpha:g} for an exterior domain")
    r_max = R + T + 2.0 + T  # causal padding past the probe region
    n = int(round(r_max / h)) + 1
    grid = RadialGrid(0.0, h * (n - 1), n)
    state = branch_state(branch, grid)
    steps = max(1, int(math.ceil(T / (cfl * grid.h))))
    per = max(1, steps // frames)
    if R > 0:
        traj = evolve_exterior(state, F, R, T, cfl=cfl, store_every=per)
    else:
        traj = evolve(state, F, T, cfl=cfl, store_every=per)
    e0 = exterior_energy(state, R)
    worst = 0.0
    for s in traj.states[1:]:
        diff = RadialState(grid, s.u - state.u, s.ut, t=s.t)
        dev = exterior_energy(diff, abs(s.t) + R + margin) / e0
        worst = max(worst, float(dev))
    return worst
