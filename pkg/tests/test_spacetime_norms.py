"""Tests for region-restricted space-time norms.

The main oracle is a dual-route computation: y_norm uses the trajectory
machinery (trapezoid over stored frames, partial-cell radial trapezoid),
while the expected value below integrates the same closed-form slice
functions with scipy.integrate.quad. The two routes share no code.

The quintic duality check pins the exact identity
    || u^5 ||_{L1_t L2_x} = || u ||_Y^5
which holds pointwise for the integrands, not just as an inequality.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from exterior_wave_lab.errors import ContractViolation
from exterior_wave_lab.field_core import RadialGrid, RadialState, Trajectory
from exterior_wave_lab.spacetime_norms import (
    RegionSpec,
    dyadic_channel_norms,
    source_l1l2_norm,
    y_norm,
    y_norm_detailed,
)


def static_trajectory(profile, grid, T=2.0, frames=81):
    """Trajectory whose frames all carry the same spatial profile."""
    dt = T / (frames - 1)
    u = profile(grid.r)
    states = [RadialState(grid, u.copy(), np.zeros(grid.n), t=j * dt)
              for j in range(frames)]
    return Trajectory(states, dt=dt, scheme="synthetic")


class TestRegionSpec:
    def test_factories(self):
        e = RegionSpec.exterior(1.5)
        assert e.window(2.0) == (3.5, np.inf)
        a = RegionSpec.annulus(1.0, 4.0)
        assert a.window(-1.0) == (2.0, 5.0)
        c = RegionSpec.channel(2.0)
        assert (c.inner, c.outer) == (2.0, 4.0)

    def test_invalid_regions_rejected(self):
        with pytest.raises(ContractViolation):
            RegionSpec.annulus(3.0, 2.0)
        with pytest.raises(ContractViolation):
            RegionSpec.annulus(-1.0, 2.0)
        with pytest.raises(ContractViolation):
            RegionSpec.channel(0.0)

    def test_window_symmetric_in_time(self):
        a = RegionSpec.annulus(1.0, 4.0)
        assert a.window(3.0) == a.window(-3.0)


class TestYNormAgainstQuad:
    def test_exterior_region_dual_route(self):
        grid = RadialGrid(0.0, 30.0, 6001)
        traj = static_trajectory(lambda r: 1.0 / (1.0 + r ** 2), grid,
                                 T=2.0, frames=81)

        def slice_fn(t):
            val, _ = quad(lambda r: (1.0 + r ** 2) ** -10 * 4.0 * np.pi * r ** 2,
                          1.0 + t, 30.0)
            return np.sqrt(val)

        expect5, _ = quad(slice_fn, 0.0, 2.0, limit=200)
        got = y_norm(traj, RegionSpec.exterior(1.0))
        rel = abs(got - expect5 ** 0.2) / expect5 ** 0.2
        assert rel < 2e-4, f"rel={rel:.2e}"

    def test_annulus_region_dual_route(self):
        grid = RadialGrid(0.0, 40.0, 8001)
        traj = static_trajectory(lambda r: np.exp(-0.1 * r), grid,
                                 T=1.0, frames=41)

        def slice_fn(t):
            val, _ = quad(lambda r: np.exp(-r) * 4.0 * np.pi * r ** 2,
                          0.5 + t, 3.5 + t)
            return np.sqrt(val)

        expect5, _ = quad(slice_fn, 0.0, 1.0, limit=200)
        got = y_norm(traj, RegionSpec.annulus(0.5, 3.5))
        rel = abs(got - expect5 ** 0.2) / expect5 ** 0.2
        assert rel < 2e-4, f"rel={rel:.2e}"


class TestYNormStructure:
    def setup_method(self):
        self.grid = RadialGrid(0.0, 30.0, 3001)
        self.traj = static_trajectory(lambda r: 1.0 / (1.0 + r ** 2),
                                      self.grid, T=1.0, frames=21)

    def test_monotone_in_region_inclusion(self):
        y_small = y_norm(self.traj, RegionSpec.annulus(2.0, 3.0))
        y_big = y_norm(self.traj, RegionSpec.annulus(1.0, 5.0))
        assert y_small < y_big
        y_far = y_norm(self.traj, RegionSpec.exterior(5.0))
        y_near = y_norm(self.traj, RegionSpec.exterior(1.0))
        assert y_far < y_near

    def test_channel_equals_matching_annulus(self):
        a = y_norm(self.traj, RegionSpec.channel(2.0))
        b = y_norm(self.traj, RegionSpec.annulus(2.0, 4.0))
        assert a == b

    def test_zero_state_zero_norm(self):
        traj = static_trajectory(lambda r: np.zeros_like(r), self.grid)
        assert y_norm(traj, RegionSpec.exterior(1.0)) == 0.0

    def test_single_frame_has_zero_time_measure(self):
        u = 1.0 / (1.0 + self.grid.r ** 2)
        st0 = RadialState(self.grid, u, np.zeros(self.grid.n), t=0.0)
        traj = Trajectory([st0], dt=0.1, scheme="synthetic")
        assert y_norm(traj, RegionSpec.exterior(1.0)) == 0.0

    def test_clipping_reported(self):
        _, diag = y_norm_detailed(self.traj, RegionSpec.annulus(1.0, 29.8))
        assert diag["clipped_frames"] > 0
        assert diag["frames"] == 21

    def test_region_off_grid_raises(self):
        with pytest.raises(ContractViolation):
            y_norm(self.traj, RegionSpec.exterior(29.5))  # off grid by t=0.6

    def test_scaling_power(self):
        # Y is homogeneous of degree 1 in the field.
        one = y_norm(self.traj, RegionSpec.exterior(1.0))
        traj3 = static_trajectory(lambda r: 3.0 / (1.0 + r ** 2),
                                  self.grid, T=1.0, frames=21)
        three = y_norm(traj3, RegionSpec.exterior(1.0))
        assert abs(three - 3.0 * one) < 1e-12 * three


class TestQuinticDuality:
    def test_source_norm_equals_fifth_power(self):
        grid = RadialGrid(0.0, 25.0, 2501)
        traj = static_trajectory(lambda r: np.exp(-0.3 * r) * np.cos(r),
                                 grid, T=1.5, frames=31)
        region = RegionSpec.exterior(0.5)

        def quintic(r, t, u):
            return u ** 5

        lhs = source_l1l2_norm(traj, quintic, region)
        rhs = y_norm(traj, region) ** 5
        assert abs(lhs - rhs) < 1e-12 * max(lhs, 1e-30), (lhs, rhs)

    def test_source_accepts_nonlinearity_object(self):
        from exterior_wave_lab.nonlinear_evolve import Nonlinearity

        grid = RadialGrid(0.0, 20.0, 2001)
        traj = static_trajectory(lambda r: np.exp(-0.5 * r), grid,
                                 T=1.0, frames=11)
        F = Nonlinearity.defocusing_quintic()
        region = RegionSpec.exterior(1.0)
        got = source_l1l2_norm(traj, F, region)
        expect = y_norm(traj, region) ** 5
        assert abs(got - expect) < 1e-12 * max(expect, 1e-30)


class TestDyadicChannels:
    def test_values_match_individual_channels(self):
        grid = RadialGrid(0.0, 70.0, 7001)
        traj = static_trajectory(lambda r: 1.0 / (1.0 + r), grid,
                                 T=1.0, frames=11)
        ch = dyadic_channel_norms(traj, 0, 4)
        assert list(ch.k) == [0, 1, 2, 3, 4]
        for k, b in zip(ch.k, ch.b):
            direct = y_norm(traj, RegionSpec.channel(2.0 ** int(k)))
            assert b == direct
        assert abs(ch.l2_sum - float(np.sum(ch.b ** 2))) < 1e-15
        assert abs(ch.tail_p4(2) - float(np.sum(ch.b[2:] ** 4))) < 1e-18

    def test_decay_for_integrable_tail(self):
        grid = RadialGrid(0.0, 70.0, 7001)
        traj = static_trajectory(lambda r: 1.0 / (1.0 + r ** 2), grid,
                                 T=0.5, frames=6)
        ch = dyadic_channel_norms(traj, 0, 4)
        assert np.all(np.diff(ch.b) < 0)

    def test_bad_range_rejected(self):
        grid = RadialGrid(0.0, 10.0, 101)
        traj = static_trajectory(lambda r: np.zeros_like(r), grid)
        with pytest.raises(ContractViolation):
            dyadic_channel_norms(traj, 3, 2)


@settings(max_examples=10, deadline=None)
@given(scale=st.floats(0.2, 5.0), R=st.floats(0.5, 4.0))
def test_y_norm_homogeneity(scale, R):
    grid = RadialGrid(0.0, 20.0, 801)
    base = static_trajectory(lambda r: np.exp(-0.4 * r), grid, T=0.5, frames=6)
    scaled = static_trajectory(lambda r: scale * np.exp(-0.4 * r), grid,
                               T=0.5, frames=6)
    a = y_norm(base, RegionSpec.exterior(R))
    b = y_norm(scaled, RegionSpec.exterior(R))
    assert abs(b - scale * a) <= 1e-10 * max(b, 1e-30)
