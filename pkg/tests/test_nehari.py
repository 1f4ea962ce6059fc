import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from loghartree import grid
from loghartree.energy import SystemParams, j_energy
from loghartree.kernel import build_kernel
from loghartree.nehari import (FiberCoefficients, FiberRootError, InvalidState, NotApplicable,
                               amplitude_project, b_values, beta_thresholds, dilation_project,
                               fiber_brackets, fiber_coeffs, fiber_root, fiber_value, h_curve, h_rho,
                               t_rho, write_h_curve_csv)

PARAMS = SystemParams(1.0, 2.0, 1.0, 0.5, 1.5)


@pytest.fixture(scope="module")
def g128():
    spec = grid.make_grid(12.0, 128)
    return spec, build_kernel(spec)


def gaussian_pair(spec, t=1.0):
    """Analytic t^2 u(t x) for an anisotropic, off-centre Gaussian pair."""
    x1, x2 = spec.mesh
    u = t * t * np.exp(-((t * x1) ** 2 + (t * x2) ** 2) / 2)
    v = 0.7 * t * t * np.exp(-((t * x1 - 0.4) ** 2 + 1.5 * (t * x2) ** 2) / 2)
    return u, v


def nehari_value(u, v, params, table):
    return j_energy(u, v, params, table, split=False).n


class TestFiber:
    def test_value_at_one(self, g128):
        spec, table = g128
        u, v = gaussian_pair(spec)
        c = fiber_coeffs(u, v, PARAMS, table)
        assert fiber_value(c, 1.0) == pytest.approx(nehari_value(u, v, PARAMS, table), rel=1e-13)

    @pytest.mark.parametrize("t", [0.0, -0.5])
    def test_rejects_nonpositive(self, t):
        with pytest.raises(ValueError):
            fiber_value(FiberCoefficients(1, 1, -1, 1), t)

    @pytest.mark.parametrize("t", [0.5, 2.0])
    def test_analytic_dilation(self, g128, t):
        spec, table = g128
        c = fiber_coeffs(*gaussian_pair(spec), PARAMS, table)
        g = fiber_value(c, t)
        assert abs(g - nehari_value(*gaussian_pair(spec, t), PARAMS, table)) <= 1e-8 * (1 + abs(g))

    def test_signs(self, g128):
        spec, table = g128
        c = fiber_coeffs(*gaussian_pair(spec), PARAMS, table)
        assert fiber_value(c, 1e-3) > 0
        assert fiber_value(c, 1e3) < 0

    def test_coefficients_nonnegative(self, g128):
        spec, table = g128
        c = fiber_coeffs(*gaussian_pair(spec), PARAMS, table)
        assert c.kin >= 0 and c.mass >= 0 and c.logmass > 0
        z = spec.zeros()
        assert fiber_coeffs(z, z, PARAMS, table).logmass == 0

    @given(st.floats(0.0, 1e3), st.floats(1e-3, 1e3), st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
    def test_single_sign_change(self, kin, mass, a0, logmass):
        # g(t)/t^2 = t^2 (kin + a0 - logmass ln t / 2 pi) + mass rises then falls
        c = FiberCoefficients(kin, mass, a0, logmass)
        brackets = fiber_brackets(c)
        if brackets:
            assert len(brackets) == 1

    def test_root_against_dense_scan(self, g128):
        spec, table = g128
        c = fiber_coeffs(*gaussian_pair(spec), PARAMS, table)
        t0, n = fiber_root(c)
        ts = np.geomspace(1e-3, 1e3, 200001)
        vals = np.array([fiber_value(c, t) for t in ts])
        flips = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
        assert n == len(flips) == 1
        assert ts[flips[0]] <= t0 <= ts[flips[0] + 1]
        assert abs(fiber_value(c, t0)) <= 1e-9 * c.mass

    def test_no_root(self):
        with pytest.raises(FiberRootError):
            fiber_root(FiberCoefficients(0.0, 0.0, 0.0, 0.0))


class TestDilationProject:
    def test_on_nehari_set(self, scalar_state, small_table):
        s = scalar_state
        _, _, t0 = dilation_project(s.u, np.zeros_like(s.u), s.params(), small_table)
        assert t0 == pytest.approx(1.0, abs=1e-10)

    def test_gaussian_pair(self, g128):
        spec, table = g128
        u, v = gaussian_pair(spec)
        du, dv, t0 = dilation_project(3 * u, 3 * v, PARAMS, table)
        assert t0 > 0
        bd = j_energy(du, dv, PARAMS, table, split=False)
        assert abs(bd.n) <= 1e-6 * bd.h_norm_sq

    def test_zero_pair(self, small_spec, small_table):
        z = small_spec.zeros()
        with pytest.raises(ValueError):
            dilation_project(z, z, PARAMS, small_table)


class TestAmplitudeProject:
    def test_already_on_set(self, scalar_state, small_table):
        s = scalar_state
        _, _, s0 = amplitude_project(s.u, np.zeros_like(s.u), s.params(), small_table)
        assert s0 == pytest.approx(1.0, abs=1e-12)

    def test_against_bisection(self, g128):
        spec, table = g128
        u, v = gaussian_pair(spec, 2.0)  # concentrated enough for A0 < 0
        pu, pv, s0 = amplitude_project(u, v, PARAMS, table)
        ref = optimize.brentq(lambda s: nehari_value(s * u, s * v, PARAMS, table), 1e-3, 1e3, xtol=1e-15, rtol=1e-15)
        assert s0 == pytest.approx(ref, rel=1e-12)
        bd = j_energy(pu, pv, PARAMS, table, split=False)
        assert abs(bd.n) <= 1e-12 * bd.h_norm_sq

    def test_requires_negative_a0(self, g128):
        spec, table = g128
        wide = np.exp(-spec.radius**2 / 18)  # spread-out density: A0 > 0
        with pytest.raises(NotApplicable):
            amplitude_project(wide, wide, PARAMS, table)

    def test_idempotent(self, g128):
        spec, table = g128
        u, v = gaussian_pair(spec, 2.0)
        pu, pv, _ = amplitude_project(u, v, PARAMS, table)
        qu, qv, _ = amplitude_project(pu, pv, PARAMS, table)
        diff = grid.h_norm_sq(spec, qu - pu, qv - pv, PARAMS)
        assert math.sqrt(diff / grid.h_norm_sq(spec, pu, pv, PARAMS)) <= 1e-12

    def test_both_projections_reach_the_set(self, g128):
        spec, table = g128
        # off the set but close enough that the dilated pair stays resolved
        u, v, _ = amplitude_project(*gaussian_pair(spec, 2.0), PARAMS, table)
        u, v = 1.2 * u, 1.2 * v
        for proj in (amplitude_project, dilation_project):
            pu, pv, _ = proj(u, v, PARAMS, table)
            bd = j_energy(pu, pv, PARAMS, table, split=False)
            assert abs(bd.n) <= 1e-6 * bd.h_norm_sq


class TestSemitrivialFibre:
    @pytest.mark.parametrize("rho", [0.0, 0.1, 1.0])
    def test_root(self, scalar_state, small_table, rho):
        u1 = scalar_state.u
        t = t_rho(u1, rho, PARAMS, small_table)
        bd = j_energy(t * u1, t * rho * u1, PARAMS, small_table, split=False)
        assert abs(bd.n) <= 1e-10 * bd.h_norm_sq
        _, _, s0 = amplitude_project(u1, rho * u1, PARAMS, small_table)
        assert s0 == pytest.approx(t, rel=1e-10)

    def test_root_at_zero_is_one(self, scalar_state, small_table):
        assert t_rho(scalar_state.u, 0.0, scalar_state.params(), small_table) == pytest.approx(1.0, abs=1e-8)

    def test_h_at_zero(self, scalar_state, small_table):
        s = scalar_state
        p = SystemParams(s.lam, 2.0, s.mu, 1.0, 1.0)
        assert h_rho(s.u, 0.0, p, small_table) == pytest.approx(0.25 * s.b, rel=1e-14)

    def test_h_matches_direct_energy(self, scalar_state, small_table):
        rows = h_curve(scalar_state.u, np.linspace(0, 1, 11), PARAMS, small_table)
        for r in rows:
            assert r["h_rho"] == pytest.approx(r["j_direct"], rel=1e-9)

    def test_h_dips_above_threshold(self, scalar_state, small_table, small_spec):
        s = scalar_state
        p = SystemParams(1.0, 2.0, 1.0, 1.0, 1.0)
        b1, _ = beta_thresholds(s.u, s.u, p, small_spec)
        p = SystemParams(1.0, 2.0, 1.0, 1.0, 1.1 * b1)
        h0 = h_rho(s.u, 0.0, p, small_table)
        assert min(h_rho(s.u, r, p, small_table) for r in np.linspace(0.01, 0.5, 50)) < h0

    def test_invalid_state(self, g128):
        spec, table = g128
        wide = np.exp(-spec.radius**2 / 18)
        with pytest.raises(InvalidState):
            t_rho(wide, 0.5, PARAMS, table)
        with pytest.raises(InvalidState):
            h_rho(wide, 0.5, PARAMS, table)

    def test_curve_csv(self, scalar_state, small_table, tmp_path):
        rows = h_curve(scalar_state.u, [0.0, 0.25], PARAMS, small_table)
        write_h_curve_csv(rows, tmp_path / "h.csv")
        with open(tmp_path / "h.csv") as fh:
            data = list(csv.reader(fh))
        assert data[0] == ["rho", "t_rho", "h_rho", "j_direct"]
        assert float(data[2][2]) == rows[1]["h_rho"]
        with pytest.raises(FileNotFoundError):
            write_h_curve_csv(rows, tmp_path / "nope" / "h.csv")


class TestThresholds:
    def test_equal_lambdas_collapse(self, scalar_state, small_spec):
        p = SystemParams(1.0, 1.0, 1.3, 0.6, 1.0)
        b1, b2 = beta_thresholds(scalar_state.u, scalar_state.u, p, small_spec)
        assert b1 == 1.3 and b2 == 0.6

    @given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10))
    def test_positive(self, l1, l2, m1, m2):
        spec = grid.make_grid(5.0, 16)
        u = np.exp(-spec.radius**2)
        b1, b2 = beta_thresholds(u, 2 * u, SystemParams(l1, l2, m1, m2, 1.0), spec)
        assert b1 > 0 and b2 > 0

    def test_b_values(self, small_spec):
        u = np.exp(-small_spec.radius**2 / 2)
        own, other = b_values(u, 1.0, 3.0, small_spec)
        g, m = grid.grad_norm_sq(small_spec, u), grid.l2_norm_sq(small_spec, u)
        assert (own, other) == (g + m, g + 3 * m)
