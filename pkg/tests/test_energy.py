import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loghartree import grid
from loghartree.energy import SystemParams, a1_bound_check, a_functionals, el_residual, j_energy
from loghartree.kernel import build_kernel

from conftest import random_bumps

PARAMS = SystemParams(1.0, 1.5, 1.0, 2.0, 0.7)


@pytest.fixture(scope="module")
def grid32():
    spec = grid.make_grid(6.0, 32)
    return spec, build_kernel(spec, split=True)


def _pair(seed, spec):
    rng = np.random.default_rng(seed)
    return np.sqrt(random_bumps(rng, spec)), np.sqrt(random_bumps(rng, spec))


class TestSystemParams:
    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf"), True, "1"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError, match="lambda2"):
            SystemParams(1.0, bad, 1.0, 1.0, 1.0)

    def test_swapped(self):
        assert PARAMS.swapped() == SystemParams(1.5, 1.0, 2.0, 1.0, 0.7)
        assert PARAMS.swapped().swapped() == PARAMS


def test_zero_pair(split_table, small_spec):
    z = small_spec.zeros()
    assert a_functionals(z, z, PARAMS, split_table) == (0.0, 0.0, 0.0)
    bd = j_energy(z, z, PARAMS, split_table)
    assert bd.j == 0 and bd.n == 0
    ru, rv = el_residual(z, z, PARAMS, split_table)
    assert not ru.any() and not rv.any()


@given(st.integers(0, 2**32 - 1))
def test_breakdown_identities(seed):
    spec = grid.make_grid(6.0, 32)
    table = build_kernel(spec, split=True)
    u, v = _pair(seed, spec)
    bd = j_energy(u, v, PARAMS, table)
    scale = bd.h_norm_sq + abs(bd.a0)
    assert abs(bd.a0 - (bd.a1 - bd.a2)) <= 1e-10 * max(abs(bd.a1), abs(bd.a2))
    assert abs(bd.j - (0.5 * bd.h_norm_sq + 0.25 * bd.a0)) <= 1e-12 * scale
    assert abs(bd.n - (bd.h_norm_sq + bd.a0)) <= 1e-12 * scale
    assert abs((bd.j - 0.25 * bd.n) - 0.25 * bd.h_norm_sq) <= 1e-12 * scale
    assert bd.x_norm_sq >= bd.h_norm_sq


def test_quartic_homogeneity(grid32):
    spec, table = grid32
    u, v = _pair(1, spec)
    a = a_functionals(u, v, PARAMS, table)
    b = a_functionals(2 * u, 2 * v, PARAMS, table)
    for x, y in zip(a, b):
        assert y == pytest.approx(16 * x, rel=1e-12)


def test_reflection_symmetry(small_spec, small_table):
    u, v = _pair(2, small_spec)
    a = j_energy(u, v, PARAMS, small_table, split=False).a0
    b = j_energy(u[::-1, ::-1], v[::-1, ::-1], PARAMS, small_table, split=False).a0
    assert b == pytest.approx(a, rel=1e-12)


def test_split_false_skips_a1_a2(small_spec, small_table):
    u, v = _pair(3, small_spec)
    bd = j_energy(u, v, PARAMS, small_table, split=False)
    assert math.isnan(bd.a1) and math.isnan(bd.a2)
    assert bd.a0 == pytest.approx(j_energy(u, v, PARAMS, small_table).a0, rel=1e-14)


def test_gradient_matches_finite_differences(small_spec, small_table):
    rng = np.random.default_rng(9)
    u, v = _pair(4, small_spec)
    ru, rv = el_residual(u, v, PARAMS, small_table)
    eps = 1e-4
    for _ in range(10):
        p, q = random_bumps(rng, small_spec), random_bumps(rng, small_spec)
        jp = j_energy(u + eps * p, v + eps * q, PARAMS, small_table, split=False).j
        jm = j_energy(u - eps * p, v - eps * q, PARAMS, small_table, split=False).j
        fd = (jp - jm) / (2 * eps)
        an = grid.integrate(small_spec, ru * p + rv * q)
        assert abs(fd - an) <= 1e-6 * abs(an)


def test_scalar_state_embedding(scalar_state, small_table):
    s = scalar_state
    z = np.zeros_like(s.u)
    p = s.params()
    bd = j_energy(s.u, z, p, small_table)
    assert bd.j == pytest.approx(0.25 * (s.grad_energy + s.lam * s.l2_mass), rel=1e-10)
    ru, rv = el_residual(s.u, z, p, small_table)
    assert not rv.any()
    assert math.sqrt(grid.l2_norm_sq(s.spec, ru) / s.l2_mass) <= 1e-8


class TestA1Bound:
    def test_zero(self, split_table, small_spec):
        z = small_spec.zeros()
        assert a1_bound_check(z, z, PARAMS, split_table) == (0.0, 0.0)

    @given(st.integers(0, 2**32 - 1))
    def test_random_pairs(self, seed):
        spec = grid.make_grid(6.0, 32)
        table = build_kernel(spec, split=True)
        rng = np.random.default_rng(seed)
        u, v = rng.random((2, 32, 32)) * rng.random((2, 1, 1))
        lhs, rhs = a1_bound_check(u, v, PARAMS, table)
        assert lhs <= rhs

    def test_translated_gaussian(self):
        spec = grid.make_grid(12.0, 128)
        table = build_kernel(spec, split=True)
        x1, x2 = spec.mesh
        rows = []
        for c in (0.0, 3.0, 6.0):
            u = np.exp(-((x1 - c) ** 2 + x2**2))
            rows.append(a1_bound_check(u, 0.5 * u, PARAMS, table))
        for lhs, rhs in rows:
            assert lhs < rhs
        # translation leaves A1 unchanged and inflates the weighted norms
        assert rows[2][1] > rows[1][1] > rows[0][1]
        assert rows[2][0] - rows[0][0] < rows[2][1] - rows[0][1]
