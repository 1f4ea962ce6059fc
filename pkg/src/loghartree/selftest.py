"""Quick oracle checks run by ``loghartree selftest``.

Each check returns (name, passed, detail).  Total runtime is a few seconds.
"""

from __future__ import annotations

import math

import numpy as np

from . import grid
from .energy import SystemParams, el_residual, j_energy
from .kernel import build_kernel, cell_average, direct_i0_oracle, i0
from .nehari import fiber_coeffs, fiber_value

EULER_GAMMA = 0.5772156649015329


def _random_density(rng, spec):
    x1, x2 = spec.mesh
    f = np.zeros((spec.n, spec.n))
    for _ in range(3):
        c = rng.uniform(-0.5, 0.5, 2) * spec.half_width
        s = rng.uniform(0.15, 0.4) * spec.half_width
        f += rng.uniform(0.2, 1.0) * np.exp(-((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2) / (2 * s * s))
    return f


def check_kernel_oracle(seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (8, 12, 16):
        spec = grid.make_grid(1.0 + n / 8, n)
        for method in ("spectral", "point"):
            table = build_kernel(spec, method)
            for _ in range(4):
                f, g = _random_density(rng, spec), _random_density(rng, spec)
                ref = direct_i0_oracle(f, g, spec, method)
                worst = max(worst, abs(i0(f, g, table) - ref) / abs(ref))
    return "kernel_oracle", worst <= 1e-12, f"max relative error {worst:.2e}"


def check_cell_average():
    h = 0.1
    exact = (math.log(h / 2) + 0.5 * math.log(2) - 1.5 + math.pi / 4) / (2 * math.pi)
    err = abs(cell_average(h) - exact)
    return "cell_average", err <= 1e-13, f"abs error {err:.2e}"


def check_gaussian_i0(n: int = 128, half_width: float = 12.0):
    spec = grid.make_grid(half_width, n)
    table = build_kernel(spec)
    r2 = spec.radius**2
    a2, b2 = 1.0, 2.25
    f = np.exp(-r2 / (2 * a2)) / (2 * math.pi * a2)
    g = np.exp(-r2 / (2 * b2)) / (2 * math.pi * b2)
    exact = 0.5 * (math.log(2 * (a2 + b2)) - EULER_GAMMA) / (2 * math.pi)
    err = abs(i0(f, g, table) - exact) / abs(exact)
    return "gaussian_i0", err <= 1e-10, f"relative error {err:.2e}"


def check_fiber_identity(n: int = 128, half_width: float = 12.0):
    spec = grid.make_grid(half_width, n)
    table = build_kernel(spec)
    params = SystemParams(1.0, 2.0, 1.0, 0.5, 1.5)
    x1, x2 = spec.mesh

    def pair(t):
        u = t * t * np.exp(-((t * x1) ** 2 + (t * x2) ** 2) / 2)
        v = 0.7 * t * t * np.exp(-((t * x1 - 0.4) ** 2 + 1.5 * (t * x2) ** 2) / 2)
        return u, v

    c = fiber_coeffs(*pair(1.0), params, table)
    worst = 0.0
    for t in (0.5, 0.8, 1.25, 2.0):
        g = fiber_value(c, t)
        direct = j_energy(*pair(t), params, table, split=False).n
        worst = max(worst, abs(g - direct) / (1 + abs(g)))
    return "fiber_identity", worst <= 1e-8, f"max defect {worst:.2e}"


def check_gradient(n: int = 64, half_width: float = 8.0, seed: int = 1):
    rng = np.random.default_rng(seed)
    spec = grid.make_grid(half_width, n)
    table = build_kernel(spec)
    params = SystemParams(1.0, 1.5, 1.0, 2.0, 0.7)
    u, v = _random_density(rng, spec) ** 0.5, _random_density(rng, spec) ** 0.5
    ru, rv = el_residual(u, v, params, table)
    eps = 1e-4
    worst = 0.0
    for _ in range(3):
        p, q = _random_density(rng, spec), _random_density(rng, spec)
        fd = (j_energy(u + eps * p, v + eps * q, params, table, split=False).j
              - j_energy(u - eps * p, v - eps * q, params, table, split=False).j) / (2 * eps)
        an = grid.integrate(spec, ru * p + rv * q)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-300))
    return "gradient", worst <= 1e-6, f"max relative error {worst:.2e}"


def run_all():
    return [check_kernel_oracle(), check_cell_average(), check_gaussian_i0(),
            check_fiber_identity(), check_gradient()]
