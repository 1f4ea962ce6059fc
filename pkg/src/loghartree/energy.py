"""Energy functional, Nehari functional and Euler-Lagrange residual.

With k = ln|.| / (2 pi) and the bilinear form I(f, g) = int int k(x - y) f(x) g(y):

    A(u, v) = mu1 I(u^2, u^2) + mu2 I(v^2, v^2) + 2 beta I(u^2, v^2)
    J(u, v) = 1/2 ||(u, v)||_H^2 + 1/4 A0(u, v)
    N(u, v) = <J'(u, v), (u, v)> = ||(u, v)||_H^2 + A0(u, v)

where ||(u, v)||_H^2 = ||grad u||^2 + ||grad v||^2 + lambda1 ||u||^2 + lambda2 ||v||^2.
A1 and A2 use the nonnegative kernels ln(1 + |z|) and ln(1 + 1/|z|), and
A0 = A1 - A2.
"""

from __future__ import annotations

import numbers
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import grid
from .kernel import KernelTable, convolve, i0, i1, i2


@dataclass(frozen=True)
class SystemParams:
    lambda1: float
    lambda2: float
    mu1: float
    mu2: float
    beta: float

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, bool) or not isinstance(val, numbers.Real) or not (np.isfinite(val) and val > 0):
                raise ValueError(f"parameter {f.name} must be a positive finite number, got {val!r}")

    def swapped(self) -> "SystemParams":
        return SystemParams(self.lambda2, self.lambda1, self.mu2, self.mu1, self.beta)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EnergyBreakdown:
    grad_u: float
    grad_v: float
    mass_u: float  # ||u||_2^2
    mass_v: float
    a0: float
    a1: float
    a2: float
    j: float
    n: float
    h_norm_sq: float
    x_norm_sq: float

    def to_dict(self) -> dict:
        return asdict(self)


def a_functionals(u, v, params: SystemParams, table: KernelTable) -> tuple[float, float, float]:
    uu, vv = u * u, v * v
    out = []
    for form in (i0, i1, i2):
        out.append(params.mu1 * form(uu, uu, table)
                   + params.mu2 * form(vv, vv, table)
                   + 2.0 * params.beta * form(uu, vv, table))
    return tuple(out)


def a0_functional(u, v, params: SystemParams, table: KernelTable) -> float:
    return potentials_and_a0(u, v, params, table)[2]


def potentials_and_a0(u, v, params, table):
    """Return (k*u^2, k*v^2, A0) sharing the two convolutions."""
    spec = table.spec
    uu, vv = u * u, v * v
    ku = convolve(uu, table) if uu.any() else np.zeros_like(u)
    kv = convolve(vv, table) if vv.any() else np.zeros_like(v)
    a0 = grid.integrate(spec, params.mu1 * uu * ku + params.mu2 * vv * kv
                        + params.beta * (uu * kv + vv * ku))
    return ku, kv, a0


def j_energy(u, v, params: SystemParams, table: KernelTable, split: bool = True) -> EnergyBreakdown:
    """Full breakdown of J and N; ``split=False`` skips A1/A2 (reported as nan)."""
    spec = table.spec
    gu, gv = grid.grad_norm_sq(spec, u), grid.grad_norm_sq(spec, v)
    mu_, mv = grid.l2_norm_sq(spec, u), grid.l2_norm_sq(spec, v)
    hn = gu + gv + params.lambda1 * mu_ + params.lambda2 * mv
    xn = hn + grid.xlog_norm_sq(spec, u) + grid.xlog_norm_sq(spec, v)
    if split:
        a0, a1, a2 = a_functionals(u, v, params, table)
    else:
        a0 = potentials_and_a0(u, v, params, table)[2]
        a1 = a2 = float("nan")
    return EnergyBreakdown(
        grad_u=gu, grad_v=gv, mass_u=mu_, mass_v=mv,
        a0=a0, a1=a1, a2=a2,
        j=0.5 * hn + 0.25 * a0, n=hn + a0,
        h_norm_sq=hn, x_norm_sq=xn,
    )


def el_residual(u, v, params: SystemParams, table: KernelTable) -> tuple[np.ndarray, np.ndarray]:
    """Strong-form residual of the system, i.e. the L2 gradient of J.

    r_u = -Lap u + lambda1 u - mu1 w_u u - beta w_v u, with w_f = -k * f^2.
    """
    spec = table.spec
    ku, kv, _ = potentials_and_a0(u, v, params, table)
    ru = -grid.laplacian(spec, u) + params.lambda1 * u + (params.mu1 * ku + params.beta * kv) * u
    rv = -grid.laplacian(spec, v) + params.lambda2 * v + (params.mu2 * kv + params.beta * ku) * v
    return ru, rv


def a1_bound_check(u, v, params: SystemParams, table: KernelTable) -> tuple[float, float]:
    """Both sides of A1(u, v) <= (1/pi)(mu1 |u|_*^2 |u|^2 + mu2 |v|_*^2 |v|^2
    + beta |u|_*^2 |v|^2 + beta |v|_*^2 |u|^2)."""
    spec = table.spec
    uu, vv = u * u, v * v
    lhs = params.mu1 * i1(uu, uu, table) + params.mu2 * i1(vv, vv, table) + 2 * params.beta * i1(uu, vv, table)
    su, sv = grid.xlog_norm_sq(spec, u), grid.xlog_norm_sq(spec, v)
    mu_, mv = grid.l2_norm_sq(spec, u), grid.l2_norm_sq(spec, v)
    rhs = (params.mu1 * su * mu_ + params.mu2 * sv * mv + params.beta * (su * mv + sv * mu_)) / np.pi
    return lhs, rhs
