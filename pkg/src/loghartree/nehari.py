"""Projections onto the Nehari set N(u, v) = 0 and the closed forms built on it.

Two fibres are used.  The amplitude fibre s -> (s u, s v) exploits the quartic
homogeneity of A0 and is exact on the grid.  The dilation fibre
t -> (t^2 u(t x), t^2 v(t x)) always crosses the Nehari set, because the log
kernel turns the scaling into

    g(t) = t^4 kin + t^2 mass + t^4 A0 - t^4 ln(t) logmass / (2 pi)

with logmass = mu1 |u|^4 + mu2 |v|^4 + 2 beta |u|^2 |v|^2.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import grid
from .energy import SystemParams, j_energy, potentials_and_a0
from .kernel import KernelTable, i0

log = logging.getLogger(__name__)


class NotApplicable(ValueError):
    """Amplitude projection requested for a pair with A0 >= 0."""


class InvalidState(ValueError):
    """A closed form was requested for a state with I0(u^2, u^2) >= 0."""


class FiberRootError(RuntimeError):
    pass


@dataclass(frozen=True)
class FiberCoefficients:
    kin: float
    mass: float
    a0: float
    logmass: float


def fiber_coeffs(u, v, params: SystemParams, table: KernelTable) -> FiberCoefficients:
    spec = table.spec
    mu_, mv = grid.l2_norm_sq(spec, u), grid.l2_norm_sq(spec, v)
    return FiberCoefficients(
        kin=grid.grad_norm_sq(spec, u) + grid.grad_norm_sq(spec, v),
        mass=params.lambda1 * mu_ + params.lambda2 * mv,
        a0=potentials_and_a0(u, v, params, table)[2],
        logmass=params.mu1 * mu_**2 + params.mu2 * mv**2 + 2.0 * params.beta * mu_ * mv,
    )


def fiber_value(c: FiberCoefficients, t: float) -> float:
    if not t > 0:
        raise ValueError(f"fibre parameter must be positive, got {t}")
    t2 = t * t
    return t2 * t2 * (c.kin + c.a0) + t2 * c.mass - t2 * t2 * math.log(t) * c.logmass / (2.0 * math.pi)


def _reduced(c: FiberCoefficients, t):
    # g(t) / t^2; same sign as g, but free of under/overflow on the scan range
    t = np.asarray(t, dtype=float)
    return t * t * (c.kin + c.a0 - np.log(t) * c.logmass / (2.0 * np.pi)) + c.mass


def fiber_brackets(c: FiberCoefficients, t_min: float = 1e-6, t_max: float = 1e6, n_scan: int = 4001):
    """All sign-change brackets of g on a logarithmic scan of [t_min, t_max]."""
    ts = np.geomspace(t_min, t_max, n_scan)
    q = _reduced(c, ts)
    s = np.sign(q)
    hits = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return [(float(ts[i]), float(ts[i + 1])) for i in hits]


def fiber_root(c: FiberCoefficients, rtol: float = 1e-12) -> tuple[float, int]:
    """Largest positive root of g by bisection; returns (root, number of brackets)."""
    brackets = fiber_brackets(c)
    if not brackets:
        raise FiberRootError(f"no sign change of the fibre map in [1e-6, 1e6]; coefficients {c}")
    lo, hi = brackets[-1]
    qlo = _reduced(c, lo)
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        qm = _reduced(c, mid)
        if qm == 0:
            return float(mid), len(brackets)
        if np.sign(qm) == np.sign(qlo):
            lo, qlo = mid, qm
        else:
            hi = mid
    return 0.5 * (lo + hi), len(brackets)


def dilation_project(u, v, params: SystemParams, table: KernelTable):
    """Dilate (u, v) onto the Nehari set; returns (u_t, v_t, t0)."""
    if not (u.any() or v.any()):
        raise ValueError("cannot project the zero pair")
    c = fiber_coeffs(u, v, params, table)
    t0, n_brackets = fiber_root(c)
    if n_brackets > 1:
        log.warning("fibre map has %d sign changes; using the largest root t0=%.6g", n_brackets, t0)
    spec = table.spec
    return grid.dilate(spec, u, t0), grid.dilate(spec, v, t0), t0


def amplitude_project(u, v, params: SystemParams, table: KernelTable):
    """Scale (u, v) onto the Nehari set; returns (s u, s v, s0).

    s0 = sqrt(-||(u, v)||_H^2 / A0), defined only when A0 < 0.
    """
    spec = table.spec
    a0 = potentials_and_a0(u, v, params, table)[2]
    if not a0 < 0:
        raise NotApplicable(f"amplitude projection needs A0 < 0, got A0={a0:.6g}")
    hn = grid.h_norm_sq(spec, u, v, params)
    s0 = math.sqrt(-hn / a0)
    return s0 * u, s0 * v, s0


# --------------------------------------------------- semitrivial closed forms

@dataclass(frozen=True)
class ScalarPieces:
    grad: float  # ||grad u1||^2
    mass: float  # ||u1||^2
    i0: float    # I0(u1^2, u1^2)


def scalar_pieces(u1, table: KernelTable) -> ScalarPieces:
    spec = table.spec
    uu = u1 * u1
    return ScalarPieces(grid.grad_norm_sq(spec, u1), grid.l2_norm_sq(spec, u1), i0(uu, uu, table))


def _weight(rho, params):
    return params.mu1 + rho**4 * params.mu2 + 2.0 * rho**2 * params.beta


def t_rho(u1, rho: float, params: SystemParams, table: KernelTable, pieces: ScalarPieces | None = None) -> float:
    """Positive root of F(t) = N(t u1, t rho u1)."""
    p = pieces or scalar_pieces(u1, table)
    if not p.i0 < 0:
        raise InvalidState(f"I0(u1^2, u1^2) = {p.i0:.6g} is not negative")
    hn = (1.0 + rho**2) * p.grad + (params.lambda1 + rho**2 * params.lambda2) * p.mass
    return math.sqrt(hn / (_weight(rho, params) * -p.i0))


def h_rho(u1, rho: float, params: SystemParams, table: KernelTable, pieces: ScalarPieces | None = None) -> float:
    """mu1 (b1 + rho^2 b2)^2 / (4 (mu1 + rho^4 mu2 + 2 rho^2 beta) b1)."""
    p = pieces or scalar_pieces(u1, table)
    if not p.i0 < 0:
        raise InvalidState(f"I0(u1^2, u1^2) = {p.i0:.6g} is not negative")
    b1 = p.grad + params.lambda1 * p.mass
    b2 = p.grad + params.lambda2 * p.mass
    return params.mu1 * (b1 + rho**2 * b2) ** 2 / (4.0 * _weight(rho, params) * b1)


def h_curve(u1, rho_grid, params: SystemParams, table: KernelTable) -> list[dict]:
    """Rows (rho, t_rho, h_rho, j_direct); j_direct evaluates J on the fibre point."""
    p = scalar_pieces(u1, table)
    rows = []
    for rho in rho_grid:
        t = t_rho(u1, rho, params, table, p)
        jd = j_energy(t * u1, t * rho * u1, params, table, split=False).j
        rows.append({"rho": float(rho), "t_rho": t, "h_rho": h_rho(u1, rho, params, table, p), "j_direct": jd})
    return rows


def write_h_curve_csv(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rho", "t_rho", "h_rho", "j_direct"])
        for r in rows:
            w.writerow([repr(r["rho"]), repr(r["t_rho"]), repr(r["h_rho"]), repr(r["j_direct"])])


def b_values(u, lam_own: float, lam_other: float, spec) -> tuple[float, float]:
    """(||grad u||^2 + lam_own ||u||^2, ||grad u||^2 + lam_other ||u||^2)."""
    g, m = grid.grad_norm_sq(spec, u), grid.l2_norm_sq(spec, u)
    return g + lam_own * m, g + lam_other * m


def beta_thresholds(u1, u2, params: SystemParams, spec) -> tuple[float, float]:
    """Coupling thresholds built from the two scalar ground states."""
    b11, b12 = b_values(u1, params.lambda1, params.lambda2, spec)
    b22, b21 = b_values(u2, params.lambda2, params.lambda1, spec)
    return params.mu1 * (b12 / b11), params.mu2 * (b21 / b22)
