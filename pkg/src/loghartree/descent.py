"""Nehari-constrained minimisation of J shared by the scalar and coupled solvers.

Every iterate lives on the Nehari set.  A step is

    z <- P(|z + alpha d|),   d = -M^-1 r,   M = diag(-Lap + lambda_i)

where r is the L2 gradient of J (the strong Euler-Lagrange residual), the
component of d along z (the amplitude fibre) is removed in the M inner
product, and P recentres the pair on its centre of mass and rescales it onto
N = 0.  On the Nehari set J coincides with the scale-invariant quotient
||z||_H^4 / (-4 A0(z)), so r is also the gradient of the reduced problem and
the line search is one-dimensional.  Step sizes are chosen by Armijo
backtracking on J, switching to a residual-decrease test once the predicted
decrease of J is below its rounding error.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import grid
from .energy import SystemParams, potentials_and_a0
from .kernel import KernelTable
from .nehari import NotApplicable, dilation_project

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Solver did not reach its tolerances; ``state`` holds the last iterate."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


# Peak height of the lambda = mu = 1 ground state is about 6.7; the amplitude
# scales like lambda / sqrt(mu).  Starting near it keeps the dilation root of
# the first projection close to 1.
AUTO_AMPLITUDE = 6.0
MAX_DILATIONS = 8
# centre-of-mass offsets (in cells) left uncorrected by the projection
RECENTER_TOL = 1e-9


@dataclass(frozen=True)
class GaussianInit:
    """scale * a * exp(-((x1 - c1)^2 / s1^2 + (x2 - c2)^2 / s2^2) / 2).

    width None means 1/sqrt(lambda); amplitude None means 6 lambda / sqrt(mu).
    """
    center: tuple[float, float] = (0.0, 0.0)
    width: tuple[float, float] | float | None = None
    amplitude: float | None = None
    scale: float = 1.0

    def sample(self, spec: grid.GridSpec, lam: float, mu: float = 1.0) -> np.ndarray:
        w = self.width if self.width is not None else 1.0 / math.sqrt(lam)
        a = self.amplitude if self.amplitude is not None else AUTO_AMPLITUDE * lam / math.sqrt(mu)
        a *= self.scale
        s1, s2 = (w, w) if np.isscalar(w) else w
        x1, x2 = spec.mesh
        c1, c2 = self.center
        return a * np.exp(-0.5 * (((x1 - c1) / s1) ** 2 + ((x2 - c2) / s2) ** 2))


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 20000
    tol_grad: float = 1e-8
    tol_nehari: float = 1e-10
    shrink: float = 0.5
    armijo: float = 1e-4
    step0: float = 1.0
    step_max: float = 8.0
    energy_slack: float = 1e-13
    recenter: bool = True
    absolute_value: bool = True
    positivity_tol: float = 1e-6
    init_u: GaussianInit = field(default_factory=GaussianInit)
    # Unequal default amplitudes: with identical starts and symmetric
    # parameters the descent never leaves the subspace u = v.
    init_v: GaussianInit = field(default_factory=lambda: GaussianInit(scale=0.8))
    seed: int = 0
    multistart: int = 1
    perturbation: float = 0.3
    semitrivial_ratio: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.tol_grad > 0 and self.tol_nehari > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if not 0 < self.armijo < 1:
            raise ValueError("sufficient-decrease constant must lie in (0, 1)")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        d = dict(d)
        for key in ("init_u", "init_v"):
            if key in d and isinstance(d[key], dict):
                g = dict(d[key])
                if "center" in g:
                    g["center"] = tuple(g["center"])
                if isinstance(g.get("width"), list):
                    g["width"] = tuple(g["width"])
                d[key] = GaussianInit(**g)
        return cls(**d)


@dataclass
class DescentResult:
    u: np.ndarray
    v: np.ndarray
    j: float
    h_norm_sq: float
    a0: float
    iters: int
    residual_u: float
    residual_v: float
    status: str  # "converged" | "max_iters" | "nan" | "stalled"
    h_norm_floor: float
    history: list[float]
    dropped: str | None = None  # component zeroed after collapsing below semitrivial_ratio

    @property
    def converged(self) -> bool:
        return self.status == "converged"


class _Point:
    """A pair on the Nehari set together with its convolutions."""

    __slots__ = ("u", "v", "ku", "kv", "a0", "hn", "j")

    def __init__(self, u, v, ku, kv, a0, hn):
        self.u, self.v, self.ku, self.kv, self.a0, self.hn = u, v, ku, kv, a0, hn
        self.j = 0.5 * hn + 0.25 * a0


def _recenter(spec, u, v, tol):
    c1, c2 = grid.center_of_mass(spec, u * u + v * v)
    if math.hypot(c1, c2) <= tol:
        return u, v
    u = grid.shift(spec, u, -c1, -c2)
    v = grid.shift(spec, v, -c1, -c2) if v.any() else v
    return u, v


def _absolute(f, tol):
    # Dips below -tol * max|f| are sign changes and get folded up.  Smaller
    # ones are left alone: on a coarse grid the discrete critical point itself
    # rings slightly below zero in the tails, and folding it would pin the
    # residual.
    peak = np.max(np.abs(f))
    return np.abs(f) if peak > 0 and f.min() < -tol * peak else f


def project(u, v, params: SystemParams, table: KernelTable, recenter: bool = True,
            absolute: bool = True, positivity_tol: float = 0.0) -> _Point:
    """Recentre, take absolute values and move (u, v) onto the Nehari set."""
    spec = table.spec
    if recenter:
        u, v = _recenter(spec, u, v, RECENTER_TOL * spec.h)
    if absolute:
        u, v = _absolute(u, positivity_tol), _absolute(v, positivity_tol)
    ku, kv, a0 = potentials_and_a0(u, v, params, table)
    # The fibre root assumes the continuum scaling law of the kernel, which
    # a coarse grid only approximates; repeat the dilation a few times.
    for _ in range(MAX_DILATIONS):
        if a0 < 0:
            break
        u, v, t0 = dilation_project(u, v, params, table)
        log.info("A0 >= 0 at projection; dilated by t0=%.6g", t0)
        if absolute:
            u, v = _absolute(u, positivity_tol), _absolute(v, positivity_tol)
        ku, kv, a0 = potentials_and_a0(u, v, params, table)
    if not a0 < 0:
        raise NotApplicable(f"A0={a0:.6g} still nonnegative after {MAX_DILATIONS} dilations; "
                            f"the grid (h={spec.h:g}) is probably too coarse to resolve a Nehari state")
    hn = grid.h_norm_sq(spec, u, v, params)
    s2 = -hn / a0
    s = math.sqrt(s2)
    return _Point(s * u, s * v, s2 * ku, s2 * kv, s2 * s2 * a0, s2 * hn)


def _residual(p: _Point, params: SystemParams, spec):
    ru = rv = None
    if p.u.any():
        ru = -grid.laplacian(spec, p.u) + params.lambda1 * p.u + (params.mu1 * p.ku + params.beta * p.kv) * p.u
    if p.v.any():
        rv = -grid.laplacian(spec, p.v) + params.lambda2 * p.v + (params.mu2 * p.kv + params.beta * p.ku) * p.v
    return (np.zeros_like(p.u) if ru is None else ru), (np.zeros_like(p.v) if rv is None else rv)


def _rel(spec, r, f):
    nf = grid.l2_norm_sq(spec, f)
    return math.sqrt(grid.l2_norm_sq(spec, r) / nf) if nf > 0 else 0.0


def _grad_measure(spec, ru, rv, p):
    return _rel(spec, ru, p.u), _rel(spec, rv, p.v)


def _collapsed(spec, p, ratio):
    """Name of the component whose L2 norm fell below ratio times the other's."""
    nu, nv = math.sqrt(grid.l2_norm_sq(spec, p.u)), math.sqrt(grid.l2_norm_sq(spec, p.v))
    if nu == 0 or nv == 0:
        return None
    if nu < ratio * nv:
        return "u"
    if nv < ratio * nu:
        return "v"
    return None


def minimize_on_nehari(u, v, params: SystemParams, table: KernelTable, cfg: SolverConfig,
                       callback=None) -> DescentResult:
    """Descend J over the Nehari set from (u, v).

    A component that starts identically zero stays zero, which gives the
    scalar problem.  A component whose norm collapses below
    ``cfg.semitrivial_ratio`` times the other one is zeroed and the descent
    continues on the remaining one.
    """
    spec = table.spec
    p = project(u, v, params, table, cfg.recenter, cfg.absolute_value, cfg.positivity_tol)
    ru, rv = _residual(p, params, spec)
    res_u, res_v = _grad_measure(spec, ru, rv, p)
    dropped = None
    history = [p.j]
    floor = p.hn
    alpha = cfg.step0
    status = "max_iters"
    it = 0
    for it in range(cfg.max_iters + 1):
        if not (math.isfinite(p.j) and np.all(np.isfinite(p.u)) and np.all(np.isfinite(p.v))):
            status = "nan"
            log.error("non-finite iterate at step %d", it)
            break
        if callback is not None:
            callback(it, p, res_u, res_v)
        if max(res_u, res_v) <= cfg.tol_grad:
            status = "converged"
            break
        if it == cfg.max_iters:
            break
        du = -grid.helmholtz_solve(spec, ru, params.lambda1) if p.u.any() else np.zeros_like(ru)
        dv = -grid.helmholtz_solve(spec, rv, params.lambda2) if p.v.any() else np.zeros_like(rv)
        # <d, z>_M = -<r, z>_L2; remove the amplitude direction
        dz = -(grid.integrate(spec, ru * p.u) + grid.integrate(spec, rv * p.v))
        coef = dz / p.hn
        du -= coef * p.u
        dv -= coef * p.v
        slope = grid.integrate(spec, ru * du) + grid.integrate(spec, rv * dv)
        if not slope < 0:
            status = "stalled"
            break
        # Once the predicted decrease of J is below its roundoff the Armijo
        # test is meaningless; a step is then accepted if it reduces the
        # residual without raising J beyond roundoff.
        noise = cfg.energy_slack * abs(p.j)
        res = max(res_u, res_v)
        while True:
            q = project(p.u + alpha * du, p.v + alpha * dv, params, table, cfg.recenter,
                        cfg.absolute_value, cfg.positivity_tol)
            qru, qrv = _residual(q, params, spec)
            q_res = _grad_measure(spec, qru, qrv, q)
            if -alpha * slope > noise:
                if q.j <= p.j + cfg.armijo * alpha * slope:
                    break
            elif q.j - p.j <= noise and max(q_res) < res:
                break
            alpha *= cfg.shrink
            if alpha < 1e-14:
                q = None
                break
        if q is None:
            status = "stalled"
            log.warning("line search failed at step %d (residuals %.3g, %.3g)", it, res_u, res_v)
            break
        p, ru, rv = q, qru, qrv
        res_u, res_v = q_res
        gone = _collapsed(spec, p, cfg.semitrivial_ratio) if dropped is None else None
        if gone is not None:
            log.info("component %s collapsed at step %d; continuing with the other one", gone, it)
            dropped = gone
            zu = np.zeros_like(p.u)
            p = project(zu if gone == "u" else p.u, zu if gone == "v" else p.v, params, table,
                        cfg.recenter, cfg.absolute_value, cfg.positivity_tol)
            ru, rv = _residual(p, params, spec)
            res_u, res_v = _grad_measure(spec, ru, rv, p)
            alpha = cfg.step0
        history.append(p.j)
        floor = min(floor, p.hn)
        alpha = min(alpha * 2.0, cfg.step_max)
    if status == "converged" and cfg.absolute_value and min(p.u.min(), p.v.min()) < 0:
        # Final re-projection with a full fold.  Residual-level noise in the
        # tails has an arbitrary sign; folding it is kept only if the pair
        # stays critical, so genuine sign changes survive and get reported.
        q = project(p.u, p.v, params, table, cfg.recenter, True, 0.0)
        qru, qrv = _residual(q, params, spec)
        q_res = _grad_measure(spec, qru, qrv, q)
        if max(q_res) <= cfg.tol_grad:
            p = q
            res_u, res_v = q_res
        else:
            log.info("final fold rejected (residuals %.3g, %.3g)", *q_res)
    return DescentResult(
        u=p.u, v=p.v, j=p.j, h_norm_sq=p.hn, a0=p.a0, iters=it,
        residual_u=res_u, residual_v=res_v, status=status,
        h_norm_floor=floor, history=history, dropped=dropped,
    )
