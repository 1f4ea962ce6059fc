"""Ground state of the single equation -Lap u + lambda u + mu (k * u^2) u = 0."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import grid
from .analysis import DecayFit, asymmetry, decay_fit, farfield_curve, monotonicity_violations
from .descent import ConvergenceError, SolverConfig, minimize_on_nehari
from .energy import SystemParams, el_residual
from .kernel import KernelTable, build_kernel, i0

log = logging.getLogger(__name__)


@dataclass
class ScalarGroundState:
    u: np.ndarray
    spec: grid.GridSpec
    lam: float
    mu: float
    energy: float
    nehari_defect: float
    el_residual_norm: float  # ||r|| / ||u||
    l2_mass: float
    grad_energy: float
    i0: float
    iters: int
    status: str
    h_norm_floor: float
    asymmetry: float = field(default=float("nan"))

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def b(self) -> float:
        """||grad u||^2 + lambda ||u||^2; equals 4 J at a Nehari point."""
        return self.grad_energy + self.lam * self.l2_mass

    def params(self) -> SystemParams:
        """Parameters under which (u, 0) is a critical point of the coupled J.

        The coupling slot is irrelevant when v = 0; it is set to mu.
        """
        return SystemParams(self.lam, self.lam, self.mu, self.mu, self.mu)

    def summary(self) -> dict:
        keys = ("lam", "mu", "energy", "nehari_defect", "el_residual_norm", "l2_mass",
                "grad_energy", "i0", "iters", "status", "h_norm_floor", "asymmetry")
        out = {k: getattr(self, k) for k in keys}
        out["b"] = self.b
        return out


def scalar_state_from_field(u, lam: float, mu: float, table: KernelTable, iters: int = 0,
                            status: str = "loaded", h_norm_floor: float = float("nan")) -> ScalarGroundState:
    """Evaluate all scalar-state diagnostics for a given field."""
    spec = table.spec
    params = SystemParams(lam, lam, mu, mu, mu)
    g, m = grid.grad_norm_sq(spec, u), grid.l2_norm_sq(spec, u)
    uu = u * u
    q = i0(uu, uu, table)
    b = g + lam * m
    ru, _ = el_residual(u, np.zeros_like(u), params, table)
    return ScalarGroundState(
        u=u, spec=spec, lam=lam, mu=mu,
        energy=0.5 * b + 0.25 * mu * q,
        nehari_defect=abs(b + mu * q) / b,
        el_residual_norm=math.sqrt(grid.l2_norm_sq(spec, ru) / m),
        l2_mass=m, grad_energy=g, i0=q, iters=iters, status=status,
        h_norm_floor=h_norm_floor, asymmetry=asymmetry(spec, u),
    )


def solve_scalar(lam: float, mu: float, spec: grid.GridSpec, cfg: SolverConfig | None = None,
                 table: KernelTable | None = None, init: np.ndarray | None = None) -> ScalarGroundState:
    """Minimise J over the Nehari set of the single equation.

    Raises ConvergenceError (carrying the last state) if the relative
    residual does not reach ``cfg.tol_grad``.
    """
    SystemParams(lam, lam, mu, mu, mu)  # validation
    cfg = cfg or SolverConfig()
    table = table or build_kernel(spec)
    u0 = init if init is not None else cfg.init_u.sample(spec, lam, mu)
    params = SystemParams(lam, lam, mu, mu, mu)
    res = minimize_on_nehari(u0, np.zeros_like(u0), params, table, cfg)
    state = scalar_state_from_field(res.u, lam, mu, table, iters=res.iters, status=res.status,
                                    h_norm_floor=res.h_norm_floor)
    log.info("scalar solve (lambda=%g, mu=%g): %s after %d steps, J=%.15g, residual %.3g",
             lam, mu, res.status, res.iters, state.energy, state.el_residual_norm)
    if not res.converged:
        raise ConvergenceError(f"scalar solve {res.status} after {res.iters} steps "
                               f"(residual {res.residual_u:.3g})", state)
    if state.nehari_defect > cfg.tol_nehari:
        raise ConvergenceError(f"Nehari defect {state.nehari_defect:.3g} above {cfg.tol_nehari}", state)
    return state


@dataclass
class ScalarDiagnostics:
    farfield: list[tuple[float, float]]
    decay: DecayFit
    monotonicity_violations: int
    asymmetry: float

    def summary(self) -> dict:
        return {
            "farfield": [list(p) for p in self.farfield],
            "decay_slope": self.decay.slope,
            "decay_r2": self.decay.r2,
            "monotonicity_violations": self.monotonicity_violations,
            "asymmetry": self.asymmetry,
        }


def scalar_diagnostics(state: ScalarGroundState, table: KernelTable) -> ScalarDiagnostics:
    spec = state.spec
    return ScalarDiagnostics(
        farfield=farfield_curve(state.u, table),
        decay=decay_fit(spec, state.u),
        monotonicity_violations=monotonicity_violations(spec, state.u),
        asymmetry=asymmetry(spec, state.u),
    )
