"""Coupled ground states and sweeps over the coupling constant beta."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import grid
from .descent import AUTO_AMPLITUDE, ConvergenceError, GaussianInit, SolverConfig, minimize_on_nehari
from .energy import EnergyBreakdown, SystemParams, j_energy
from .kernel import KernelTable, build_kernel
from .nehari import beta_thresholds
from .scalar import ScalarGroundState, solve_scalar

__all__ = [
    "ConvergenceError", "CoupledGroundState", "SolverConfig", "SweepResult",
    "solve_coupled", "sweep_beta", "write_sweep_csv",
]

log = logging.getLogger(__name__)


@dataclass
class CoupledGroundState:
    u: np.ndarray
    v: np.ndarray
    spec: grid.GridSpec
    params: SystemParams
    c_level: float
    breakdown: EnergyBreakdown
    iters: int
    status: str
    residual_u: float
    residual_v: float
    semitrivial: bool
    h_norm_floor: float
    start: int = 0  # index of the multistart run that produced the state

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def summary(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "c_level": self.c_level,
            "breakdown": self.breakdown.to_dict(),
            "iters": self.iters,
            "status": self.status,
            "residual_u": self.residual_u,
            "residual_v": self.residual_v,
            "semitrivial": self.semitrivial,
            "h_norm_floor": self.h_norm_floor,
            "start": self.start,
        }


def _perturbed(g: GaussianInit, rng: np.random.Generator, scale: float, lam: float, mu: float) -> GaussianInit:
    w = g.width if g.width is not None else 1.0 / math.sqrt(lam)
    a = g.amplitude if g.amplitude is not None else AUTO_AMPLITUDE * lam / math.sqrt(mu)
    w1, w2 = (w, w) if np.isscalar(w) else w
    dc = rng.normal(0.0, scale, 2)
    dw = np.exp(rng.normal(0.0, scale, 2))
    return GaussianInit(
        center=(g.center[0] + float(dc[0]), g.center[1] + float(dc[1])),
        width=(w1 * float(dw[0]), w2 * float(dw[1])),
        amplitude=a * float(np.exp(rng.normal(0.0, scale))),
        scale=g.scale,
    )


def initial_pairs(params: SystemParams, spec: grid.GridSpec, cfg: SolverConfig):
    """Start 0 uses the configured Gaussians; later starts perturb them with a seeded RNG."""
    rng = np.random.default_rng(cfg.seed)
    for k in range(cfg.multistart):
        gu, gv = cfg.init_u, cfg.init_v
        if k > 0:
            gu = _perturbed(gu, rng, cfg.perturbation, params.lambda1, params.mu1)
            gv = _perturbed(gv, rng, cfg.perturbation, params.lambda2, params.mu2)
        yield gu.sample(spec, params.lambda1, params.mu1), gv.sample(spec, params.lambda2, params.mu2)


def _state_from(res, params, table, start) -> CoupledGroundState:
    bd = j_energy(res.u, res.v, params, table, split=False)
    nu, nv = math.sqrt(bd.mass_u), math.sqrt(bd.mass_v)
    hi = max(nu, nv)
    semi = res.dropped is not None or hi == 0 or min(nu, nv) / hi < 1e-6
    return CoupledGroundState(
        u=res.u, v=res.v, spec=table.spec, params=params, c_level=bd.j, breakdown=bd,
        iters=res.iters, status=res.status, residual_u=res.residual_u, residual_v=res.residual_v,
        semitrivial=bool(semi), h_norm_floor=res.h_norm_floor, start=start,
    )


def solve_coupled(params: SystemParams, spec: grid.GridSpec, cfg: SolverConfig | None = None,
                  table: KernelTable | None = None, init=None) -> CoupledGroundState:
    """Least-energy positive pair on the Nehari set.

    ``init`` overrides the configured Gaussians with an explicit (u, v) pair
    (used for warm starts) and disables multistart.  Among several starts the
    converged state with the lowest level is returned.  Collapse to a
    semitrivial pair is reported through ``state.semitrivial``, not raised.
    """
    cfg = cfg or SolverConfig()
    table = table or build_kernel(spec)
    starts = [init] if init is not None else initial_pairs(params, spec, cfg)
    best = None
    last = None
    for k, (u0, v0) in enumerate(starts):
        res = minimize_on_nehari(u0, v0, params, table, cfg)
        state = _state_from(res, params, table, k)
        log.info("coupled start %d (beta=%g): %s after %d steps, c=%.15g, semitrivial=%s",
                 k, params.beta, res.status, res.iters, state.c_level, state.semitrivial)
        last = state
        if state.converged and (best is None or state.c_level < best.c_level):
            best = state
    if best is None:
        raise ConvergenceError(f"coupled solve {last.status} after {last.iters} steps "
                               f"(residuals {last.residual_u:.3g}, {last.residual_v:.3g})", last)
    n_rel = abs(best.breakdown.n) / best.breakdown.h_norm_sq
    if n_rel > cfg.tol_nehari:
        raise ConvergenceError(f"Nehari defect {n_rel:.3g} above {cfg.tol_nehari}", best)
    return best


# ---------------------------------------------------------------- sweeps

SWEEP_COLUMNS = ["beta", "c", "j_semitrivial_u", "j_semitrivial_v", "beta1", "beta2",
                 "semitrivial_flag", "iters", "residual", "status"]


@dataclass
class SweepResult:
    rows: list[dict]
    refs: tuple[ScalarGroundState, ScalarGroundState]
    beta1: float
    beta2: float
    states: list[CoupledGroundState | None]

    def c_nonincreasing(self) -> bool:
        cs = [r["c"] for r in self.rows if r["status"] == "converged"]
        return all(b <= a * (1 + 1e-12) for a, b in zip(cs, cs[1:]))


def scalar_references(params: SystemParams, spec, cfg, table) -> tuple[ScalarGroundState, ScalarGroundState]:
    """Scalar ground states u1 for (lambda1, mu1) and u2 for (lambda2, mu2)."""
    u1 = solve_scalar(params.lambda1, params.mu1, spec, cfg, table)
    if (params.lambda2, params.mu2) == (params.lambda1, params.mu1):
        return u1, u1
    u2 = solve_scalar(params.lambda2, params.mu2, spec, replace(cfg, init_u=cfg.init_v), table)
    return u1, u2


def sweep_beta(params_base: SystemParams, betas, spec: grid.GridSpec, cfg: SolverConfig | None = None,
               table: KernelTable | None = None, refs=None) -> SweepResult:
    """Solve the coupled problem for each beta in increasing order.

    Each solve after the first warm-starts from the previous nontrivial
    state.  Failures are recorded in the row and the sweep continues.
    """
    betas = [float(b) for b in betas]
    if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta list must be sorted in increasing order")
    cfg = cfg or SolverConfig()
    table = table or build_kernel(spec)
    refs = refs or scalar_references(params_base, spec, cfg, table)
    b1, b2 = beta_thresholds(refs[0].u, refs[1].u, params_base, spec)
    rows, states = [], []
    warm = None
    for beta in betas:
        params = replace(params_base, beta=beta)
        row = {"beta": beta, "j_semitrivial_u": refs[0].energy, "j_semitrivial_v": refs[1].energy,
               "beta1": b1, "beta2": b2}
        try:
            st = solve_coupled(params, spec, cfg, table, init=warm)
        except ConvergenceError as exc:
            log.warning("sweep: beta=%g failed: %s", beta, exc)
            st = exc.state
            row.update(c=float("nan"), semitrivial_flag=bool(st.semitrivial) if st else False,
                       iters=st.iters if st else 0,
                       residual=max(st.residual_u, st.residual_v) if st else float("nan"),
                       status="failed")
            rows.append(row)
            states.append(None)
            continue
        row.update(c=st.c_level, semitrivial_flag=st.semitrivial, iters=st.iters,
                   residual=max(st.residual_u, st.residual_v), status=st.status)
        rows.append(row)
        states.append(st)
        warm = None if st.semitrivial else (st.u, st.v)
    result = SweepResult(rows=rows, refs=refs, beta1=b1, beta2=b2, states=states)
    if not result.c_nonincreasing():
        log.warning("sweep: c is not non-increasing in beta")
    return result


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in SWEEP_COLUMNS])
