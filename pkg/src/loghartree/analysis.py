"""Post-hoc checks on computed states and their JSON/CSV reports.

Every check carries a nonnegative defect, the tolerance it was compared with,
and ``passed = defect <= tolerance``.  Nothing here modifies its inputs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import grid
from .kernel import KernelTable, farfield_check

DECAY_WINDOW = (0.3, 0.6)      # fractions of L
FARFIELD_FRACTIONS = (0.5, 0.6, 0.7, 0.8, 0.9)
FARFIELD_PROBE = 0.8
POSITIVITY_FLOOR = 1e-14     # samples below -floor count as sign changes


# ----------------------------------------------------------- radial helpers

@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r2: float
    n_points: int


def asymmetry(spec: grid.GridSpec, f: np.ndarray) -> float:
    """||f - radialize(f)|| / ||f||."""
    nf = grid.l2_norm_sq(spec, f)
    if nf == 0:
        return 0.0
    return math.sqrt(grid.l2_norm_sq(spec, f - grid.radialize(spec, f)) / nf)


def monotonicity_violations(spec: grid.GridSpec, f: np.ndarray, tol: float = 1e-10) -> int:
    """Number of adjacent radial bins where the profile increases by more than tol."""
    prof = grid.radial_profile(spec, f)
    return int(np.count_nonzero(np.diff(prof.mean) > tol))


def decay_fit(spec: grid.GridSpec, f: np.ndarray, window=DECAY_WINDOW) -> DecayFit:
    """Least-squares line through ln(profile) against r over the window."""
    prof = grid.radial_profile(spec, f)
    lo, hi = window[0] * spec.half_width, window[1] * spec.half_width
    sel = (prof.r >= lo) & (prof.r <= hi) & (prof.mean > 0)
    if np.count_nonzero(sel) < 3:
        return DecayFit(float("nan"), float("nan"), float("nan"), int(np.count_nonzero(sel)))
    fit = stats.linregress(prof.r[sel], np.log(prof.mean[sel]))
    return DecayFit(float(fit.slope), float(fit.intercept), float(fit.rvalue**2), int(np.count_nonzero(sel)))


def farfield_curve(f: np.ndarray, table: KernelTable, fractions=FARFIELD_FRACTIONS):
    """(r, max over the circle of |w_f + (|f|_2^2 / 2 pi) ln r|) for density f^2."""
    radii = [a * table.spec.half_width for a in fractions]
    return farfield_check(f * f, table, radii)


# ------------------------------------------------------------------ report

@dataclass(frozen=True)
class Tolerances:
    el_residual: float = 1e-6
    nehari: float = 1e-8
    quarter_identity: float = 1e-8
    asymmetry: float = 1e-3
    monotonicity: int = 0
    monotonicity_bin_tol: float = 1e-10
    farfield: float = 1e-3
    decay_r2: float = 0.99
    ordering_margin: float = 1e-4
    min_mass_fraction: float = 0.01

    @classmethod
    def from_dict(cls, d: dict | None) -> "Tolerances":
        return cls(**(d or {}))


@dataclass
class Check:
    defect: float
    tolerance: float
    passed: bool


@dataclass
class VerificationReport:
    kind: str  # "scalar" | "coupled"
    metrics: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    ordering: dict | str | None = None  # None for scalar states

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return sorted(k for k, c in self.checks.items() if not c.passed)

    def add(self, name: str, defect: float, tolerance: float) -> None:
        defect = float(defect)
        if not defect >= 0 or not math.isfinite(defect):
            # nan or negative defects are treated as a failed check
            self.checks[name] = Check(float("inf") if not defect >= 0 else defect, float(tolerance), False)
            return
        self.checks[name] = Check(defect, float(tolerance), defect <= tolerance)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "passed": self.passed,
            "metrics": _clean(self.metrics),
            "checks": {k: asdict(c) for k, c in self.checks.items()},
            "curves": {k: [[float(r), float(v)] for r, v in pts] for k, pts in self.curves.items()},
        }
        if self.ordering is not None:
            out["ordering"] = _clean(self.ordering)
        return _clean(out)


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _component_checks(report, name, f, spec, table, tol):
    m = report.metrics
    if not f.any():
        m[f"{name}_present"] = False
        return
    m[f"{name}_present"] = True
    asym = asymmetry(spec, f)
    mono = monotonicity_violations(spec, f, tol.monotonicity_bin_tol)
    fit = decay_fit(spec, f)
    ff = farfield_curve(f, table)
    probe = min(ff, key=lambda p: abs(p[0] - FARFIELD_PROBE * spec.half_width))
    m[f"asymmetry_{name}"] = asym
    m[f"monotonicity_violations_{name}"] = mono
    m[f"decay_slope_{name}"] = fit.slope
    m[f"decay_r2_{name}"] = fit.r2
    m[f"farfield_defect_{name}"] = probe[1]
    negative = int(np.count_nonzero(f < -POSITIVITY_FLOOR))
    m[f"negative_samples_{name}"] = negative
    report.curves[f"farfield_{name}"] = ff
    prof = grid.radial_profile(spec, f)
    report.curves[f"profile_{name}"] = list(zip(prof.r.tolist(), prof.mean.tolist()))
    report.add(f"asymmetry_{name}", asym, tol.asymmetry)
    report.add(f"monotonicity_{name}", mono, tol.monotonicity)
    report.add(f"decay_slope_{name}", max(fit.slope, 0.0) if math.isfinite(fit.slope) else float("nan"), 0.0)
    report.add(f"decay_r2_{name}", 1.0 - fit.r2 if math.isfinite(fit.r2) else float("nan"), 1.0 - tol.decay_r2)
    report.add(f"farfield_{name}", probe[1], tol.farfield)
    report.add(f"positivity_{name}", negative, 0)


def verify(state, scalar_refs=None, table: KernelTable | None = None,
           tolerances: Tolerances | None = None) -> VerificationReport:
    """Run every applicable check on a scalar or coupled state.

    ``scalar_refs`` is a pair (u1 state, u2 state) of scalar ground states; it
    enables the energy-ordering section for coupled states.
    """
    from .energy import el_residual, j_energy
    from .kernel import build_kernel

    tol = tolerances or Tolerances()
    spec = state.spec
    table = table or build_kernel(spec)
    if hasattr(state, "v"):
        u, v, params, kind = state.u, state.v, state.params, "coupled"
    else:
        u, v, params, kind = state.u, np.zeros_like(state.u), state.params(), "scalar"
    report = VerificationReport(kind=kind)
    m = report.metrics
    m["params"] = params.to_dict()
    m["grid"] = {"L": spec.half_width, "N": spec.n}

    bd = j_energy(u, v, params, table, split=True)
    m["breakdown"] = bd.to_dict()
    ru, rv = el_residual(u, v, params, table)
    for name, f, r in (("u", u, ru), ("v", v, rv)):
        nf = grid.l2_norm_sq(spec, f)
        rel = math.sqrt(grid.l2_norm_sq(spec, r) / nf) if nf > 0 else 0.0
        m[f"el_residual_rel_{name}"] = rel
        report.add(f"el_residual_{name}", rel, tol.el_residual)
    nd = abs(bd.n) / bd.h_norm_sq if bd.h_norm_sq > 0 else float("nan")
    qd = abs(bd.j - 0.25 * bd.h_norm_sq) / abs(bd.j) if bd.j != 0 else float("nan")
    m["nehari_defect"] = nd
    m["quarter_identity_defect"] = qd
    report.add("nehari", nd, tol.nehari)
    report.add("quarter_identity", qd, tol.quarter_identity)
    report.add("positive_level", max(-bd.j, 0.0) if bd.j != 0 else float("nan"), 0.0)

    _component_checks(report, "u", u, spec, table, tol)
    _component_checks(report, "v", v, spec, table, tol)

    if kind == "coupled":
        total = bd.mass_u + bd.mass_v
        frac = min(bd.mass_u, bd.mass_v) / total if total > 0 else 0.0
        m["min_mass_fraction"] = frac
        if scalar_refs is None:
            report.ordering = "skipped"
        else:
            r1, r2 = scalar_refs
            lowest = min(r1.energy, r2.energy)
            margin = lowest - bd.j
            rel = margin / lowest
            report.ordering = {"c": bd.j, "j_u1_0": r1.energy, "j_0_u2": r2.energy,
                               "margin": margin, "relative_margin": rel}
            report.add("ordering", max(tol.ordering_margin - rel, 0.0), 0.0)
            report.add("nontrivial", max(tol.min_mass_fraction - frac, 0.0), 0.0)
    return report


def emit_report(report: VerificationReport, path: str | Path) -> list[Path]:
    """Write the report as JSON plus one ``<stem>_<curve>.csv`` per curve; returns written paths."""
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"cannot write report {path}: directory {path.parent} does not exist")
    written = [path]
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    for name, pts in sorted(report.curves.items()):
        cpath = path.with_name(f"{path.stem}_{name}.csv")
        with cpath.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "value"])
            for r, val in pts:
                w.writerow([repr(float(r)), repr(float(val))])
        written.append(cpath)
    return written
