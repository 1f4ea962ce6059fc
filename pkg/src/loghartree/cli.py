"""Command-line interface.

    loghartree {scalar,thresholds,coupled,sweep,verify,selftest} [--config PATH] [--out DIR]
               [--threads K] [--grid-n N] [--box L]

Exit codes: 0 all checks passed, 1 a check failed, 2 the run itself failed
(invalid configuration, non-convergence, I/O error).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import scipy.fft as sfft

from . import __version__, grid
from .analysis import Tolerances, emit_report, verify
from .descent import ConvergenceError, SolverConfig
from .energy import SystemParams
from .kernel import build_kernel
from .nehari import b_values, beta_thresholds

log = logging.getLogger("loghartree")

EXIT_OK, EXIT_CHECK, EXIT_RUN = 0, 1, 2
# checks that only make sense for a nontrivial coupled state
_REGIME_CHECKS = ("ordering", "nontrivial")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    half_width: float | str = "auto"
    n: int = 256
    params: dict = field(default_factory=lambda: {"lambda1": 1.0, "lambda2": 1.0, "mu1": 1.0,
                                                  "mu2": 1.0, "beta": 1.5})
    solver: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    kernel: str = "spectral"
    betas: list = field(default_factory=list)
    out: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        g = d.pop("grid", {}) or {}
        known = {"params", "solver", "tolerances", "kernel", "betas", "out"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        unknown = set(g) - {"L", "N"}
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        base = cls()
        return cls(half_width=g.get("L", "auto"), n=g.get("N", 256),
                   params={**base.params, **d.get("params", {})},
                   solver=d.get("solver", {}), tolerances=d.get("tolerances", {}),
                   kernel=d.get("kernel", "spectral"), betas=list(d.get("betas", [])),
                   out=d.get("out", "out"))

    def to_dict(self) -> dict:
        return {"grid": {"L": self.half_width, "N": self.n}, "params": self.params,
                "solver": self.solver, "tolerances": self.tolerances, "kernel": self.kernel,
                "betas": self.betas, "out": self.out}

    # validated views -------------------------------------------------------
    def system_params(self) -> SystemParams:
        try:
            return SystemParams(**self.params)
        except TypeError as exc:
            raise ConfigError(f"params: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def grid_spec(self) -> grid.GridSpec:
        p = self.system_params()
        L = self.half_width
        if L == "auto":
            L = grid.auto_half_width(p.lambda1, p.lambda2)
        try:
            return grid.make_grid(float(L), self.n)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid: {exc}") from None

    def solver_config(self) -> SolverConfig:
        try:
            return SolverConfig.from_dict(self.solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from None

    def tolerance_set(self) -> Tolerances:
        try:
            return Tolerances.from_dict(self.tolerances)
        except TypeError as exc:
            raise ConfigError(f"tolerances: {exc}") from None

    def validate(self) -> None:
        self.system_params()
        self.grid_spec()
        self.solver_config()
        self.tolerance_set()
        if self.kernel not in ("spectral", "point"):
            raise ConfigError(f"kernel must be 'spectral' or 'point', got {self.kernel!r}")
        if any(not isinstance(b, (int, float)) or not b > 0 for b in self.betas):
            raise ConfigError("betas must be positive numbers")


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            cfg = RunConfig.from_dict(json.loads(Path(args.config).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
    if args.grid_n is not None:
        cfg.n = args.grid_n
    if args.box is not None:
        cfg.half_width = args.box
    if args.out is not None:
        cfg.out = args.out
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- outputs

def _json_dump(obj, path: Path) -> None:
    from .analysis import _clean
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")


def _write_manifest(out: Path, command: str, cfg: RunConfig | None, timings: dict, outputs: list,
                    exit_code: int) -> None:
    manifest = {
        "command": command,
        "config": cfg.to_dict() if cfg else None,
        "versions": {"loghartree": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "timings_s": timings,
        "outputs": sorted(str(p) for p in outputs),
        "exit_code": exit_code,
    }
    _json_dump(manifest, out / "manifest.json")


def _save_scalar(out: Path, name: str, state) -> list[Path]:
    fpath = out / f"{name}.f64"
    grid.save_field(fpath, state.spec, state.u)
    spath = out / f"{name}.json"
    _json_dump({"kind": "scalar", "field": fpath.name, **state.summary()}, spath)
    return [fpath, Path(str(fpath) + ".json"), spath]


def _load_scalar(path: Path, table_cache: dict):
    from .scalar import scalar_state_from_field
    meta = json.loads(path.read_text())
    spec, u = grid.load_field(path.parent / meta["field"])
    table = table_cache.setdefault(spec, build_kernel(spec))
    return scalar_state_from_field(u, meta["lam"], meta["mu"], table, iters=meta.get("iters", 0))


def _exit_for(report, semitrivial: bool = False) -> int:
    failed = [k for k in report.failed() if not (semitrivial and k in _REGIME_CHECKS)]
    if failed:
        log.warning("failed checks: %s", ", ".join(failed))
        return EXIT_CHECK
    return EXIT_OK


# ---------------------------------------------------------------- commands

def cmd_scalar(cfg: RunConfig, out: Path, which: int = 1) -> tuple[int, list]:
    from .scalar import scalar_diagnostics, solve_scalar
    p = cfg.system_params()
    lam, mu = (p.lambda1, p.mu1) if which == 1 else (p.lambda2, p.mu2)
    spec = cfg.grid_spec()
    table = build_kernel(spec, cfg.kernel)
    state = solve_scalar(lam, mu, spec, cfg.solver_config(), table)
    diag = scalar_diagnostics(state, table)
    report = verify(state, None, table, cfg.tolerance_set())
    outputs = _save_scalar(out, f"u{which}", state)
    _json_dump(diag.summary(), out / "diagnostics.json")
    outputs += [out / "diagnostics.json"] + emit_report(report, out / "report.json")
    print(f"scalar ground state (lambda={lam:g}, mu={mu:g}): J={state.energy:.12g} "
          f"iters={state.iters} residual={state.el_residual_norm:.3g} "
          f"nehari_defect={state.nehari_defect:.3g} report={'pass' if report.passed else 'FAIL'}")
    return _exit_for(report), outputs


def cmd_thresholds(cfg: RunConfig, out: Path) -> tuple[int, list]:
    from .solver import scalar_references
    p = cfg.system_params()
    spec = cfg.grid_spec()
    table = build_kernel(spec, cfg.kernel)
    r1, r2 = scalar_references(p, spec, cfg.solver_config(), table)
    b1, b2 = beta_thresholds(r1.u, r2.u, p, spec)
    b11, b12 = b_values(r1.u, p.lambda1, p.lambda2, spec)
    b22, b21 = b_values(r2.u, p.lambda2, p.lambda1, spec)
    result = {"beta1": b1, "beta2": b2, "b11": b11, "b12": b12, "b22": b22, "b21": b21,
              "j_u1_0": r1.energy, "j_0_u2": r2.energy, "params": p.to_dict()}
    outputs = _save_scalar(out, "u1", r1) + _save_scalar(out, "u2", r2)
    _json_dump(result, out / "thresholds.json")
    outputs.append(out / "thresholds.json")
    print(f"beta1={b1:.15g} (b11={b11:.12g}, b12={b12:.12g})")
    print(f"beta2={b2:.15g} (b22={b22:.12g}, b21={b21:.12g})")
    return EXIT_OK, outputs


def cmd_coupled(cfg: RunConfig, out: Path, with_refs: bool = True) -> tuple[int, list]:
    from .solver import scalar_references, solve_coupled
    p = cfg.system_params()
    spec = cfg.grid_spec()
    table = build_kernel(spec, cfg.kernel)
    scfg = cfg.solver_config()
    state = solve_coupled(p, spec, scfg, table)
    refs = scalar_references(p, spec, scfg, table) if with_refs else None
    report = verify(state, refs, table, cfg.tolerance_set())
    report.metrics["semitrivial"] = state.semitrivial
    outputs = []
    for name, f in (("u", state.u), ("v", state.v)):
        fpath = out / f"{name}.f64"
        grid.save_field(fpath, spec, f)
        outputs += [fpath, Path(str(fpath) + ".json")]
    meta = {"kind": "coupled", "u": "u.f64", "v": "v.f64", **state.summary()}
    if refs is not None:
        outputs += _save_scalar(out, "ref_u1", refs[0]) + _save_scalar(out, "ref_u2", refs[1])
        meta["refs"] = ["ref_u1.json", "ref_u2.json"]
    _json_dump(meta, out / "state.json")
    outputs.append(out / "state.json")
    outputs += emit_report(report, out / "report.json")
    code = _exit_for(report, state.semitrivial)
    verdict = "pass" if code == EXIT_OK else "FAIL"
    if state.semitrivial and code == EXIT_OK:
        verdict = "pass (semitrivial, ordering not applicable)"
    print(f"coupled state (beta={p.beta:g}): c={state.c_level:.12g} iters={state.iters} "
          f"residuals=({state.residual_u:.3g}, {state.residual_v:.3g}) semitrivial={state.semitrivial} "
          f"report={verdict}")
    if isinstance(report.ordering, dict):
        o = report.ordering
        print(f"ordering: c={o['c']:.12g} J(u1,0)={o['j_u1_0']:.12g} J(0,u2)={o['j_0_u2']:.12g} "
              f"relative margin={o['relative_margin']:.4g}")
    return code, outputs


def cmd_sweep(cfg: RunConfig, out: Path) -> tuple[int, list]:
    from .solver import sweep_beta, write_sweep_csv
    if not cfg.betas:
        raise ConfigError("sweep needs a non-empty 'betas' list in the config")
    p = cfg.system_params()
    spec = cfg.grid_spec()
    table = build_kernel(spec, cfg.kernel)
    res = sweep_beta(p, sorted(cfg.betas), spec, cfg.solver_config(), table)
    write_sweep_csv(res.rows, out / "sweep.csv")
    bmax = max(res.beta1, res.beta2)
    bad = [r["beta"] for r in res.rows
           if r["status"] != "converged"
           or (r["beta"] > bmax and not r["c"] < min(r["j_semitrivial_u"], r["j_semitrivial_v"]))]
    for r in res.rows:
        print(f"beta={r['beta']:.6g} c={r['c']:.12g} semitrivial={r['semitrivial_flag']} "
              f"iters={r['iters']} status={r['status']}")
    print(f"beta1={res.beta1:.12g} beta2={res.beta2:.12g} c non-increasing: {res.c_nonincreasing()}")
    return (EXIT_CHECK if bad else EXIT_OK), [out / "sweep.csv"]


def cmd_verify(cfg: RunConfig | None, out: Path, state_path: Path) -> tuple[int, list]:
    from .solver import CoupledGroundState
    from .energy import j_energy
    meta = json.loads(state_path.read_text())
    tol = cfg.tolerance_set() if cfg else Tolerances()
    tables: dict = {}
    if meta.get("kind") == "scalar":
        state = _load_scalar(state_path, tables)
        report = verify(state, None, tables[state.spec], tol)
        semi = False
    elif meta.get("kind") == "coupled":
        spec, u = grid.load_field(state_path.parent / meta["u"])
        spec_v, v = grid.load_field(state_path.parent / meta["v"])
        if spec_v != spec:
            raise ConfigError("u and v fields live on different grids")
        params = SystemParams(**meta["params"])
        table = tables.setdefault(spec, build_kernel(spec, cfg.kernel if cfg else "spectral"))
        bd = j_energy(u, v, params, table, split=False)
        state = CoupledGroundState(u=u, v=v, spec=spec, params=params, c_level=bd.j, breakdown=bd,
                                   iters=meta.get("iters", 0), status="loaded",
                                   residual_u=float("nan"), residual_v=float("nan"),
                                   semitrivial=bool(meta.get("semitrivial", False)),
                                   h_norm_floor=float("nan"))
        refs = None
        if meta.get("refs"):
            refs = tuple(_load_scalar(state_path.parent / r, tables) for r in meta["refs"])
        report = verify(state, refs, table, tol)
        semi = state.semitrivial
    else:
        raise ConfigError(f"{state_path}: unknown state kind {meta.get('kind')!r}")
    outputs = emit_report(report, out / "verify_report.json")
    for name in sorted(report.checks):
        c = report.checks[name]
        print(f"{'PASS' if c.passed else 'FAIL'} {name}: defect={c.defect:.3g} tol={c.tolerance:.3g}")
    return _exit_for(report, semi), outputs


def cmd_selftest(out: Path) -> tuple[int, list]:
    from . import selftest
    results = selftest.run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    _json_dump({name: {"passed": ok, "detail": detail} for name, ok, detail in results},
               out / "selftest.json")
    return (EXIT_OK if all(ok for _, ok, _ in results) else EXIT_CHECK), [out / "selftest.json"]


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=None, help="FFT worker threads (default: all cores)")
    common.add_argument("--grid-n", type=int, default=None, help="points per side N")
    common.add_argument("--box", type=float, default=None, help="half width L of the box")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="loghartree", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("scalar", parents=[common], help="scalar ground state and diagnostics")
    sp.add_argument("--which", type=int, choices=(1, 2), default=1,
                    help="use (lambda1, mu1) or (lambda2, mu2)")
    sub.add_parser("thresholds", parents=[common], help="coupling thresholds from the scalar states")
    sp = sub.add_parser("coupled", parents=[common], help="coupled ground state and verification")
    sp.add_argument("--no-refs", action="store_true", help="skip the scalar references (no ordering check)")
    sub.add_parser("sweep", parents=[common], help="coupled states over the configured betas")
    sp = sub.add_parser("verify", parents=[common], help="re-verify a saved state")
    sp.add_argument("state", help="state JSON written by 'scalar' or 'coupled'")
    sub.add_parser("selftest", parents=[common], help="oracle checks of kernel, fibre map and gradient")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads or os.cpu_count() or 1
    t0 = time.perf_counter()
    cfg = None
    out = Path(args.out or "out")
    outputs: list = []
    try:
        if args.command != "selftest" or args.config:
            cfg = load_config(args)
            out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        with sfft.set_workers(threads):
            if args.command == "scalar":
                code, outputs = cmd_scalar(cfg, out, args.which)
            elif args.command == "thresholds":
                code, outputs = cmd_thresholds(cfg, out)
            elif args.command == "coupled":
                code, outputs = cmd_coupled(cfg, out, not args.no_refs)
            elif args.command == "sweep":
                code, outputs = cmd_sweep(cfg, out)
            elif args.command == "verify":
                code, outputs = cmd_verify(cfg if args.config else None, out, Path(args.state))
            else:
                code, outputs = cmd_selftest(out)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        code = EXIT_RUN
    except ConvergenceError as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        code = EXIT_RUN
        if exc.state is not None and out.is_dir():
            _json_dump({"error": str(exc), "state": exc.state.summary()}, out / "failure.json")
            outputs.append(out / "failure.json")
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_RUN
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError:
        pass
    if out.is_dir():
        _write_manifest(out, args.command, cfg, {"total": time.perf_counter() - t0}, outputs, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
