"""Command-line front end: flat key=value configs, deterministic artifacts.

Every run first writes ``config_echo.txt`` with the fully resolved
configuration (defaults included), then executes the selected pipeline and
emits a solution CSV, an iteration trace CSV and a one-line summary.  All
emitted numbers are produced by seeded, deterministically reduced
computations, so rerunning the same config with the same seed reproduces
every artifact byte for byte, independent of ``FRACVAR_THREADS``.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence
(artifacts are still written), 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import capacity as cap_mod
from . import solvers
from .functionals import EnergyModel, energy, source_dual_norm
from .kernels import (
    KernelSpec,
    PhiSpec,
    perturbed_kernel,
    perturbed_phi,
    power_phi,
    standard_kernel,
    validate_kernel,
    validate_phi,
)
from .mesh import ConfigurationError, GridFunction, Mesh1D, QuadratureRule

__all__ = ["RunConfig", "main", "run"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_IO = 4

SCHEMA_HEADER = "# schema=1"


def _fmt(x) -> str:
    """Shortest round-trip decimal form of a float (plain python repr)."""
    return repr(float(x))


@dataclass
class RunConfig:
    """Flat run configuration; every field maps to one config-file key."""

    problem: str = "solve-p2"
    a: float = 0.0
    b: float = 1.0
    n_elem: int = 64
    tail_radius: float | None = None
    gauss_order: int = 3
    diagonal_refinement: int = 6
    tail_mode: str = "analytic"
    s: float = 0.5
    p: float = 2.0
    q: float = 4.0
    lam: float = 0.1
    phi: str = "power"
    kernel: str = "standard"
    source: str = "none"
    amplitude: float = 0.1
    source_file: str = ""
    tol: float = 1e-6
    max_iter: int = 2000
    seed: int = 0
    n_steps: int = 12
    capacity_set: str = "0.4:0.6"
    outdir: str = "fracvar_out"

    # keys as they appear in config files; `lambda` is a python keyword
    KEYMAP = {"lambda": "lam"}

    @classmethod
    def key_of(cls, field_name: str) -> str:
        inv = {v: k for k, v in cls.KEYMAP.items()}
        return inv.get(field_name, field_name)

    def items(self):
        for f in fields(self):
            if f.name == "KEYMAP":
                continue
            yield self.key_of(f.name), getattr(self, f.name)


_PROBLEMS = ("solve-p2", "homotopy", "sphere-min", "capacity", "geometry",
             "check-kernel", "validate")


def _coerce(name: str, raw: str):
    proto = getattr(RunConfig(), name)
    if isinstance(proto, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(proto, int):
        return int(raw)
    if proto is None or isinstance(proto, float):
        if raw.lower() in ("none", ""):
            return None
        return float(raw)
    return raw


def parse_config_file(path: str) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value")
        key, val = (tok.strip() for tok in line.split("=", 1))
        out[key] = val
    return out


def build_config(file_pairs: dict, override_pairs: dict) -> RunConfig:
    cfg = RunConfig()
    known = {RunConfig.key_of(f.name) for f in fields(cfg) if f.name != "KEYMAP"}
    for pairs in (file_pairs, override_pairs):
        for key, raw in pairs.items():
            if key not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            name = RunConfig.KEYMAP.get(key, key)
            value = _coerce(name, raw) if isinstance(raw, str) else raw
            setattr(cfg, name, value)
    if cfg.problem not in _PROBLEMS:
        raise ConfigurationError(f"unknown problem {cfg.problem!r}")
    return cfg


# ---------------------------------------------------------------------------
# model construction


def _build_phi(cfg: RunConfig) -> PhiSpec:
    if cfg.phi == "power":
        return power_phi(cfg.p)
    if cfg.phi == "perturbed":
        return perturbed_phi(cfg.p)
    raise ConfigurationError(f"unknown nonlinearity {cfg.phi!r}")


def _build_kernel(cfg: RunConfig) -> KernelSpec:
    if cfg.kernel == "standard":
        return standard_kernel(cfg.s, cfg.p)
    if cfg.kernel == "perturbed":
        return perturbed_kernel(cfg.s, cfg.p)
    raise ConfigurationError(f"unknown kernel {cfg.kernel!r}")


def _build_source(cfg: RunConfig, mesh: Mesh1D):
    if cfg.source == "none":
        return None
    if cfg.source == "sin":
        a, length = cfg.a, cfg.b - cfg.a
        amp = cfg.amplitude
        return lambda x: amp * np.sin(np.pi * (np.asarray(x) - a) / length)
    if cfg.source == "const":
        amp = cfg.amplitude
        return lambda x: np.full_like(np.asarray(x, dtype=np.float64), amp)
    if cfg.source == "file":
        if not cfg.source_file:
            raise ConfigurationError("source=file requires source_file")
        gf = GridFunction.from_csv(cfg.source_file, tail_radius=cfg.tail_radius)
        if gf.mesh.key() != mesh.key():
            raise ConfigurationError("source grid does not match the run mesh")
        return gf
    raise ConfigurationError(f"unknown source {cfg.source!r}")


def _build_mesh(cfg: RunConfig) -> Mesh1D:
    return Mesh1D(cfg.a, cfg.b, cfg.n_elem, tail_radius=cfg.tail_radius)


def _build_rule(cfg: RunConfig) -> QuadratureRule:
    return QuadratureRule(gauss_order=cfg.gauss_order,
                          diagonal_refinement=cfg.diagonal_refinement,
                          tail_mode=cfg.tail_mode)


def _build_model(cfg: RunConfig) -> EnergyModel:
    mesh = _build_mesh(cfg)
    return EnergyModel(phi=_build_phi(cfg), kernel=_build_kernel(cfg),
                       lam=cfg.lam, q=cfg.q, mesh=mesh,
                       source=_build_source(cfg, mesh), quad=_build_rule(cfg))


def _parse_sets(spec: str) -> list[cap_mod.CompactSet1D]:
    out = []
    for chunk in spec.split("|"):
        chunk = chunk.strip()
        if not chunk:
            continue
        ivs = []
        for tok in chunk.split(";"):
            lo, _, hi = tok.partition(":")
            ivs.append((float(lo), float(hi if hi else lo)))
        out.append(cap_mod.CompactSet1D(tuple(ivs)))
    if not out:
        raise ConfigurationError("capacity_set is empty")
    return out


# ---------------------------------------------------------------------------
# diagnostics (dry-run validation)


def validate_config(cfg: RunConfig) -> tuple[list[str], list[str]]:
    """Constraint report: (errors, warnings), both empty for a clean config."""
    errors: list[str] = []
    warns: list[str] = []
    try:
        mesh = _build_mesh(cfg)
    except ValueError as exc:
        return [str(exc)], warns
    if not cfg.lam > 0.0:
        errors.append("reaction strength must satisfy lambda > 0")
    try:
        phi = _build_phi(cfg)
        kern = _build_kernel(cfg)
    except (ConfigurationError, ValueError) as exc:
        return errors + [str(exc)], warns
    crit = kern.critical_exponent
    if cfg.problem != "capacity":
        if not (cfg.p < cfg.q < crit):
            errors.append("constraint violated: q must lie in (p, p_s^*)")
        if cfg.q <= 2.0:
            errors.append("reaction exponent q must exceed 2")
    cap = math.sqrt(phi.lambda_cap * kern.lambda_cap)
    limit = (cfg.q / cfg.p) ** 0.25
    if cap >= limit:
        errors.append(
            f"ellipticity cap {cap:.6g} outside [1, (q/p)^(1/4)) = [1, {limit:.6g})")
    elif cap >= 0.9 * limit:
        warns.append(
            f"ellipticity cap {cap:.6g} within 10% of the boundary {limit:.6g}")
    if cfg.tail_mode == "analytic" and cfg.kernel != "standard":
        errors.append("analytic tail requires the standard kernel; "
                      "use tail_mode=graded-numeric")
    if not errors and cfg.problem in ("solve-p2", "geometry") and cfg.source != "none":
        try:
            model = _build_model(cfg)
            c4, c5 = solvers.estimate_embedding_constants(
                mesh, model.kernel, cfg.p, cfg.q, seed=cfg.seed, rule=model.quad)
            f_norm = source_dual_norm(model)
            if f_norm > 0.0:
                lam1 = solvers.lambda1_threshold(cfg.p, cfg.q, cap, c4, c5, f_norm)
                if cfg.lam >= lam1:
                    errors.append(
                        f"lambda {cfg.lam:.6g} is not below the estimated "
                        f"threshold {lam1:.6g}")
                elif cfg.lam >= 0.9 * lam1:
                    warns.append(
                        f"lambda {cfg.lam:.6g} within 10% of the estimated "
                        f"threshold {lam1:.6g}")
        except (ConfigurationError, ValueError) as exc:
            errors.append(str(exc))
    return errors, warns


# ---------------------------------------------------------------------------
# artifact emission


def _write_lines(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _echo_config(cfg: RunConfig, outdir: Path) -> None:
    lines = ["# fracvar resolved configuration"]
    for key, val in sorted(cfg.items()):
        lines.append(f"{key}={val!r}" if isinstance(val, str) else f"{key}={val}")
    _write_lines(outdir / "config_echo.txt", lines)
    for line in lines:
        print(line)


def _write_solution(gf: GridFunction, path: Path) -> None:
    m = gf.mesh
    lines = [SCHEMA_HEADER, f"# mesh a={_fmt(m.a)} b={_fmt(m.b)} n={m.n_elem}", "x,value"]
    lines += [f"{_fmt(x)},{_fmt(v)}" for x, v in zip(m.nodes, gf.full_values)]
    _write_lines(path, lines)


def _write_trace(report: solvers.SolveReport, path: Path) -> None:
    lines = [SCHEMA_HEADER, "iter,energy,residual,norm_W,norm_q"]
    for i, (e, r, nw, nq) in enumerate(zip(report.energy_trace,
                                           report.residual_trace,
                                           report.norm_w_trace,
                                           report.norm_q_trace)):
        lines.append(f"{i},{_fmt(e)},{_fmt(r)},{_fmt(nw)},{_fmt(nq)}")
    _write_lines(path, lines)


def _write_summary(report: solvers.SolveReport, path: Path) -> str:
    line = (f"{str(report.converged).lower()},{report.iterations},"
            f"{_fmt(report.residual_trace[-1])},{_fmt(report.energy_trace[-1])}")
    _write_lines(path, [line])
    print(line)
    return line


# ---------------------------------------------------------------------------
# pipelines


def _run_solver_problem(cfg: RunConfig, outdir: Path) -> int:
    model = _build_model(cfg)
    if cfg.problem == "solve-p2":
        report, geom = solvers.mountain_pass_solve(
            model, tol=cfg.tol, max_iter=cfg.max_iter, seed=cfg.seed)
        _write_geometry(geom, outdir)
    elif cfg.problem == "homotopy":
        report = solvers.homotopy_to_p1(model, n_steps=cfg.n_steps, tol=cfg.tol,
                                        max_iter=cfg.max_iter, seed=cfg.seed)
        diffs = report.extras["stage_diffs"]
        lines = [SCHEMA_HEADER, "stage,diff_norm_W,effective_lambda"]
        lams = report.extras["stage_lambdas"]
        for i, d in enumerate(diffs):
            lines.append(f"{i},{_fmt(d)},{_fmt(lams[i])}")
        _write_lines(outdir / "homotopy_stages.csv", lines)
    else:  # sphere-min
        report = solvers.sphere_constrained_solve(model, tol=cfg.tol,
                                                  max_iter=cfg.max_iter)
    _write_solution(report.solution, outdir / "solution.csv")
    _write_trace(report, outdir / "trace.csv")
    _write_summary(report, outdir / "summary.txt")
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def _write_geometry(geom: solvers.MountainPassGeometry, outdir: Path) -> None:
    lines = [SCHEMA_HEADER, "key,value"]
    for key, val in (("lambda1", geom.lambda1), ("r0", geom.r0),
                     ("r0_closed_form", geom.r0_closed_form),
                     ("c4", geom.c4), ("c5", geom.c5), ("f_norm", geom.f_norm),
                     ("sphere_min_estimate", geom.sphere_min_estimate),
                     ("energy_u1", geom.energy_u1),
                     ("f_peak_value", geom.f_peak_value)):
        lines.append(f"{key},{_fmt(val)}")
    _write_lines(outdir / "geometry.csv", lines)
    prof = [SCHEMA_HEADER, "r,F"]
    prof += [f"{_fmt(r)},{_fmt(f)}" for r, f in geom.F_profile]
    _write_lines(outdir / "F_profile.csv", prof)


def _run_geometry(cfg: RunConfig, outdir: Path) -> int:
    model = _build_model(cfg)
    geom = solvers.mountain_pass_geometry(model, seed=cfg.seed)
    _write_geometry(geom, outdir)
    line = f"geometry,{_fmt(geom.lambda1)},{_fmt(geom.r0)},{_fmt(geom.f_norm)}"
    _write_lines(outdir / "summary.txt", [line])
    print(line)
    return EXIT_OK


def _run_capacity(cfg: RunConfig, outdir: Path) -> int:
    mesh = _build_mesh(cfg)
    kern = _build_kernel(cfg)
    rule = _build_rule(cfg)
    rows = [SCHEMA_HEADER, "set_description,q,s,n_elem,capacity_upper_bound"]
    last = None
    for region in _parse_sets(cfg.capacity_set):
        rep = cap_mod.capacity_minimize(region, mesh, kern, cfg.q, tol=cfg.tol,
                                        rule=rule, max_iter=cfg.max_iter)
        rows.append(f"{region.describe()},{cfg.q},{cfg.s},{cfg.n_elem},{_fmt(rep.value)}")
        last = rep
    _write_lines(outdir / "capacity.csv", rows)
    _write_solution(last.minimizer, outdir / "solution.csv")
    line = (f"{str(last.converged).lower()},{last.iterations},"
            f"{_fmt(last.kkt_residual)},{_fmt(last.value)}")
    _write_lines(outdir / "summary.txt", [line])
    print(line)
    return EXIT_OK if last.converged else EXIT_NO_CONVERGENCE


def _run_check_kernel(cfg: RunConfig, outdir: Path) -> int:
    phi = _build_phi(cfg)
    kern = _build_kernel(cfg)
    rphi = validate_phi(phi)
    rkern = validate_kernel(kern)
    lines = [SCHEMA_HEADER, "check,ratio_min,ratio_max,cap,violation"]
    lines.append(f"phi,{_fmt(rphi.ratio_min)},{_fmt(rphi.ratio_max)},"
                 f"{_fmt(rphi.lambda_cap)},{str(rphi.violation).lower()}")
    lines.append(f"kernel,{_fmt(rkern.ratio_min)},{_fmt(rkern.ratio_max)},"
                 f"{_fmt(rkern.lambda_cap)},{str(rkern.violation).lower()}")
    _write_lines(outdir / "check_kernel.csv", lines)
    for line in lines[1:]:
        print(line)
    if rphi.violation or rkern.violation or rphi.continuity_suspect:
        print("bound violation detected", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _run_validate(cfg: RunConfig, outdir: Path) -> int:
    errors, warns = validate_config(cfg)
    lines = [f"error: {msg}" for msg in errors] + [f"warning: {msg}" for msg in warns]
    _write_lines(outdir / "diagnostics.txt", lines if lines else ["ok"])
    for line in lines:
        print(line)
    if errors:
        return EXIT_CONFIG
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    """Execute one configured pipeline, writing artifacts to cfg.outdir."""
    try:
        outdir = Path(cfg.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        _echo_config(cfg, outdir)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if cfg.problem == "validate":
            return _run_validate(cfg, outdir)
        if cfg.problem == "check-kernel":
            return _run_check_kernel(cfg, outdir)
        if cfg.problem == "geometry":
            return _run_geometry(cfg, outdir)
        if cfg.problem == "capacity":
            return _run_capacity(cfg, outdir)
        return _run_solver_problem(cfg, outdir)
    except (ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def _add_override_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="key=value config file")
    for f in fields(RunConfig()):
        if f.name in ("KEYMAP", "problem"):
            continue
        key = RunConfig.key_of(f.name)
        parser.add_argument(f"--{key}", dest=f.name, default=None)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracvar",
        description="Nonlocal variational solver suite on an interval")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _PROBLEMS:
        sp = sub.add_parser(name)
        _add_override_args(sp)
    ns = parser.parse_args(argv)

    try:
        file_pairs = parse_config_file(ns.config) if ns.config else {}
        overrides = {}
        for f in fields(RunConfig()):
            if f.name in ("KEYMAP", "problem"):
                continue
            raw = getattr(ns, f.name, None)
            if raw is not None:
                overrides[RunConfig.key_of(f.name)] = raw
        overrides["problem"] = ns.subcommand
        cfg = build_config(file_pairs, overrides)
    except (ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    with warnings.catch_warnings():
        warnings.simplefilter("always", solvers.GuardWarning)
        return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
