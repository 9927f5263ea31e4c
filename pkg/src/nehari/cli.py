"""Command line front end: ``nehari solve|multistart|verify|bubble-scan``.

A run is described by one JSON document (see ``CONFIG_SCHEMA`` and the
README).  Results go to ``report.json`` and ``profile_<idx>.csv`` in the
output directory.  Exit codes: 0 success, 2 invalid input, 3 a solve did
not converge, 4 a verification check failed.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import discretization as disc
from . import presets
from .descent import DescentConfig, SolveReport, genus_seeds, minimize_psi, multistart
from .discretization import CoercivityViolation, DomainSpec
from .energy import SpecError, System, SystemSpec, validate_spec
from .verify import format_table, run_suite

__all__ = ["CONFIG_SCHEMA", "ConfigError", "RunConfig", "load_config", "build_system",
           "emit_report", "emit_profile", "run", "main"]

log = logging.getLogger("nehari")

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 2, 3, 4

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"oneOf": [_num, {"type": "array", "items": _vec, "minItems": 1}]}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["preset", "system", "domain"],
    "additionalProperties": False,
    "properties": {
        "preset": {"enum": ["exterior", "yamabe", "brezis_nirenberg", "custom"]},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "M": {"type": "integer", "minimum": 1, "maximum": 8},
                "N": {"type": "integer", "minimum": 3},
                "p": {"type": "number", "exclusiveMinimum": 2},
                "kappa": _vec,
                "mu": _vec,
                "lambda": _mat,
                "alpha": _mat,
                "beta": _mat,
            },
        },
        "domain": {
            "type": "object",
            "required": ["n"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(disc.KINDS)},
                "n": {"type": "integer", "minimum": 16},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "R0": {"type": "number", "minimum": 0},
                "L": {"type": "number", "exclusiveMinimum": 0},
                "m": {"type": "integer", "minimum": 1},
                "n_dim": {"type": "integer", "minimum": 1},
                "grading": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol_grad": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "s_cap": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
                "armijo": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "c1": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                        "shrink": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                        "t0": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["solve", "multistart", "verify", "bubble-scan"]},
                "k": {"type": "integer", "minimum": 1},
                "mixtures": {"type": "integer", "minimum": 0},
                "format": {"enum": ["json", "csv", "both"]},
                "out": {"type": "string"},
                "eps_list": _vec,
                "betas": {"type": "array", "items": _num},
                "cutoff_radius": {"type": "number", "exclusiveMinimum": 0},
                "mu": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


def _path(parts) -> str:
    out = "config"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


@dataclass
class RunConfig:
    """Parsed configuration; :meth:`to_dict` and :meth:`from_dict` round-trip."""

    preset: str
    system: dict
    domain: dict
    solver: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
        if errors:
            e = errors[0]
            raise ConfigError(f"{_path(e.absolute_path)}: {e.message}")
        return cls(data["preset"], dict(data["system"]), dict(data["domain"]),
                   dict(data.get("solver", {})), dict(data.get("run", {})))

    def to_dict(self) -> dict:
        return asdict(self)

    def descent_config(self, seed: int | None = None) -> DescentConfig:
        s = self.solver
        arm = s.get("armijo", {})
        kw = {k: s[k] for k in ("tol_grad", "max_iter", "s_cap") if k in s}
        kw.update({k: arm[k] for k in ("c1", "shrink", "t0") if k in arm})
        kw["rng_seed"] = seed if seed is not None else s.get("seed", 0)
        return DescentConfig(**kw)


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    return RunConfig.from_dict(data)


def _need(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"config.{where}.{key}: required for this preset")
    return block[key]


def _check_symmetric(sysb: dict):
    lam = sysb.get("lambda")
    if isinstance(lam, list):
        a = np.asarray(lam, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigError("config.system.lambda: must be a square matrix")
        bad = np.argwhere(~np.isclose(a, a.T, rtol=1e-12, atol=0))
        if bad.size:
            i, j = bad[0]
            raise ConfigError(f"config.system.lambda[{i}][{j}]: lambda must be symmetric "
                              f"({a[i, j]} != {a[j, i]})")


def build_system(cfg: RunConfig) -> System:
    """Turn a configuration into a validated :class:`System`."""
    s, d = cfg.system, cfg.domain
    _check_symmetric(s)
    if "M" in s:
        for key in ("kappa", "mu"):
            if key in s and len(s[key]) != s["M"]:
                raise ConfigError(f"config.system.{key}: expected {s['M']} entries")
    extra = {k: s[k] for k in ("alpha", "beta") if k in s}
    try:
        if cfg.preset == "exterior":
            spec, space = presets.preset_exterior(
                _need(s, "N", "system"), d.get("R0", 1.0), _need(d, "L", "domain"), d["n"],
                p=_need(s, "p", "system"), kappa=_need(s, "kappa", "system"),
                mu=_need(s, "mu", "system"), lam=_need(s, "lambda", "system"),
                grading=d.get("grading", 1.0), **extra)
        elif cfg.preset == "yamabe":
            spec, space = presets.preset_yamabe(
                _need(d, "m", "domain"), _need(d, "n_dim", "domain"), d["n"],
                mu=_need(s, "mu", "system"), lam=_need(s, "lambda", "system"), **extra)
        elif cfg.preset == "brezis_nirenberg":
            spec, space = presets.preset_brezis_nirenberg(
                _need(s, "N", "system"), d.get("radius", 1.0), d["n"],
                kappa=_need(s, "kappa", "system"), mu=_need(s, "mu", "system"),
                lam=_need(s, "lambda", "system"), grading=d.get("grading", 1.0), **extra)
        else:
            kind = _need(d, "kind", "domain")
            N = s.get("N")
            if kind == "sphere_angular":
                dom = DomainSpec.sphere(_need(d, "m", "domain"), _need(d, "n_dim", "domain"))
            elif kind == "ball":
                dom = DomainSpec.ball(_need(s, "N", "system"), d.get("radius", 1.0),
                                      d.get("grading", 1.0))
            else:
                dom = DomainSpec.exterior(_need(s, "N", "system"), d.get("R0", 0.0),
                                          _need(d, "L", "domain"), d.get("grading", 1.0))
            if N is not None and dom.N != N:
                raise ConfigError(f"config.system.N: domain has dimension {dom.N}")
            p = _need(s, "p", "system")
            m = len(_need(s, "kappa", "system"))
            half = p / 2.0
            spec = SystemSpec(p, s["kappa"], _need(s, "mu", "system"),
                              _need(s, "lambda", "system"), s.get("alpha", half),
                              s.get("beta", half), dom)
            if spec.M != m:
                raise ConfigError("config.system.kappa: inconsistent component count")
            space = disc.build_space(dom, d["n"])
            validate_spec(spec, space)
    except ConfigError:
        raise
    except (SpecError, CoercivityViolation, ValueError) as exc:
        raise ConfigError(f"config.system: {exc}") from None
    return System(spec, space)


# ---------------------------------------------------------------- output

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return json.dumps("%.12e" % x) if not math.isfinite(x) else "%.12e" % x
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        items = sorted((str(k), v) for k, v in x.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {_fmt(v)}" for k, v in items) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialise {type(x).__name__}")


def emit_report(report: dict, format: str = "json") -> bytes:
    """Deterministic JSON: sorted keys, floats as ``%.12e``, trailing newline."""
    if format != "json":
        raise ValueError("reports are JSON; profiles use emit_profile")
    return (_fmt(report) + "\n").encode()


def emit_profile(r, u) -> bytes:
    """CSV with header ``r,u1,...,uM`` and one ``%.12e`` row per node."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    header = ",".join(["r"] + [f"u{i + 1}" for i in range(u.shape[0])])
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack([r, u.T]), fmt="%.12e", delimiter=",",
               header=header, comments="")
    return buf.getvalue().encode()


def _solution_record(rep: SolveReport) -> dict:
    pt = rep.solution
    return {
        "status": rep.status,
        "energy": rep.energy,
        "psi": rep.psi_value,
        "s": pt.s,
        "residuals": pt.residuals,
        "grad_norm": rep.grad_norm,
        "component_norms": rep.component_norms,
        "iterations": rep.iterations,
        "positive": rep.positive,
        "seed_index": rep.seed_index,
    }


def _write(out: Path, name: str, data: bytes):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_bytes(data)


def _solve_like(cfg: RunConfig, mode: str, dcfg: DescentConfig, threads: int):
    system = build_system(cfg)
    k = int(cfg.run.get("k", 3 if mode == "multistart" else 1))
    if mode == "solve":
        seeds = genus_seeds(system, 1, dcfg.rng_seed)
        reps = [minimize_psi(system, seeds[0], dcfg, seed_index=0)]
    else:
        reps = multistart(system, k, dcfg, threads=threads,
                          mixtures=int(cfg.run.get("mixtures", 0)))
        if not reps:
            raise RuntimeError("every start failed")
    best = reps[0]
    report = _solution_record(best)
    report.update({"mode": mode, "preset": cfg.preset, "grid_n": system.space.size,
                   "M": system.M, "N": system.spec.N, "p": system.p})
    if mode == "multistart":
        report["solutions"] = [_solution_record(r) for r in reps]
    profiles = [emit_profile(system.space.nodes, r.solution.tuple) for r in reps]
    code = EXIT_OK if best.converged else EXIT_NOT_CONVERGED
    return report, profiles, code


def _bubble(cfg: RunConfig):
    system = build_system(cfg)
    sp = system.space
    r = cfg.run
    eps = r.get("eps_list")
    if eps is None:
        raise ConfigError("config.run.eps_list: required for bubble-scan")
    mu = float(r.get("mu", system.spec.mu[-1]))
    try:
        scan = presets.bubble_scan(sp, eps, mu, r.get("cutoff_radius"), r.get("betas", ()))
    except ValueError as exc:
        raise ConfigError(f"config.run: {exc}") from None
    report = {"mode": "bubble-scan", "preset": cfg.preset, "grid_n": sp.size, "N": scan.N,
              "mu": scan.mu, "eps_list": scan.eps_list, "norms": scan.norms,
              "fitted_slopes": scan.fitted_slopes, "limit": scan.limit,
              "extrapolated_limit": scan.extrapolated_limit,
              "log_fit_residuals": scan.log_fit_residuals, "status": "Converged"}
    profiles = [emit_profile(sp.nodes, disc.bubble(sp, e, mu, r.get("cutoff_radius")))
                for e in scan.eps_list]
    return report, profiles, EXIT_OK


def _verify(cfg: RunConfig | None, seed: int):
    system = build_system(cfg) if cfg is not None else None
    checks = run_suite(system, seed)
    print(format_table(checks))
    report = {"mode": "verify", "checks": [asdict(c) for c in checks],
              "passed": all(c.passed for c in checks),
              "preset": cfg.preset if cfg else "default",
              "grid_n": system.space.size if system else 0}
    return report, [], EXIT_OK if report["passed"] else EXIT_VERIFY


def run(mode: str, config_path=None, out=None, fmt: str | None = None, threads: int = 1,
        seed: int | None = None) -> int:
    """Execute one run and write its artifacts; returns the exit code."""
    try:
        cfg = load_config(config_path) if config_path is not None else None
        if cfg is None and mode != "verify":
            raise ConfigError(f"--config is required for {mode}")
        run_block = cfg.run if cfg else {}
        if run_block.get("mode", mode) != mode:
            log.warning("config run.mode=%s overridden by subcommand %s", run_block["mode"], mode)
        fmt = fmt or run_block.get("format", "both")
        out = Path(out or run_block.get("out", "."))
        if mode == "verify":
            report, profiles, code = _verify(cfg, 0 if seed is None else seed)
        elif mode == "bubble-scan":
            report, profiles, code = _bubble(cfg)
        else:
            report, profiles, code = _solve_like(cfg, mode, cfg.descent_config(seed), threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, ArithmeticError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    if fmt in ("json", "both"):
        _write(out, "report.json", emit_report(report))
    if fmt in ("csv", "both"):
        for i, data in enumerate(profiles):
            _write(out, f"profile_{i}.csv", data)
    if code == EXIT_NOT_CONVERGED:
        print(f"error: solve ended with status {report.get('status')}", file=sys.stderr)
    return code


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nehari", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="mode", required=True)
    for name in ("solve", "multistart", "verify", "bubble-scan"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (default: run.out or .)")
        p.add_argument("--format", choices=["json", "csv", "both"])
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INVALID
    return run(args.mode, args.config, args.out, args.format, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
