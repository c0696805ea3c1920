"""Command-line front end.

``convkin run --config scenario.json`` executes one verification or
computation and writes its report; ``convkin suite manifest.json`` runs a
list of scenarios and writes a CSV summary.

Exit codes: 0 success, 1 input error, 2 identity violated.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import io
from .functions import EpiPolyhedral, MaxAffine, RadialProfile, conjugate
from .geometry import Polytope, intrinsic_volume, mixed_volume
from .kinematics import (
    REPORT_KEYS,
    verify_bodies_kinematic,
    verify_deconvolution,
    verify_floor_lemma,
    verify_functional_kinematic,
    verify_hessian_link,
    verify_indicator_corollary,
    verify_kubota,
    verify_mixed_functional_formula,
    verify_sphere_kinematic,
)
from .monge_ampere import SmoothProfile, TestFunction, conj_ma, ma

EXIT_OK, EXIT_INPUT, EXIT_VIOLATED = 0, 1, 2

VERIFY = (
    "functional_kinematic",
    "bodies_kinematic",
    "indicator_corollary",
    "mixed_functional_formula",
    "deconvolution",
    "kubota",
    "hessian_link",
    "floor_lemma",
    "sphere_kinematic",
)
COMPUTE = ("compute:ma", "compute:mixed-volume", "compute:intrinsic", "compute:conjugate")


class InputError(Exception):
    """Bad configuration or input file."""


@dataclass
class ScenarioConfig:
    identity: str
    inputs: dict = field(default_factory=dict)
    n: int | None = None
    j: int | None = None
    k: int | None = None
    m: int = 128
    N: int = 2000
    seed: int = 0
    alpha: object = None
    beta: object = None
    zeta: object = None
    phi: object = None
    psi: object = None
    segments: int | None = None
    tol: float = 0.02
    out: str | None = None
    format: str = "json"
    chunk: int = 256
    base: Path = Path(".")

    @classmethod
    def from_file(cls, path, overrides=None):
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: malformed JSON ({exc})") from exc
        return cls.from_dict(data, base=path.parent, overrides=overrides)

    @classmethod
    def from_dict(cls, data, base=Path("."), overrides=None):
        known = {f.name for f in fields(cls)} - {"base"}
        extra = set(data) - known
        if extra:
            raise InputError(f"unknown config fields: {sorted(extra)}")
        merged = dict(data)
        for key, val in (overrides or {}).items():
            if val is not None:
                merged[key] = val
        if "identity" not in merged:
            raise InputError("config needs an 'identity'")
        ident = str(merged["identity"])
        if ident.startswith("verify_"):
            ident = ident[len("verify_"):]
        merged["identity"] = ident
        if ident not in VERIFY + COMPUTE:
            raise InputError(f"unknown identity {ident!r}")
        if merged.get("format", "json") not in ("json", "csv"):
            raise InputError("format must be 'json' or 'csv'")
        return cls(base=Path(base), **merged)

    def path(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def obj(self, name):
        if name not in self.inputs:
            raise InputError(f"missing input {name!r}")
        val = self.inputs[name]
        if isinstance(val, list):
            return [self._load(v) for v in val]
        return self._load(val)

    def _load(self, ref):
        if isinstance(ref, dict):
            try:
                return io.object_from_dict(ref)
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"malformed inline object: {exc}") from exc
        p = self.path(ref)
        if not p.is_file():
            raise InputError(f"input file not found: {p}")
        try:
            return io.load(p)
        except ValueError as exc:
            raise InputError(str(exc)) from exc

    def radial_fn(self, name, default=None):
        """TestFunction given inline, as a file path, or via ``{"hat": [peak, support]}``."""
        val = getattr(self, name)
        if val is None:
            if default is None:
                raise InputError(f"missing {name}")
            return default
        if isinstance(val, dict) and "hat" in val:
            return TestFunction.hat(*val["hat"])
        obj = self._load(val)
        if not isinstance(obj, TestFunction):
            raise InputError(f"{name} must be a test function")
        return obj


def _range(name, value, lo, hi):
    if value is None or not lo <= value <= hi:
        raise InputError(f"parameter out of range: {name}={value} (allowed {lo}..{hi})")


def _check_dim(cfg, objs):
    dims = {o.dim for o in objs}
    if len(dims) != 1:
        raise InputError(f"inputs have mixed dimensions {sorted(dims)}")
    n = dims.pop()
    if cfg.n is not None and cfg.n != n:
        raise InputError(f"parameter out of range: n={cfg.n} but inputs have dimension {n}")
    return n


def _need(obj, types, name):
    if not isinstance(obj, types):
        raise InputError(f"input {name!r} has the wrong type ({type(obj).__name__})")
    return obj


def _phi(spec):
    """Sphere function ``offset + <weights, z>``; default constant 1."""
    if spec is None:
        return lambda z: np.ones(len(np.atleast_2d(z)))
    w = np.asarray(spec.get("weights", []), dtype=float)
    c = float(spec.get("offset", 0.0))
    return lambda z: c + (np.atleast_2d(z) @ w if len(w) else 0.0)


def _psi(spec):
    if spec is None:
        raise InputError("missing psi")
    if "power" not in spec:
        raise InputError("psi must be given as {'power': p, 'coef': c}")
    return SmoothProfile.power(float(spec["power"]), float(spec.get("coef", 1.0)))


def execute(cfg, jobs=None):
    """Run one scenario. Returns ``(kind, payload)`` with kind 'report' or 'object'."""
    ident = cfg.identity
    _range("m", cfg.m, 3, 10 ** 6)
    _range("N", cfg.N, 1, 10 ** 9)
    mc = dict(N=cfg.N, seed=cfg.seed, chunk=cfg.chunk, jobs=jobs)

    if ident == "compute:conjugate":
        f = _need(cfg.obj("f"), (MaxAffine, EpiPolyhedral, RadialProfile), "f")
        _check_dim(cfg, [f])
        return "object", conjugate(f)
    if ident == "compute:ma":
        f = _need(cfg.obj("f"), (MaxAffine, EpiPolyhedral), "f")
        _check_dim(cfg, [f])
        return "object", ma(f) if isinstance(f, MaxAffine) else conj_ma(f)
    if ident == "compute:mixed-volume":
        bodies = [_need(b, Polytope, "bodies") for b in cfg.obj("bodies")]
        n = _check_dim(cfg, bodies)
        if len(bodies) != n:
            raise InputError(f"parameter out of range: need {n} bodies, got {len(bodies)}")
        return "object", {"mixed_volume": mixed_volume(bodies)}
    if ident == "compute:intrinsic":
        K = _need(cfg.obj("K"), Polytope, "K")
        n = _check_dim(cfg, [K])
        _range("j", cfg.j, 0, n)
        return "object", {"intrinsic_volume": intrinsic_volume(K, cfg.j, cfg.m), "j": cfg.j, "m": cfg.m}

    if ident == "hessian_link":
        n = cfg.n
        _range("n", n, 1, 4)
        _range("j", cfg.j, 0, n)
        return "report", verify_hessian_link(_psi(cfg.psi), cfg.radial_fn("zeta"), n, cfg.j, cfg.segments)

    funcs = (EpiPolyhedral, RadialProfile)
    if ident in ("functional_kinematic", "indicator_corollary", "deconvolution"):
        u = _need(cfg.obj("u"), funcs, "u")
        second = "L" if ident == "indicator_corollary" else "v"
        w = cfg.obj(second)
        n = _check_dim(cfg, [u, w])
        idx = cfg.k if ident == "deconvolution" and cfg.k is not None else cfg.j
        _range("k" if ident == "deconvolution" else "j", idx, 0, n)
        alpha = cfg.radial_fn("alpha")
        if ident == "functional_kinematic":
            return "report", verify_functional_kinematic(u, _need(w, funcs, "v"), idx, alpha, m=cfg.m, **mc)
        if ident == "indicator_corollary":
            return "report", verify_indicator_corollary(u, _need(w, Polytope, "L"), idx, alpha, m=cfg.m, **mc)
        return "report", verify_deconvolution(u, _need(w, funcs, "v"), idx, alpha, m=cfg.m, **mc)

    if ident == "bodies_kinematic":
        K, L = _need(cfg.obj("K"), Polytope, "K"), _need(cfg.obj("L"), Polytope, "L")
        n = _check_dim(cfg, [K, L])
        _range("j", cfg.j, 0, n)
        return "report", verify_bodies_kinematic(K, L, cfg.j, m=cfg.m, **mc)

    if ident == "mixed_functional_formula":
        us = cfg.obj("us") if "us" in cfg.inputs else []
        vs = cfg.obj("vs") if "vs" in cfg.inputs else []
        n = _check_dim(cfg, us + vs)
        _range("k", cfg.k, len(us), n)
        return "report", verify_mixed_functional_formula(us, vs, cfg.k, cfg.radial_fn("alpha"), m=cfg.m, **mc)

    if ident == "kubota":
        us = [_need(u, funcs, "us") for u in cfg.obj("us")]
        n = _check_dim(cfg, us)
        k = cfg.k if cfg.k is not None else len(us)
        _range("k", k, 1, n - 1)
        return "report", verify_kubota(us, k, cfg.radial_fn("phi"), m=cfg.m, **mc)

    if ident == "floor_lemma":
        bodies = [_need(b, Polytope, "bodies") for b in cfg.obj("bodies")]
        n = _check_dim(cfg, bodies)
        if len(bodies) != n - 1:
            raise InputError(f"parameter out of range: need {n - 1} bodies, got {len(bodies)}")
        return "report", verify_floor_lemma(bodies, _phi(cfg.phi), seed=cfg.seed)

    if ident == "sphere_kinematic":
        K, L = _need(cfg.obj("K"), Polytope, "K"), _need(cfg.obj("L"), Polytope, "L")
        n = _check_dim(cfg, [K, L])
        _range("j", cfg.j, 0, n - 1)
        beta = cfg.radial_fn("beta", TestFunction.constant_on_unit())
        return "report", verify_sphere_kinematic(K, L, cfg.j, beta, m=cfg.m, **mc)

    raise InputError(f"unknown identity {ident!r}")  # pragma: no cover


def render(kind, payload, fmt="json", timestamp=True):
    """Serialize a result; reports become JSON objects or one CSV row."""
    if kind == "report":
        data = payload.to_dict(timestamp=timestamp)
        if timestamp:
            data["timestamp"] = datetime.now(timezone.utc).isoformat()
        if fmt == "csv":
            buf = _stdio.StringIO()
            cols = list(REPORT_KEYS) + (["timestamp"] if timestamp else [])
            w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            w.writerow(data)
            return buf.getvalue()
        return json.dumps(data, indent=2) + "\n"
    data = payload if isinstance(payload, dict) else payload.to_dict()
    if fmt == "csv":
        raise InputError("csv output is only available for reports")
    return json.dumps(data, indent=2) + "\n"


def run(cfg, jobs=None, timestamp=True, stream=None):
    """Execute, write the output and return ``(exit_code, report_or_None, message)``."""
    stream = stream or sys.stdout
    try:
        kind, payload = execute(cfg, jobs)
        text = render(kind, payload, cfg.format, timestamp)
    except InputError as exc:
        return EXIT_INPUT, None, str(exc)
    except ValueError as exc:
        # geometry/function validation and "rolling freely violated"
        return EXIT_INPUT, None, str(exc)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        stream.write(text)
    if kind == "report" and not payload.passed(cfg.tol):
        return EXIT_VIOLATED, payload, f"identity violated: rel_err={payload.rel_err:.3e} >= tol={cfg.tol:g}"
    return EXIT_OK, payload if kind == "report" else None, "ok"


def _suite_row(entry, base, overrides):
    path = Path(entry)
    path = path if path.is_absolute() else base / path
    try:
        cfg = ScenarioConfig.from_file(path, overrides)
    except InputError as exc:
        return {"config": str(entry), "identity": "", "rel_err": "", "tol": "", "status": "error", "message": str(exc)}
    code, report, msg = run(cfg, timestamp=False, stream=_stdio.StringIO())
    status = {EXIT_OK: "pass", EXIT_VIOLATED: "fail", EXIT_INPUT: "error"}[code]
    return {"config": str(entry), "identity": cfg.identity,
            "rel_err": "" if report is None else f"{report.rel_err:.6e}",
            "tol": f"{cfg.tol:g}", "status": status, "message": msg}


SUITE_COLUMNS = ["config", "identity", "rel_err", "tol", "status", "message"]


def suite(manifest, out=None, jobs=None, overrides=None, stream=None):
    """Run every scenario listed in ``manifest``; returns the exit code."""
    stream = stream or sys.stdout
    manifest = Path(manifest)
    try:
        data = json.loads(manifest.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_INPUT
    entries = data.get("scenarios", []) if isinstance(data, dict) else data
    base = manifest.parent
    if jobs and jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_suite_row, entries, [base] * len(entries), [overrides] * len(entries)))
    else:
        rows = [_suite_row(e, base, overrides) for e in entries]
    buf = _stdio.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUITE_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if out:
        Path(out).write_text(buf.getvalue())
    else:
        stream.write(buf.getvalue())
    statuses = {r["status"] for r in rows}
    if "fail" in statuses:
        return EXIT_VIOLATED
    if "error" in statuses:
        return EXIT_INPUT
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="convkin", description="Kinematic formulas for convex functions: checks and computations.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        sp.add_argument("--rotations", type=int, dest="N", help="number of Monte Carlo rotations")
        sp.add_argument("--ball-facets", type=int, dest="m", help="polytopal ball resolution")
        sp.add_argument("--tol", type=float, help="relative tolerance for pass/fail")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--no-timestamp", action="store_true", help="omit timing fields for byte-stable output")
        sp.add_argument("--jobs", type=int, default=None, help="worker processes")

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--config", required=True, help="scenario JSON")
    r.add_argument("--format", choices=("json", "csv"), help="report format")
    common(r)

    s = sub.add_parser("suite", help="run every scenario in a manifest")
    s.add_argument("manifest", help="JSON list of scenario config paths")
    common(s)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "N": args.N, "m": args.m, "tol": args.tol}
    if args.command == "suite":
        return suite(args.manifest, out=args.out, jobs=args.jobs, overrides=overrides)
    overrides.update(out=args.out, format=args.format)
    try:
        cfg = ScenarioConfig.from_file(args.config, overrides)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    code, _, msg = run(cfg, jobs=args.jobs, timestamp=not args.no_timestamp)
    if code != EXIT_OK:
        print(f"error: {msg}" if code == EXIT_INPUT else msg, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
