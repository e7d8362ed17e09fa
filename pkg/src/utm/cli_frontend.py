"""Command line: analyze | solve | contour | zeros | verify."""
from __future__ import annotations

import argparse
import io
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .contour_geometry import write_polylines_csv
from .determinant_zeros import locate_zeros
from .errors import IllPosedProblem, SchemaError, UTMError
from .evaluator import (
    EvalRequest,
    _Context,
    evaluate_integral,
    evaluate_series_complex,
    evaluate_series_sine,
)
from .global_relation import residual
from .oracle_suite import fd_reference
from .problem_spec import BoundaryAssignment, build_problem
from .wellposedness import admissible, format_report

TOP_KEYS = {"problem", "numerics", "output"}
NUMERIC_KEYS = {"tol", "rmax", "grid", "representation"}
OUTPUT_KEYS = {"dir", "format"}


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def resolve_config(name: str) -> Path:
    p = Path(name)
    if p.is_file():
        return p
    stem = p.name if p.suffix else p.name + ".yaml"
    bundled = resources.files("utm") / "configs" / stem
    if bundled.is_file():
        return Path(str(bundled))
    raise SchemaError(f"no config file or bundled config named {name!r}")


def load_config(name: str) -> dict:
    with open(resolve_config(name)) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise SchemaError("config must be a mapping")
    extra = set(cfg) - TOP_KEYS
    if extra:
        raise SchemaError(f"unknown top-level keys: {sorted(extra)}")
    if "problem" not in cfg:
        raise SchemaError("config needs a 'problem' block")
    num = cfg.setdefault("numerics", {}) or {}
    out = cfg.setdefault("output", {}) or {}
    for block, allowed, what in ((num, NUMERIC_KEYS, "numerics"), (out, OUTPUT_KEYS, "output")):
        if not isinstance(block, dict):
            raise SchemaError(f"{what} block must be a mapping")
        bad = set(block) - allowed
        if bad:
            raise SchemaError(f"unknown keys in {what} block: {sorted(bad)}")
    cfg["numerics"], cfg["output"] = num, out
    return cfg


def _grid(spec) -> tuple:
    if isinstance(spec, str):
        parts = spec.split(",")
    else:
        parts = list(spec)
    if len(parts) != 2:
        raise SchemaError("grid must be NX,NT")
    nx, nt = int(parts[0]), int(parts[1])
    if nx < 1 or nt < 1:
        raise SchemaError("grid sizes must be positive")
    return nx, nt


def _emit(out_dir, name: str, text: str, stream):
    if out_dir is None:
        stream.write(text)
        return
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / name, "w", newline="\n") as fh:
        fh.write(text)


def _settings(args, cfg):
    num = cfg["numerics"]
    tol = args.tol if args.tol is not None else float(num.get("tol", 1e-8))
    rmax = args.rmax if args.rmax is not None else num.get("rmax")
    grid = _grid(args.grid if args.grid is not None else num.get("grid", [11, 4]))
    rep = args.representation or num.get("representation", "integral")
    out = args.out if args.out is not None else cfg["output"].get("dir")
    return tol, (float(rmax) if rmax is not None else None), grid, rep, out


def _series(prob, req):
    if abs(prob.symbol.coeffs[1]) == 0:
        return evaluate_series_sine(prob, req)
    return evaluate_series_complex(prob, req)


def cmd_analyze(prob, args, cfg, stdout):
    rep = admissible(prob)
    text = format_report(rep) + "\n"
    stdout.write(text)
    _, _, _, _, out = _settings(args, cfg)
    if out is not None:
        doc = {
            "admissible": rep.admissible,
            "N_left": rep.N_left,
            "N_right": rep.N_right,
            "predicted_N": rep.predicted_N,
            "diagnostics": [
                {"unknown": list(d.unknown), "carrier": d.carrier, "angle": d.angle,
                 "slope": d.slope, "verdict": d.verdict}
                for d in rep.diagnostics
            ],
            "warnings": list(prob.warnings),
        }
        _emit(out, "analyze.json", json.dumps(doc, indent=2, sort_keys=True) + "\n", stdout)
    return 0


def cmd_solve(prob, args, cfg, stdout):
    tol, rmax, (nx, nt), rep, out = _settings(args, cfg)
    x = np.linspace(0.0, prob.L, nx)
    t = np.linspace(prob.T_max / nt, prob.T_max, nt)
    req = EvalRequest(x, t, tol=tol, representation=rep, rmax=rmax)
    t0 = time.time()
    fields = []
    if rep in ("integral", "both"):
        fields.append(("integral", evaluate_integral(prob, req)))
    if rep in ("series", "both"):
        fields.append(("series", _series(prob, req)))
    buf = io.StringIO()
    both = len(fields) > 1
    buf.write(("representation," if both else "") + "x,t,re_q,im_q,err_est\n")
    for name, f in fields:
        for i, xv in enumerate(f.x):
            for j, tv in enumerate(f.t):
                v = f.q[i, j]
                row = [_fmt(xv), _fmt(tv), _fmt(v.real), _fmt(v.imag), _fmt(f.err[i, j])]
                buf.write(((name + ",") if both else "") + ",".join(row) + "\n")
    meta = [f"representation: {rep}", f"tol: {tol:g}", f"grid: {nx}x{nt}",
            f"seconds: {time.time() - t0:.3f}"]
    for name, f in fields:
        for key in ("R_max", "panels", "terms"):
            if key in f.meta:
                val = f.meta[key]
                meta.append(f"{name}.{key}: {max(val) if isinstance(val, list) else val}")
        for tl, why in f.meta.get("tail_limited", []):
            meta.append(f"warning: {name} tail limited at t={tl:g} ({why}); see err_est")
        if "deformations" in f.meta:
            meta.append(f"{name}.deformations: {len(f.meta['deformations'])}")
            meta.append(f"{name}.loops: {len(f.meta.get('loops', []))}")
    if both:
        meta.append(f"max |integral - series|: {np.max(np.abs(fields[0][1].q - fields[1][1].q)):.3e}")
    for w in prob.warnings:
        meta.append(f"warning: {w}")
    _emit(out, "solution.csv", buf.getvalue(), stdout)
    metatext = "".join(m + "\n" for m in meta)
    if out is None:
        sys.stderr.write(metatext)
    else:
        _emit(out, "metadata.txt", metatext, stdout)
    return 0


def cmd_contour(prob, args, cfg, stdout):
    _, rmax, _, _, out = _settings(args, cfg)
    R = rmax if rmax is not None else 40.0 / prob.L
    geo = _Context(prob, prob.T_max).geometry(R)
    buf = io.StringIO()
    write_polylines_csv([geo.plus, geo.minus], buf)
    _emit(out, "contour.csv", buf.getvalue(), stdout)
    return 0


def cmd_zeros(prob, args, cfg, stdout):
    _, rmax, _, _, out = _settings(args, cfg)
    R = rmax if rmax is not None else 40.0 / prob.L
    buf = io.StringIO()
    buf.write("re_k,im_k,in_D,nearest_ray,residual\n")
    for z in locate_zeros(prob, R):
        re, im, inD, ray, res = z.to_row()
        buf.write(",".join([_fmt(re), _fmt(im), str(bool(inD)).lower(), _fmt(ray), _fmt(res)]) + "\n")
    _emit(out, "zeros.csv", buf.getvalue(), stdout)
    return 0


def _is_quadratic_dirichlet(prob) -> bool:
    a = prob.assignment
    return (prob.n == 2 and isinstance(a, BoundaryAssignment)
            and set(a.left_orders) == {0} and set(a.right_orders) == {0})


def cmd_verify(prob, args, cfg, stdout):
    tol, rmax, _, _, out = _settings(args, cfg)
    rows = []
    rep = admissible(prob)
    rows.append(("admissible", float(rep.admissible), 1.0, "info"))
    T = prob.T_max
    fd = None
    try:
        fd = fd_reference(prob, 256, T / 10000, T=T)
        s = fd.to_sampled()
        ks = [3.0, -2.5, 4.0 + 1.0j, -1.0 - 3.0j, 7.0j]
        r = max(abs(residual(prob, s, k, T)) for k in ks)
        rows.append(("global_relation_fd", r, 1e-4, "pass" if r < 1e-4 else "fail"))
    except UTMError as exc:
        rows.append((f"fd_reference ({type(exc).__name__})", float("nan"), 0.0, "fail"))
    if rep.admissible:
        x = prob.L * np.array([0.25, 0.5, 0.75])
        req = EvalRequest(x, [T], tol=tol, rmax=rmax)
        q = evaluate_integral(prob, req).q[:, 0]
        if fd is not None:
            ref = fd.at(x, T)
            d = float(np.max(np.abs(q - ref)) / max(np.max(np.abs(ref)), 1e-300))
            rows.append(("integral_vs_fd", d, 1e-3, "pass" if d < 1e-3 else "fail"))
        if _is_quadratic_dirichlet(prob):
            qs = _series(prob, req).q[:, 0]
            d = float(np.max(np.abs(q - qs)))
            lim = 10 * tol
            rows.append(("integral_vs_series", d, lim, "pass" if d < lim else "fail"))
    width = max(len(r[0]) for r in rows)
    text = "".join(f"{n:<{width}}  {v:.3e}  {th:.1e}  {st}\n" for n, v, th, st in rows)
    stdout.write(text)
    if out is not None:
        csv = "check,value,threshold,status\n" + "".join(
            f"{n},{_fmt(v)},{_fmt(th)},{st}\n" for n, v, th, st in rows)
        _emit(out, "verify.csv", csv, stdout)
    return 1 if any(r[3] == "fail" for r in rows) else 0


COMMANDS = {
    "analyze": cmd_analyze,
    "solve": cmd_solve,
    "contour": cmd_contour,
    "zeros": cmd_zeros,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="utm", description="Transform-method solver for linear evolution PDEs on an interval.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="config path or bundled config name")
        p.add_argument("--tol", type=float)
        p.add_argument("--rmax", type=float)
        p.add_argument("--grid", help="NX,NT")
        p.add_argument("--out", help="output directory (default: standard output)")
        p.add_argument("--representation", choices=["integral", "series", "both"])
    return ap


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 1
    try:
        cfg = load_config(args.config)
        prob = build_problem(cfg["problem"])
        return COMMANDS[args.command](prob, args, cfg, stdout)
    except IllPosedProblem as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2 if args.command == "solve" else 1
    except (UTMError, ValueError, OSError, yaml.YAMLError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())
