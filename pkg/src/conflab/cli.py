"""Command line entry point ``lab``.

Exit status: 0 when the verdict is PASS, 1 on FAIL (or a refused pipeline),
2 on an execution error such as an invalid config.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from .experiments import EXECUTION_ERRORS, ConfigError, dumps, load_config, run_config

SUITES = ("oracle", "theorem", "negative-controls", "all")


def _json_arg(text: str) -> Any:
    """Inline JSON, or ``@path`` to read it from a file."""
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc}") from None


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    from . import _accel

    if _accel.USE_NUMBA:
        _accel.numba.set_num_threads(max(1, min(n, _accel.numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------------------
# suites


def suite_configs(name: str) -> list[dict[str, Any]]:
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; expected one of {SUITES}")
    names = [s for s in SUITES if s != "all"] if name == "all" else [name]
    out = []
    for n in names:
        data = json.loads(resources.files("conflab").joinpath("suites", f"{n}.json").read_text())
        if data.get("version") != 1:
            raise ConfigError(f"suite {n}: unsupported version {data.get('version')!r}")
        out.extend(data["members"])
    return out


def run_suite(name: str, out_dir: str | Path | None = None, log=None) -> tuple[dict[str, Any], int]:
    """Run every member; a member passes when its verdict equals its ``expect`` (default PASS)."""
    members = suite_configs(name)
    rows = []
    t0 = time.perf_counter()
    for cfg in members:
        expect = cfg.get("expect", "PASS")
        t1 = time.perf_counter()
        try:
            res = run_config(cfg, out_dir=out_dir)
            verdict = res.verdict
            error = None
        except EXECUTION_ERRORS as exc:
            verdict, error = "ERROR", str(exc)
        ok = verdict == expect
        row = {"name": cfg.get("name", cfg["experiment"]), "experiment": cfg["experiment"], "verdict": verdict,
               "expected": expect, "ok": ok, "timing": {"seconds": time.perf_counter() - t1}}
        if error:
            row["error"] = error
        rows.append(row)
        if log is not None:
            log(f"{'ok ' if ok else 'BAD'} {row['name']}: {verdict} (expected {expect}, "
                f"{row['timing']['seconds']:.1f}s)")
    all_ok = all(r["ok"] for r in rows)
    report = {"suite": name, "verdict": "PASS" if all_ok else "FAIL", "members": rows,
              "passed": sum(r["ok"] for r in rows), "total": len(rows),
              "timing": {"seconds": time.perf_counter() - t0}}
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / f"suite-{name}.json").write_text(dumps(report))
    return report, 0 if all_ok else 1


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, required=True, help="seed for every sampled quantity")
    p.add_argument("--name", help="report name (file stem under --out)")
    p.add_argument("--out", help="directory for the report and artifacts")
    p.add_argument("--report", help="explicit report path")


def _space_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--space", type=_json_arg, required=required,
                   help='ModelSpec JSON, e.g. \'{"kind": "flat-disc", "spacing": 0.04}\', or {"file": path}')


def _scan_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--triangles", type=int, help="number of sampled triangles")
    p.add_argument("--side-points", type=int, help="points per side")
    p.add_argument("--tol", type=float, help="pass threshold for the minimum slack (default 3h)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, help="numba thread count (also CONFLAB_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config", help="path to a config JSON file")
    p.add_argument("--out", help="directory for the report and artifacts")

    p = sub.add_parser("suite", help="run a bundled suite")
    p.add_argument("suite", help=f"one of {', '.join(SUITES)}")
    p.add_argument("--out", help="directory for member reports and the aggregate")

    p = sub.add_parser("deform", help="conformally change a space; emit the new space")
    _space_args(p)
    p.add_argument("--factor", type=_json_arg, help="factor rule rho (multiplies lengths)")
    p.add_argument("--field", type=_json_arg, help="field rule f (multiplies lengths by e^f)")
    p.add_argument("--quadrature", choices=["trapezoid", "midpoint", "segment"])
    p.add_argument("--space-out", help="path for the deformed space JSON")
    _common(p)

    p = sub.add_parser("cat0-scan", help="comparison-triangle scan")
    _space_args(p)
    p.add_argument("--factor", type=_json_arg)
    p.add_argument("--field", type=_json_arg)
    p.add_argument("--quadrature", choices=["trapezoid", "midpoint", "segment"])
    _scan_args(p)
    p.add_argument("--csv", help="per-triangle slack CSV")
    _common(p)

    p = sub.add_parser("dirichlet", help="harmonic map with fixed boundary values")
    _space_args(p)
    p.add_argument("--target", type=_json_arg, required=True, help='e.g. \'{"kind": "hyperbolic-plane"}\'')
    p.add_argument("--boundary", type=_json_arg, required=True, help='e.g. \'{"kind": "identity"}\'')
    p.add_argument("--tol", type=float)
    p.add_argument("--max-sweeps", type=int)
    p.add_argument("--mode", choices=["gauss-seidel", "jacobi"])
    p.add_argument("--solution", help="path for the solution JSON")
    _common(p)

    p = sub.add_parser("plateau", help="least-energy disc spanning a curve")
    _space_args(p)
    p.add_argument("--target", type=_json_arg, required=True)
    p.add_argument("--curve", type=_json_arg, required=True, help='e.g. \'{"kind": "circle", "radius": 0.8}\'')
    p.add_argument("--tol", type=float, help="Dirichlet tolerance per round")
    p.add_argument("--max-outer", type=int)
    p.add_argument("--solution", help="path for the solution JSON")
    _common(p)

    p = sub.add_parser("pipeline", help="all stages of the main-theorem pipeline")
    _space_args(p)
    p.add_argument("--field", type=_json_arg, required=True)
    p.add_argument("--curve", type=_json_arg, required=True)
    p.add_argument("--force", action="store_true", help="continue after a failed convexity pretest")
    p.add_argument("--domain-spacing", type=float)
    _scan_args(p)
    _common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """Translate verb flags into a version-1 config."""
    cmd = args.command
    cfg: dict[str, Any] = {"version": 1, "seed": args.seed, "experiment": cmd, "space": args.space}
    if args.name:
        cfg["name"] = args.name
    for key in ("factor", "field", "quadrature", "target", "boundary", "curve"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    scan = {k: v for k, v in (("triangles", getattr(args, "triangles", None)),
                               ("side_points", getattr(args, "side_points", None))) if v is not None}
    if cmd in ("cat0-scan", "pipeline") and args.tol is not None:
        scan["tol"] = args.tol
    if scan:
        cfg["scan"] = scan
    if cmd in ("dirichlet", "plateau"):
        solver = {k: v for k, v in (("tol", args.tol), ("max_sweeps", getattr(args, "max_sweeps", None)),
                                    ("mode", getattr(args, "mode", None)),
                                    ("max_outer", getattr(args, "max_outer", None))) if v is not None}
        if solver:
            cfg["solver"] = solver
    if cmd == "pipeline":
        params: dict[str, Any] = {"force": bool(args.force)}
        if args.domain_spacing is not None:
            params["domain_spacing"] = args.domain_spacing
        cfg["params"] = params
    output = {}
    if args.report:
        output["report"] = args.report
    for key, attr in (("csv", "csv"), ("space", "space_out"), ("solution", "solution")):
        val = getattr(args, attr, None)
        if val:
            output[key] = val
    if output:
        cfg["output"] = output
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _set_threads(args.threads)
    try:
        if args.command == "suite":
            report, status = run_suite(args.suite, args.out, log=lambda s: print(s, file=sys.stderr))
            print(dumps(report), end="")
            return status
        if args.command == "run":
            cfg = load_config(args.config)
            res = run_config(cfg, out_dir=args.out, base_dir=Path(args.config).resolve().parent)
        else:
            res = run_config(config_from_args(args), out_dir=args.out)
    except EXECUTION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(dumps(res.report), end="")
    return res.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
