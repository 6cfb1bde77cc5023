"""Command-line entry point: ``neseek {validate,ne,run,demo}``.

Exit status: 0 success, 2 parse error, 3 condition failure, 4 divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import game as gm
from . import graph as gr
from . import scenario
from .rules import Mode
from .sim import DivergenceError, PreconditionError, ScenarioConfig, admissibility, integrate, settling_time

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONDITION = 3
EXIT_DIVERGED = 4

SETTLE_TOL = {Mode.PERFECT: 1e-3, Mode.IMPERFECT: 1e-2}


@dataclass
class RunReport:
    scenario: str
    conditions: list[dict] = field(default_factory=list)
    monotonicity: dict | None = None
    graph_connected: bool | None = None
    closed_loop_abscissa: float | None = None
    nash_equilibrium: list[float] | None = None
    settling_time: float | None = None
    settling_tol: float | None = None
    final_ne_dist: float | None = None
    final_rho_norm: float | None = None
    final_eta_err: float | None = None
    outputs: dict = field(default_factory=dict)
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def resolve_config(ref: str) -> ScenarioConfig:
    """Load a scenario from a file path or a bundled demo name."""
    if ref in scenario.DEMOS and not Path(ref).exists():
        return scenario.from_dict(scenario.DEMOS[ref]())
    return scenario.load(ref)


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    for key in ("mode", "delta", "step", "horizon"):
        val = getattr(args, key, None)
        if val is not None:
            changes[key] = Mode(val) if key == "mode" else val
    return cfg.replace(**changes) if changes else cfg


def _condition_rows(reports) -> list[dict]:
    rows = []
    for i, rep in enumerate(reports):
        rows.append({
            "agent": i + 1,
            "passed": rep.passed,
            "conditions": {k: rep.condition(k) for k in (1, 2, 3)},
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in rep.checks],
        })
    return rows


def validate(cfg: ScenarioConfig, out=sys.stdout) -> tuple[RunReport, bool]:
    reports, abscissa = admissibility(cfg)
    cert = gm.monotonicity_certificate(cfg.game)
    connected = gr.is_connected(cfg.graph)
    rep = RunReport(
        scenario=cfg.name,
        conditions=_condition_rows(reports),
        monotonicity={"mu": cert.mu, "theta": cert.theta, "passed": cert.passed},
        graph_connected=connected,
        closed_loop_abscissa=float(abscissa),
    )
    print(f"scenario {cfg.name}: {len(cfg.agents)} agents, mode {cfg.mode.value}", file=out)
    for row, r in zip(rep.conditions, reports):
        flags = "  ".join(f"C{k} {'pass' if ok else 'FAIL'}" for k, ok in row["conditions"].items())
        print(f"  agent {row['agent']}: {flags}", file=out)
        for name in r.failures():
            print(f"    failed: {name} ({r[name].detail})", file=out)
    print(f"  monotonicity: mu = {cert.mu:.6g}, theta = {cert.theta:.6g} "
          f"({'pass' if cert.passed else 'FAIL'})", file=out)
    print(f"  graph connected: {'pass' if connected else 'FAIL'}", file=out)
    print(f"  closed-loop spectral abscissa: {abscissa:.6g}", file=out)
    ok = all(r.passed for r in reports) and cert.passed and connected
    return rep, ok


def nash(cfg: ScenarioConfig, out=sys.stdout) -> np.ndarray:
    y = gm.nash_equilibrium(cfg.game)
    for i, v in enumerate(y):
        print(f"y_{i + 1} = {v:.12g}", file=out)
    resid = np.abs(gm.pseudo_gradient(cfg.game, y)).max()
    print(f"max |phi(y*)| = {resid:.3e}", file=out)
    return y


def run(cfg: ScenarioConfig, out_dir, force: bool = False, out=sys.stdout) -> RunReport:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports, abscissa = admissibility(cfg)
    rep = RunReport(scenario=cfg.name, conditions=_condition_rows(reports),
                    closed_loop_abscissa=float(abscissa),
                    nash_equilibrium=gm.nash_equilibrium(cfg.game).tolist())
    stem = f"{cfg.name}_{cfg.mode.value}"
    report_path = out_dir / f"{stem}_report.json"
    try:
        traj = integrate(cfg, force=force)
    except DivergenceError as exc:
        rep.error = str(exc)
        rep.outputs = {"report": str(report_path)}
        report_path.write_text(rep.to_json())
        raise
    tol = SETTLE_TOL[cfg.mode]
    csv_path = traj.to_csv(out_dir / f"{stem}.csv")
    rep.settling_time = settling_time(traj, tol)
    rep.settling_tol = tol
    rep.final_ne_dist = float(traj.ne_dist[-1])
    rep.final_rho_norm = float(traj.rho_norm[-1])
    rep.final_eta_err = float(traj.eta_err[-1])
    rep.outputs = {"trajectory": str(csv_path), "report": str(report_path)}
    report_path.write_text(rep.to_json())
    st = "not reached" if rep.settling_time is None else f"{rep.settling_time:.4g} s"
    print(f"{cfg.name} ({cfg.mode.value}): settling time (tol {tol:g}) {st}", file=out)
    print(f"  final ne_dist = {rep.final_ne_dist:.3e}, rho_norm = {rep.final_rho_norm:.3e}, "
          f"eta_err = {rep.final_eta_err:.3e}", file=out)
    print(f"  wrote {csv_path} and {report_path}", file=out)
    return rep


def _run_one(ref: str, args) -> tuple[int, str]:
    """Worker for ``--batch``; returns (exit code, captured text)."""
    import io

    buf = io.StringIO()
    code = _dispatch(args, ref, buf)
    return code, buf.getvalue()


def _dispatch(args, ref: str, out) -> int:
    try:
        cfg = _apply_overrides(resolve_config(ref), args)
    except (scenario.ConfigError, OSError) as exc:
        print(f"error: {ref}: {exc}", file=out)
        return EXIT_PARSE
    try:
        if args.command == "validate":
            return EXIT_OK if validate(cfg, out)[1] else EXIT_CONDITION
        if args.command == "ne":
            nash(cfg, out)
            return EXIT_OK
        if args.command == "run":
            run(cfg, args.out, force=args.force, out=out)
            return EXIT_OK
    except PreconditionError as exc:
        print(f"error: {exc}", file=out)
        return EXIT_CONDITION
    except DivergenceError as exc:
        print(f"error: {exc}", file=out)
        return EXIT_DIVERGED
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=out)
        return EXIT_CONDITION
    raise AssertionError(args.command)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neseek", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("configs", nargs="+", metavar="config",
                        help="scenario JSON file or bundled name (example1, example2)")
        sp.add_argument("--mode", choices=[m.value for m in Mode])
        sp.add_argument("--delta", type=float)
        sp.add_argument("--step", type=float)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--batch", action="store_true",
                        help="process several configs in parallel worker processes")
        return sp

    scenario_cmd("validate", "check the convergence conditions")
    scenario_cmd("ne", "print the Nash equilibrium")
    rp = scenario_cmd("run", "integrate and write trajectory CSV plus JSON report")
    rp.add_argument("--out", default="out", help="output directory (default: out)")
    rp.add_argument("--force", action="store_true", help="integrate even if validation fails")

    dp = sub.add_parser("demo", help="write a bundled scenario file")
    dp.add_argument("name", choices=sorted(scenario.DEMOS))
    dp.add_argument("--mode", choices=[m.value for m in Mode])
    dp.add_argument("--out", help="file to write (default: stdout)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "demo":
        kw = {"mode": args.mode} if args.mode else {}
        text = scenario.dumps(scenario.DEMOS[args.name](**kw)) + "\n"
        if args.out:
            Path(args.out).write_text(text)
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(text)
        return EXIT_OK

    if args.batch and len(args.configs) > 1:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_run_one, args.configs, [args] * len(args.configs)))
        for _, text in results:
            sys.stdout.write(text)
        return max(code for code, _ in results)

    codes = [_dispatch(args, ref, sys.stdout) for ref in args.configs]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
