"""Command-line front end.

Exit codes: 0 when every check passes, 1 on a check or numerical failure,
2 on bad input (unreadable or malformed files, bad flags).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import radial, verify
from .errors import BalayageError, InvalidInputError
from .instances import dump_problem, load_problem, random_problem, read_json, rng_for
from .semilinear import solve_fixed, solve_problem
from .tolerances import TOLERANCE_VERSION, parse_override, tolerance_table

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
COMMANDS = ("verify-all", "solve-discrete", "solve-radial", "kernels-check", "gen")


@dataclass
class RunConfig:
    command: str
    input_path: Optional[str] = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output_path: Optional[str] = None
    instances: int = 500
    suites: Optional[List[str]] = None
    timings: bool = False
    n: int = 6
    family: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidInputError(f"unknown command {self.command!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        if self.instances < 1:
            raise InvalidInputError("--instances must be positive")
        tolerance_table(self.tolerances)


def _vec(v) -> str:
    return "[" + ", ".join(repr(float(x)) for x in np.asarray(v).ravel()) + "]"


def _emit(text: str, path: Optional[str]):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise InvalidInputError(f"cannot write {path}: {exc.strerror}") from None


def _run_checks(cfg: RunConfig, suites) -> int:
    records = verify.run_all(cfg.seed, cfg.instances, cfg.tolerances, suites)
    csv_text = verify.records_to_csv(records, cfg.timings)
    if cfg.output_path:
        _emit(csv_text, cfg.output_path)
    else:
        sys.stdout.write(csv_text)
    summary = verify.summarize(records)
    failed = sum(not r.passed for r in records)
    print(f"tolerance table v{TOLERANCE_VERSION}, seed {cfg.seed}", file=sys.stderr)
    print(summary, file=sys.stderr)
    print(f"{len(records) - failed}/{len(records)} checks passed", file=sys.stderr)
    return EXIT_OK if failed == 0 else EXIT_FAIL


def _solve_discrete(cfg: RunConfig) -> int:
    if not cfg.input_path:
        raise InvalidInputError("solve-discrete needs a problem file")
    problem = load_problem(cfg.input_path)
    rep = solve_problem(problem)
    tol = tolerance_table(cfg.tolerances)["residual"]
    lines = [
        f"problem: {problem.label or Path(cfg.input_path).name}",
        f"states: {problem.n}",
        f"method: {rep.method}",
        f"iterations: {rep.iterations}",
        f"residual: {rep.residual!r}",
        f"classification: {rep.classification}",
        f"u: {_vec(rep.u)}",
        f"P_phi_h: {_vec(rep.P_phi_h)}",
    ]
    _emit("\n".join(lines) + "\n", cfg.output_path)
    return EXIT_OK if rep.residual < tol else EXIT_FAIL


def _solve_radial(cfg: RunConfig) -> int:
    if not cfg.input_path:
        raise InvalidInputError("solve-radial needs a parameter file")
    doc = read_json(cfg.input_path)
    try:
        d, alpha, gamma, h, R = (doc["d"], doc["alpha"], doc["gamma"], doc["h"], doc["R"])
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"radial file needs d, alpha, gamma, h and R: missing {exc}") from None
    cpo = int(doc.get("cells_per_octave", 8))
    inst = radial.radial_power_instance(int(d), float(alpha), float(gamma), float(h), float(R), cpo)
    pb = inst.problem
    rep = solve_fixed(pb.Kp, pb.phi, pb.h)
    gap = inst.tail_potential(rep.u, float(R) / 2)
    verdict = radial.power_tail_finiteness(int(d), float(alpha), float(gamma), float(h))
    lines = [
        f"problem: {pb.label}",
        f"cells: {pb.n}",
        f"method: {rep.method}",
        f"residual: {rep.residual!r}",
        f"u(0): {inst.value_at_origin(rep.u)!r}",
        f"outer-half potential at 0: {gap!r}",
        f"K^phi(h) at infinity: {verdict.verdict}",
        f"radii: {_vec(inst.grid.nodes)}",
        f"u: {_vec(rep.u)}",
    ]
    _emit("\n".join(lines) + "\n", cfg.output_path)
    tol = tolerance_table(cfg.tolerances)["residual"]
    return EXIT_OK if rep.residual < tol else EXIT_FAIL


def _gen(cfg: RunConfig) -> int:
    problem = random_problem(rng_for(cfg.seed, 0, 9), family=cfg.family, n=cfg.n,
                             label=f"gen-n{cfg.n}-seed{cfg.seed}")
    _emit(dump_problem(problem), cfg.output_path)
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    if cfg.command == "verify-all":
        return _run_checks(cfg, cfg.suites)
    if cfg.command == "kernels-check":
        return _run_checks(cfg, cfg.suites or ["kernels", "finiteness", "ball", "lattice"])
    if cfg.command == "solve-discrete":
        return _solve_discrete(cfg)
    if cfg.command == "solve-radial":
        return _solve_radial(cfg)
    return _gen(cfg)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    common.add_argument("--out", dest="output_path", help="output file (default stdout)")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                        help="override a threshold; repeatable")
    common.add_argument("--instances", type=int, default=500,
                        help="seeded instances per random suite (default 500)")

    parser = argparse.ArgumentParser(prog="balayage", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    va = sub.add_parser("verify-all", parents=[common], help="run every verification suite")
    va.add_argument("--suites", help="comma-separated subset of: " + ", ".join(verify.SUITES))
    va.add_argument("--timings", action="store_true", help="add wall_time_ms to the CSV")
    kc = sub.add_parser("kernels-check", parents=[common], help="quadrature and kernel identities")
    kc.add_argument("--timings", action="store_true")
    for name, what in (("solve-discrete", "problem JSON file"),
                       ("solve-radial", "radial parameter JSON file")):
        p = sub.add_parser(name, parents=[common], help=f"solve one {what}")
        p.add_argument("input_path", help=what)
    gen = sub.add_parser("gen", parents=[common], help="emit a seeded random problem file")
    gen.add_argument("--n", type=int, default=6, help="number of states (default 6)")
    gen.add_argument("--family", choices=("power", "linear", "tabulated", "radial_power"))
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    tols = dict(parse_override(t) for t in args.tol)
    suites = None
    if getattr(args, "suites", None):
        suites = [s.strip() for s in args.suites.split(",") if s.strip()]
        unknown = [s for s in suites if s not in verify.SUITES]
        if unknown:
            raise InvalidInputError(f"unknown suites: {', '.join(unknown)}")
    return RunConfig(command=args.command, input_path=getattr(args, "input_path", None),
                     seed=args.seed, tolerances=tols, output_path=args.output_path,
                     instances=args.instances, suites=suites,
                     timings=getattr(args, "timings", False), n=getattr(args, "n", 6),
                     family=getattr(args, "family", None))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return run(config_from_args(args))
    except InvalidInputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BalayageError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
