"""Scenario runner and command line.

Scenarios are JSON documents (``.scn``)::

    {"id": "gl2_descent", "command": "descend",
     "coefficients": {"p": 2, "N": 3}, "series": {"r": 1, "M": 4},
     "E": "2 + t0", "group": "GL", "mu": [1, 0], "depth": 2,
     "matrices": {"X": [["1 + t0", "1"], ["2", "3"]]},
     "expect": "verified"}

A matrix may be the string ``"random"``; it is then drawn from the seed.
Exit codes: 0 verified, 2 failed, 3 inconclusive, 1 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import mat
from .bkmod import Cocharacter, hodge_and_classify, make_bk_module, to_standard_form
from .descent import NotOneBounded, descend
from .displays import GL, BanalDisplay, OrthQ, display_to_bk, one_bounded, phi_torsor_consistent
from .prisms import BudgetExceeded, build_coproduct, is_distinguished, make_bk_prism, verify_kernel_lemmas
from .rings import DeltaCtx, ParseError, SeriesElt, ValidationError, Zp, eisenstein, make_coefficient_ring, unramified

EXIT = {"verified": 0, "failed": 2, "inconclusive": 3}
COMMANDS = ("prism-check", "bk", "display", "descend")
CATALOG_ENV = "PRISMKIT_CATALOG"


class ScenarioError(ValueError):
    """Malformed scenario (exit code 1)."""


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class Scenario:
    id: str
    command: str
    coefficients: dict = field(default_factory=lambda: {"p": 2, "N": 3})
    series: dict = field(default_factory=lambda: {"r": 1, "M": 4})
    E: str = "2 + t0"
    group: str = "GL"
    mu: list = field(default_factory=list)
    depth: int = 2
    budget: int = 20000
    denominator: int = 0
    matrices: dict = field(default_factory=dict)
    expect: Optional[str] = None

    FIELDS = ("id", "command", "coefficients", "series", "E", "group", "mu", "depth", "budget",
              "denominator", "matrices", "expect")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        unknown = sorted(set(d) - set(cls.FIELDS))
        if unknown:
            raise ScenarioError(f"unknown fields: {', '.join(unknown)}")
        for key in ("id", "command"):
            if key not in d:
                raise ScenarioError(f"missing field {key!r}")
        sc = cls(**d)
        sc.validate()
        return sc

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ScenarioError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.group not in ("GL", "OrthQ"):
            raise ScenarioError(f"unknown group {self.group!r}")
        if self.expect is not None and self.expect not in EXIT:
            raise ScenarioError(f"expect must be one of {', '.join(EXIT)}")
        need = {"bk": "F", "display": "X", "descend": "X"}.get(self.command)
        if need and need not in self.matrices:
            raise ScenarioError(f"command {self.command!r} needs matrix {need!r}")
        for name, m in self.matrices.items():
            if m == "random":
                continue
            if not isinstance(m, list) or any(not isinstance(r, list) or len(r) != len(m) for r in m):
                raise ScenarioError(f"matrix {name!r} must be a square nested list")
            if self.mu and len(m) != len(self.mu) and self.command != "bk":
                raise ScenarioError(f"matrix {name!r} has size {len(m)} but mu has {len(self.mu)} weights")

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, ensure_ascii=True) + "\n"


def parse_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return Scenario.from_dict(data)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def catalog_dir() -> Path:
    env = os.environ.get(CATALOG_ENV)
    return Path(env) if env else Path(__file__).resolve().parent / "catalog"


def catalog_files() -> list:
    d = catalog_dir()
    return sorted(d.glob("*.scn")) if d.is_dir() else []


# ---------------------------------------------------------------------------
# building objects


def coefficient_ring(spec: dict):
    spec = dict(spec)
    p, N = spec.pop("p"), spec.pop("N")
    if "f" in spec:
        return make_coefficient_ring(p, spec["f"], N, spec.get("pi", "p"), spec.get("sigma", "x"), spec.get("q"))
    if spec.get("eisenstein"):
        return eisenstein(p, N)
    deg = spec.get("unramified_degree", 1)
    return unramified(p, deg, N) if deg > 1 else Zp(p, N)


def _matrix(sc: Scenario, A: DeltaCtx, name: str, n: int, seed: int) -> list:
    m = sc.matrices[name]
    if m == "random":
        return mat.random_invertible(A, n, random.Random(f"{seed}:{sc.id}:{name}"))
    return mat.parse(A, m)


def _prism(sc: Scenario):
    A = DeltaCtx(coefficient_ring(sc.coefficients), sc.series.get("r", 1), sc.series.get("M", 4))
    return make_bk_prism(A, sc.E)


def _group(sc: Scenario, n: int):
    return GL(n) if sc.group == "GL" else OrthQ(n)


# ---------------------------------------------------------------------------
# commands


def _cmd_prism_check(sc: Scenario, seed: int) -> dict:
    pr = _prism(sc)
    unit, member = is_distinguished(pr.E)
    env = build_coproduct(pr, sc.depth, sc.budget)
    lem = verify_kernel_lemmas(env)
    ok = unit and member and lem["all_verified"]
    status = "verified" if ok else ("failed" if not (unit and member) else "inconclusive")
    return {"status": status, "distinguished": {"delta_unit": unit, "pi_in_ideal": member},
            "envelope": env.describe(), "kernel_lemmas": lem["checks"], "w": lem["w"]}


def _cmd_bk(sc: Scenario, seed: int) -> dict:
    pr = _prism(sc)
    F = sc.matrices["F"]
    n = len(F) if isinstance(F, list) else len(sc.mu)
    m = make_bk_module(pr, _matrix(sc, pr.ring, "F", n, seed), sc.denominator)
    rep = hodge_and_classify(m)
    out = {"status": "verified" if rep["displayed"] else "failed", "displayed": rep["displayed"],
           "type": rep["type"], "witness": rep["witness"], "pieces": rep["pieces"], "range": rep["range"],
           "minuscule": rep["minuscule"], "minuscule_by_cokernel": rep["minuscule_by_cokernel"],
           "filtration_stable": rep["filtration_stable"], "denominator": m.denom_k}
    return out


def _cmd_display(sc: Scenario, seed: int) -> dict:
    pr = _prism(sc)
    mu = Cocharacter(sc.mu)
    desc = _group(sc, mu.n)
    dsp = BanalDisplay(pr, desc, mu, _matrix(sc, pr.ring, "X", mu.n, seed))
    m = display_to_bk(dsp)
    rep = hodge_and_classify(m)
    checks = {"type_matches_mu": rep["displayed"] and rep["type"] == mu,
              "phi_torsor_consistent": phi_torsor_consistent(dsp)}
    sf = to_standard_form(m)
    checks["standard_form_iso"] = bool(sf["iso_verified"])
    return {"status": "verified" if all(checks.values()) else "failed", "checks": checks,
            "one_bounded": one_bounded(desc, mu), "standard_form_X": mat.to_strings(sf["X"]),
            "X": mat.to_strings(dsp.X)}


def _cmd_descend(sc: Scenario, seed: int) -> dict:
    pr = _prism(sc)
    mu = Cocharacter(sc.mu)
    dsp = BanalDisplay(pr, _group(sc, mu.n), mu, _matrix(sc, pr.ring, "X", mu.n, seed))
    env = build_coproduct(pr, sc.depth, sc.budget)
    try:
        rep = descend(env, dsp)
    except NotOneBounded as exc:
        return {"status": "failed", "reason": str(exc)}
    rep["X"] = mat.to_strings(dsp.X)
    rep["envelope"] = env.describe()
    return rep


HANDLERS = {"prism-check": _cmd_prism_check, "bk": _cmd_bk, "display": _cmd_display, "descend": _cmd_descend}


def run_scenario(sc: Scenario, seed: int = 0) -> dict:
    """Dispatch; input errors propagate, arithmetic failures become ``inconclusive``."""
    try:
        body = HANDLERS[sc.command](sc, seed)
    except (ValidationError, ParseError):
        raise
    except (BudgetExceeded, ArithmeticError) as exc:
        body = {"status": "inconclusive", "reason": f"{type(exc).__name__}: {exc}"}
    report = {"scenario": sc.id, "command": sc.command, "seed": seed, **body}
    if sc.expect is not None:
        report["expected_status"] = sc.expect
        report["matches_expectation"] = report["status"] == sc.expect
    return report


def run_scenario_file(path, seed: int = 0) -> dict:
    try:
        return run_scenario(load_scenario(path), seed)
    except (ScenarioError, ValidationError, ParseError) as exc:
        return {"scenario": Path(path).stem, "status": "error", "reason": str(exc), "matches_expectation": False}


# ---------------------------------------------------------------------------
# reports


def plain(obj):
    """JSON-ready copy with ASCII ring elements and string keys."""
    if isinstance(obj, dict):
        return {(",".join(map(str, k)) if isinstance(k, tuple) else str(k)): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, Cocharacter):
        return list(obj.weights)
    if isinstance(obj, SeriesElt):
        return str(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if obj is None or isinstance(obj, (str, float)):
        return obj
    return str(obj)


def _text_lines(obj, prefix: str = "") -> list:
    if isinstance(obj, dict):
        out = []
        for k in sorted(obj):
            out += _text_lines(obj[k], f"{prefix}.{k}" if prefix else k)
        return out
    if isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        out = []
        for i, v in enumerate(obj):
            out += _text_lines(v, f"{prefix}[{i}]")
        return out
    return [f"{prefix}: {json.dumps(obj, ensure_ascii=True)}"]


def report_emit(report: dict, fmt: str = "json") -> bytes:
    data = plain(report)
    if fmt == "json":
        text = json.dumps(data, indent=2, sort_keys=True, ensure_ascii=True) + "\n"
    elif fmt == "text":
        text = "\n".join(_text_lines(data)) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return text.encode("ascii")


def exit_code(report: dict) -> int:
    return EXIT.get(report.get("status"), 1)


# ---------------------------------------------------------------------------
# command line


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _scenario_from_flags(args, command: str) -> Scenario:
    d = {"id": args.id or command, "command": command}
    if args.p is not None or args.N is not None:
        d["coefficients"] = {"p": args.p or 2, "N": args.N or 3}
    if args.r is not None or args.M is not None:
        d["series"] = {"r": 1 if args.r is None else args.r, "M": args.M or 4}
    if args.E:
        d["E"] = args.E
    if args.group:
        d["group"] = args.group
    if args.mu:
        d["mu"] = json.loads(args.mu)
    if args.matrix:
        d["matrices"] = {}
        for item in args.matrix:
            name, _, value = item.partition("=")
            d["matrices"][name] = "random" if value == "random" else json.loads(value)
    if args.denominator:
        d["denominator"] = args.denominator
    return Scenario.from_dict(d)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="prismkit", description="Truncated prisms, Breuil-Kisin modules, displays and descent.")
    sub = ap.add_subparsers(dest="cmd")
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--budget", type=int, default=None)
    common.add_argument("--depth", type=int, default=None)
    st = sub.add_parser("selftest", parents=[common], help="run the invariant suites")
    st.add_argument("level", nargs="?", choices=("quick", "full"), default="quick")
    st.add_argument("--only", action="append", default=None, help="restrict to a suite (repeatable)")
    run = sub.add_parser("run", parents=[common], help="run a scenario file")
    run.add_argument("file")
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, parents=[common], help=f"{cmd} on a scenario file or inline flags")
        sp.add_argument("file", nargs="?")
        sp.add_argument("--id")
        sp.add_argument("--p", type=int)
        sp.add_argument("--N", type=int)
        sp.add_argument("--r", type=int)
        sp.add_argument("--M", type=int)
        sp.add_argument("--E")
        sp.add_argument("--group", choices=("GL", "OrthQ"))
        sp.add_argument("--mu", help="JSON list of weights, e.g. [1,0]")
        sp.add_argument("--matrix", action="append", help='NAME=JSON or NAME=random, e.g. X=[["1","0"],["0","1"]]')
        sp.add_argument("--denominator", type=int, default=0)
    sub.add_parser("catalog", help="list catalog scenarios")
    return ap


def main(argv=None) -> int:
    from .selftest import selftest
    try:
        args = build_parser().parse_args(argv)
        if args.cmd is None:
            raise UsageError("a subcommand is required (try --help)")
        if args.cmd == "catalog":
            for f in catalog_files():
                print(f)
            return 0
        if args.cmd == "selftest":
            report = selftest(args.level, args.seed, args.only)
        else:
            if args.cmd == "run":
                sc = load_scenario(args.file)
            elif args.file:
                sc = load_scenario(args.file)
                sc.command = args.cmd
                sc.validate()
            else:
                sc = _scenario_from_flags(args, args.cmd)
            if args.depth is not None:
                sc.depth = args.depth
            if args.budget is not None:
                sc.budget = args.budget
            report = run_scenario(sc, args.seed)
    except (UsageError, ScenarioError, ValidationError, ParseError, OSError, json.JSONDecodeError) as exc:
        print(f"prismkit: error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.buffer.write(report_emit(report, args.format))
    sys.stdout.flush()
    return exit_code(report)


if __name__ == "__main__":
    sys.exit(main())
