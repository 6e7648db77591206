"""Invariant suites run by ``prismkit selftest``.

Every suite draws its randomness from ``random.Random(f"{seed}:{name}")`` so
results depend only on the seed.  A suite reports ``passed``/``total`` counts
and never raises; an exception is recorded as a failed case.
"""

from __future__ import annotations

import random
import traceback
from typing import Callable

from . import mat
from .bkmod import (
    Cocharacter,
    hodge_and_classify,
    is_displayed,
    make_banal_bk,
    make_bk_module,
    minuscule_of,
    to_standard_form,
    window_of,
)
from .descent import check_uniqueness, lift_descent_isomorphism, setup_deformation
from .displays import (
    GL,
    BanalDisplay,
    OrthQ,
    decompose,
    graded_quotients,
    membership_display_group,
    one_bounded,
    preserves_filtration,
    random_member,
)
from .prisms import build_coproduct, is_distinguished, make_bk_prism, verify_kernel_lemmas
from .rings import DeltaCtx, Witt2Elt, Zp, axiom_suite, witt2_section

QUICK, FULL = "quick", "full"


class Tally:
    def __init__(self, name: str):
        self.name = name
        self.passed = 0
        self.total = 0
        self.failures = []

    def check(self, ok: bool, label: str) -> None:
        self.total += 1
        if ok:
            self.passed += 1
        elif len(self.failures) < 5:
            self.failures.append(label)

    def report(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "total": self.total,
                "ok": self.total > 0 and self.passed == self.total, "failures": self.failures}


def _count(level: str, quick: int, full: int) -> int:
    return full if level == FULL else quick


def suite_delta_axioms(t: Tally, rng: random.Random, level: str) -> None:
    for p, N, r, M in [(2, 4, 1, 8), (3, 3, 2, 5)]:
        rep = axiom_suite(DeltaCtx(Zp(p, N), r, M), _count(level, 20, 200), rng.randrange(1 << 30))
        t.check(rep["passed"], f"delta laws at p={p}")


def suite_witt2(t: Tally, rng: random.Random, level: str) -> None:
    A = DeltaCtx(Zp(2, 4), 1, 6)
    for k in range(_count(level, 20, 100)):
        x, y, z = (Witt2Elt(A.random(rng), A.random(rng)) for _ in range(3))
        a, b = A.random(rng), A.random(rng)
        ok = ((x * y) * z == x * (y * z) and x * (y + z) == x * y + x * z
              and witt2_section(a) * witt2_section(b) == witt2_section(a * b)
              and witt2_section(a) + witt2_section(b) == witt2_section(a + b)
              and witt2_section(a).w0.equals_exactly(a))
        t.check(ok, f"trial {k}")


def suite_distinguished(t: Tally, rng: random.Random, level: str) -> None:
    A = DeltaCtx(Zp(2, 4), 1, 6)
    for text, want in [("2 + t0", True), ("2", True), ("t0", False), ("(2 + t0)^2", False)]:
        flag, equiv = is_distinguished(A.parse(text))
        t.check(flag == want and equiv == want, text)


def suite_nondisplayed(t: Tally, rng: random.Random, level: str) -> None:
    pr = make_bk_prism(DeltaCtx(Zp(3, 4), 1, 6), "3 + t0")
    m = make_bk_module(pr, [["3", "3 + t0"], ["3 + t0", "(3 + t0)^2"]])
    flag, wit = is_displayed(m)
    t.check(flag is False and wit is not None and wit["nonzero"] and wit["killed_by_pi"], "counterexample")
    mu = Cocharacter([1, 0])
    for k in range(_count(level, 5, 50)):
        rep = hodge_and_classify(make_banal_bk(pr, mu, mat.random_invertible(pr.ring, 2, rng)))
        t.check(rep["displayed"] and rep["type"] == mu, f"banal {k}")


def suite_minuscule(t: Tally, rng: random.Random, level: str) -> None:
    pr = make_bk_prism(DeltaCtx(Zp(2, 3), 1, 5), "2 + t0")
    A = pr.ring
    minus = [Cocharacter(w) for w in [(1, 0), (1, 1, 0), (1, 0, 0)]]
    for k in range(_count(level, 5, 50)):
        mu = minus[k % len(minus)]
        rep = hodge_and_classify(make_banal_bk(pr, mu, mat.random_invertible(A, mu.n, rng)))
        t.check(rep["minuscule"] and rep["minuscule_by_cokernel"], f"minuscule {mu}")
    off = [Cocharacter(w) for w in [(0, -1), (1, -1), (0, 0, -1), (1, 0, -1), (1, 1, -1)]]
    for k in range(_count(level, 2, 10)):
        mu = off[k % len(off)]
        rep = hodge_and_classify(make_banal_bk(pr, mu, mat.random_invertible(A, mu.n, rng)))
        t.check(rep["minuscule_criteria_agree"] and not rep["minuscule"], f"non-effective {mu}")


def suite_standard_form(t: Tally, rng: random.Random, level: str) -> None:
    pr = make_bk_prism(DeltaCtx(Zp(2, 3), 1, 5), "2 + t0")
    shapes = [Cocharacter([1, 0]), Cocharacter([1, 1, 0]), Cocharacter([2, 1, 0])]
    for k in range(_count(level, 4, 20)):
        mu = shapes[k % len(shapes)]
        X0 = mat.random_invertible(pr.ring, mu.n, rng)
        sf = to_standard_form(make_banal_bk(pr, mu, X0))
        ok = sf["iso_verified"] and sf["mu"] == mu and sf["g"] is not None
        ok = ok and mat.equals(mat.mul(X0, mat.phi(sf["h_d"])), mat.mul(sf["g"], sf["X"]))
        t.check(ok, f"{mu} trial {k}")


def suite_window(t: Tally, rng: random.Random, level: str) -> None:
    pr = make_bk_prism(DeltaCtx(Zp(2, 3), 1, 5), "2 + t0")
    shapes = [Cocharacter([1, 0]), Cocharacter([1, 1, 0]), Cocharacter([1, 0, 0])]
    for k in range(_count(level, 2, 10)):
        mu = shapes[k % len(shapes)]
        m = make_banal_bk(pr, mu, mat.random_invertible(pr.ring, mu.n, rng))
        win = window_of(m)
        t.check(all(win.validate().values()) and mat.equals(minuscule_of(win).F_num, m.F_num), f"{mu} trial {k}")


def suite_decomposition(t: Tally, rng: random.Random, level: str) -> None:
    pr = make_bk_prism(DeltaCtx(Zp(2, 3), 1, 4), "2 + t0")
    mu = Cocharacter([1, 1, 0])
    desc = GL(3)
    for k in range(_count(level, 20, 100)):
        g = random_member(desc, mu, pr, rng)
        u, p = decompose(desc, mu, pr, membership_display_group(desc, mu, pr, g))
        t.check(mat.equals_exactly(mat.mul(u, p), g), f"split {k}")
    for k in range(_count(level, 40, 200)):
        g = random_member(desc, mu, pr, rng) if k % 2 else mat.random_invertible(pr.ring, 3, rng)
        member = membership_display_group(desc, mu, pr, g) is not None
        t.check(member == preserves_filtration(pr, mu, g), f"membership {k}")


def suite_one_bounded(t: Tally, rng: random.Random, level: str) -> None:
    for k in range(50):
        n = rng.randint(1, 4)
        w = sorted((rng.randint(-2, 2) for _ in range(n)), reverse=True)
        top = max(w[j] - w[i] for i in range(n) for j in range(n))
        t.check(one_bounded(GL(n), Cocharacter(w)) == (top <= 1), f"weights {w}")
    t.check(one_bounded(OrthQ(4), Cocharacter([1, 0, 0, -1])), "orthogonal (1,0,0,-1)")


def suite_graded_quotients(t: Tally, rng: random.Random, level: str) -> None:
    pr = make_bk_prism(DeltaCtx(Zp(2, 2), 1, 2), "2 + t0")
    rep = graded_quotients(GL(2), Cocharacter([1, 0]), pr, 1)
    for piece in rep["pieces"]:
        t.check(piece["match"], f"m = {piece['m']}")


def suite_kernel_lemmas(t: Tally, rng: random.Random, level: str) -> None:
    env = build_coproduct(make_bk_prism(DeltaCtx(Zp(2, 3), 1, 4), "2 + t0"), 2)
    for c in verify_kernel_lemmas(env)["checks"]:
        t.check(c["status"] == "verified", f"{c['lemma']} on {c['generator']}")


def suite_descent(t: Tally, rng: random.Random, level: str) -> None:
    base = make_bk_prism(DeltaCtx(Zp(2, 3), 1, 4), "2 + t0")
    env = build_coproduct(base, 2)
    mu = Cocharacter([1, 0])
    for k in range(_count(level, 2, 10)):
        X = mat.identity(base.ring, 2) if k == 0 else mat.random_invertible(base.ring, 2, rng)
        prob = setup_deformation(env, BanalDisplay(base, GL(2), mu, X))
        res = lift_descent_isomorphism(prob)
        uniq = check_uniqueness(prob, res["eps"])
        t.check(res["m_eps_is_one"] and res["residual_zero"] and uniq["unique"], f"X trial {k}")


def suite_catalog(t: Tally, rng: random.Random, level: str) -> None:
    from .cli import catalog_files, run_scenario_file
    for path in catalog_files():
        rep = run_scenario_file(path)
        t.check(rep.get("matches_expectation", False), path.name)


SUITES: list = [
    ("delta_axioms", suite_delta_axioms, QUICK),
    ("witt2", suite_witt2, QUICK),
    ("distinguished", suite_distinguished, QUICK),
    ("nondisplayed", suite_nondisplayed, QUICK),
    ("minuscule", suite_minuscule, QUICK),
    ("standard_form", suite_standard_form, QUICK),
    ("window", suite_window, QUICK),
    ("decomposition", suite_decomposition, QUICK),
    ("one_bounded", suite_one_bounded, QUICK),
    ("graded_quotients", suite_graded_quotients, FULL),
    ("kernel_lemmas", suite_kernel_lemmas, FULL),
    ("descent", suite_descent, QUICK),
    ("catalog", suite_catalog, QUICK),
]


def run_suite(name: str, fn: Callable, seed: int, level: str) -> dict:
    t = Tally(name)
    try:
        fn(t, random.Random(f"{seed}:{name}"), level)
    except Exception as exc:  # reported, not raised
        t.check(False, f"exception: {type(exc).__name__}: {exc}")
        t.failures.append(traceback.format_exception_only(type(exc), exc)[-1].strip())
    return t.report()


def selftest(level: str = QUICK, seed: int = 42, only=None) -> dict:
    if level not in (QUICK, FULL):
        raise ValueError(f"unknown level {level!r}")
    chosen = [(n, f) for n, f, lv in SUITES
              if (level == FULL or lv == QUICK) and (only is None or n in only)]
    results = [run_suite(n, f, seed, level) for n, f in chosen]
    # an empty run means a misconfiguration, not success
    ok = bool(results) and all(r["ok"] for r in results)
    return {"level": level, "seed": seed, "suites": results, "status": "verified" if ok else "failed",
            "passed_suites": sum(r["ok"] for r in results), "total_suites": len(results)}
