import random

import numpy as np
import pytest

from prismkit.prisms import (
    BadConstantTerm,
    BudgetExceeded,
    build_coproduct,
    divide,
    ideal_pow_membership,
    is_distinguished,
    make_bk_prism,
    verify_kernel_lemmas,
)
from prismkit.rings import DeltaCtx, RingMap, Zp, eisenstein


@pytest.fixture(scope="module")
def base():
    A = DeltaCtx(Zp(2, 3), 1, 4)
    return make_bk_prism(A, "2 + t0")


@pytest.fixture(scope="module")
def env(base):
    return build_coproduct(base, 2)


def test_make_prism_examples():
    A = DeltaCtx(Zp(2, 4), 1, 6)
    pr = make_bk_prism(A, "2 + t0")
    assert pr.E.delta() == A.parse("-1 - 2*t0")
    assert (pr.delta_E_inverse_witness * pr.E.delta()) == A.one()
    assert pr.e_t == 1
    crys = make_bk_prism(DeltaCtx(Zp(2, 4), 0, 1), "2")
    assert crys.e_t is None
    with pytest.raises(BadConstantTerm):
        make_bk_prism(A, "t0")
    with pytest.raises(BadConstantTerm):
        make_bk_prism(A, "4 + t0")


def test_is_distinguished_examples():
    A = DeltaCtx(Zp(2, 4), 1, 6)
    assert is_distinguished(A.parse("2 + t0")) == (True, True)
    assert is_distinguished(A.parse("2")) == (True, True)
    assert is_distinguished(A.parse("t0")) == (False, False)
    assert is_distinguished(A.parse("(2 + t0)^2")) == (False, False)


def test_distinguished_agreement_random():
    # on radical elements the unit test and the membership test agree
    A = DeltaCtx(Zp(2, 4), 1, 5)
    rng = random.Random(9)
    for _ in range(40):
        d = A.random(rng)
        d = d - A.scalar(d.const()) + A.from_int(2 * rng.randrange(8))
        flag, equiv = is_distinguished(d)
        assert flag == equiv


def test_ideal_pow_membership_examples():
    A = DeltaCtx(Zp(2, 3), 1, 4)
    pr = make_bk_prism(A, "2 + t0")
    member, qt = ideal_pow_membership(pr, pr.E * A.var("t0"), 1)
    assert member and (qt * pr.E).equals_exactly(pr.E * A.var("t0"))
    assert qt == A.var("t0")
    assert ideal_pow_membership(pr, A.var("t0"), 1) == (False, None)
    member, qt = ideal_pow_membership(pr, A.zero(), 5)
    assert member and not qt.arr.any()


def test_quotient_ledger_is_honest():
    A = DeltaCtx(Zp(2, 3), 1, 4)
    pr = make_bk_prism(A, "2 + t0")
    member, qt = ideal_pow_membership(pr, pr.E * A.var("t0"), 1)
    # every other quotient differs from qt by an annihilator of E,
    # and all of them agree at the reported ledger
    P = 8
    for a0 in range(P):
        for a1 in range(P):
            for a2 in range(P):
                for a3 in range(P):
                    c = A.elt([[a0], [a1], [a2], [a3]])
                    if (c * pr.E).equals_exactly(pr.E * A.var("t0")):
                        assert c.with_ledger(qt.ledger) == qt
    # the unsound (1, e_t) rule would claim more than this
    assert qt.ledger[1] < A.M - 1 or qt.ledger[0] < A.N - 1


def test_soundness_of_quotients():
    A = DeltaCtx(Zp(2, 3), 1, 5)
    pr = make_bk_prism(A, "2 + t0")
    rng = random.Random(1)
    for k in (1, 2):
        for _ in range(20):
            a = A.random(rng)
            member, qt = ideal_pow_membership(pr, a, k)
            if member:
                assert (qt * pr.E ** k).equals_exactly(a)
            a = A.random(rng) * pr.E ** k
            member, qt = ideal_pow_membership(pr, a, k)
            assert member and (qt * pr.E ** k).equals_exactly(a)


def test_rigidity_of_prism_maps():
    # the Frobenius twist t -> t maps E to itself; a unit change of generator
    A = DeltaCtx(Zp(2, 3), 1, 4)
    pr = make_bk_prism(A, "2 + t0")
    f = RingMap(A, A, ["t0"])
    assert (f(pr.E) == pr.E)
    E2 = pr.E * A.parse("1 + t0")
    pr2 = make_bk_prism(A, E2)
    unit = divide(f(pr.E), pr2.E)
    assert unit is not None and unit.is_unit()


def test_coproduct_structure(base, env):
    B = env.ring
    A = base.ring
    t = A.var("t0")
    a = A.parse("1 + t0")
    assert env.m(env.p1(a)) == a
    assert env.m(env.p2(a)) == a
    assert env.p2(t) - env.p1(t) == B.var("x0")
    assert B.var("x0") == env.d1 * B.var("y0_0")
    for y in env.K_gens:
        assert not env.m(y).arr.any()
    assert env.in_K(env.d2 - env.d1)
    assert env.d1 == env.u * env.d2
    assert env.m(env.u) == A.one()
    assert env.p1.commutes_with_phi() and env.p2.commutes_with_phi() and env.m.commutes_with_phi()


def test_relation_delta_identity(base):
    # phi(g) - g^q = pi * delta(g) for g = E*Y0 - x, checked in the free ring
    env = build_coproduct(base, 1)
    g0, g1 = env.relation_gens[0], env.relation_gens[1]
    free = g0.ctx
    assert (g0.phi() - g0 ** 2) == free.pi * g1


def test_kernel_is_generated_by_y(env):
    B = env.ring
    A = env.base.ring
    # kernel of m computed directly equals the ideal (Y)
    rows = np.eye(B.dim, dtype=np.int64)
    img = rows @ env.m.matrix % B.coeff.P
    from prismkit.zlinalg import Lattice
    aug = Lattice.from_rows(2, 3, np.vstack([img.T]).T, A.dim, track=True)
    ker = [B.from_vec(k[: B.dim]) for k in aug.kernel]
    KL = env.K_lattice()
    assert all(KL.contains(k.vec) for k in ker)


def test_kernel_lemmas_acceptance_point(env):
    rep = verify_kernel_lemmas(env)
    assert rep["all_verified"]
    lemmas = {c["lemma"] for c in rep["checks"]}
    assert "phi(K) in dM + d(pi,d)K" in lemmas and "phi(M) in d(t)M + d(pi,d)K" in lemmas


def test_depth_saturation(base):
    # at M = 4, q = 2 the weight cut-off stops at Y level 1, so D = 2 and 3 agree
    e2, e3 = build_coproduct(base, 2), build_coproduct(base, 3)
    assert e2.ring.names == e3.ring.names
    assert e2.ring.relations == e3.ring.relations


def test_depth_cap_is_inconclusive():
    A = DeltaCtx(Zp(2, 3), 1, 5)
    pr = make_bk_prism(A, "2 + t0")
    rep = verify_kernel_lemmas(build_coproduct(pr, 1))
    assert not rep["all_verified"]
    assert {c["status"] for c in rep["checks"]} == {"inconclusive"}
    assert verify_kernel_lemmas(build_coproduct(pr, 2))["all_verified"]


@pytest.mark.parametrize("coeff,E,r,M", [(Zp(3, 3), "3 + t0", 1, 4), (eisenstein(2, 2), "x + t0", 1, 4),
                                         (Zp(2, 3), "2 + t0 + t1", 2, 3), (Zp(2, 3), "2", 1, 4)])
def test_kernel_lemmas_other_prisms(coeff, E, r, M):
    pr = make_bk_prism(DeltaCtx(coeff, r, M), E)
    assert verify_kernel_lemmas(build_coproduct(pr, 2))["all_verified"]


def test_budget(base):
    with pytest.raises(BudgetExceeded):
        build_coproduct(base, 2, budget=10)
