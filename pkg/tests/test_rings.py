import random

import numpy as np
import pytest

from prismkit.rings import (
    DeltaCtx,
    ParseError,
    PrecisionError,
    RingMap,
    ValidationError,
    Witt2Elt,
    Zp,
    axiom_suite,
    delta_e,
    eisenstein,
    frobenius_lift,
    make_coefficient_ring,
    unramified,
    witt2_arith,
    witt2_section,
)


def test_stock_rings():
    R = Zp(2, 4)
    assert R.P == 16 and R.q == 2 and R.e == 1 and R.format(R.pi) == "2"
    E = eisenstein(2, 3)
    assert E.e == 2 and E.Npi == 6
    W = unramified(2, 2, 3)
    assert W.q == 2 and W.f == [1, 1, 1]
    # sigma is an involution on W(F_4)
    assert np.array_equal(W.sigma(W.sigma(W.gen)), W.gen)


def test_validation_failures():
    # sigma(x) = -x moves pi = x, violating delta(pi) = 1 - pi^(q-1)
    with pytest.raises(ValidationError, match="sigma\\(pi\\)"):
        make_coefficient_ring(2, [-2, 0, 1], 3, "x", "-x")
    # q = 4 with sigma(x) = x^2 on F_4 is not the q-power map
    with pytest.raises(ValidationError, match="y\\^4"):
        make_coefficient_ring(2, [1, 1, 1], 3, "p", "x^2", q=4)
    # q = 4 with sigma = id is consistent
    R = make_coefficient_ring(2, [1, 1, 1], 3, "p", "x", q=4)
    assert R.q == 4
    with pytest.raises(ValidationError):
        make_coefficient_ring(2, [1, 1, 1], 3, "p", "x+1")
    with pytest.raises(ValidationError, match="monic"):
        make_coefficient_ring(2, [1, 2], 3)
    with pytest.raises(ValidationError, match="unit multiple"):
        make_coefficient_ring(2, [0, 1], 3, "4")


def test_frobenius_examples():
    A = DeltaCtx(Zp(2, 3), 1, 8)
    t = A.var("t0")
    assert frobenius_lift(t).equals_exactly(t ** 2)
    assert (1 + t).phi().equals_exactly(1 + t ** 2)
    assert (2 * t + t ** 3).phi().equals_exactly(2 * t ** 2 + t ** 6)
    assert (2 * t + t ** 3).phi().ledger == (3, 8)


def test_delta_examples():
    A = DeltaCtx(Zp(2, 4), 1, 4)
    d = delta_e(A.pi)
    assert d == A.parse("1 - 2")
    assert d.ledger == (3, 4)
    assert delta_e(A.var("t0")) == 0
    assert A.parse("2 + t0").delta() == A.parse("-1 - 2*t0")
    # the top digit is not certified
    low = A.from_int(1).with_ledger((1, 4))
    with pytest.raises(PrecisionError):
        low.delta()


def test_delta_pi_identity_all_rings():
    for R in [Zp(2, 4), Zp(3, 3), eisenstein(2, 3), unramified(2, 2, 3), eisenstein(3, 2)]:
        A = DeltaCtx(R, 0, 1)
        assert A.pi.delta() == A.one() - A.pi ** (R.q - 1)


@pytest.mark.parametrize("R,r,M", [(Zp(2, 4), 1, 8), (Zp(3, 3), 2, 5), (eisenstein(2, 3), 1, 4),
                                   (unramified(2, 2, 3), 1, 4)])
def test_phi_ring_hom_and_mod_pi(R, r, M):
    A = DeltaCtx(R, r, M)
    rng = random.Random(5)
    for _ in range(100):
        a, b = A.random(rng), A.random(rng)
        assert (a * b).phi().equals_exactly(a.phi() * b.phi())
        assert (a + b).phi().equals_exactly(a.phi() + b.phi())
        diff = a.phi() - a ** R.q
        assert diff.pi_valuation() >= 1


def test_axiom_suite_acceptance_params():
    assert axiom_suite(DeltaCtx(Zp(2, 4), 1, 8), 200, 1)["passed"]
    assert axiom_suite(DeltaCtx(Zp(3, 3), 2, 5), 200, 2)["passed"]


def test_axiom_suite_zero_pair():
    rep = axiom_suite(DeltaCtx(Zp(2, 4), 1, 8), 1, 0)
    assert rep["passed"] and rep["trials"] == 1


@pytest.mark.parametrize("R", [Zp(2, 3), eisenstein(2, 3), eisenstein(3, 2), unramified(2, 2, 3)])
def test_delta_precision_cost_is_one_digit(R):
    """Compare delta computed at storage N and at N+1 on common lifts."""
    hi = R.with_precision(R.N + 1)
    A_lo, A_hi = DeltaCtx(R, 1, 4), DeltaCtx(hi, 1, 4)
    rng = random.Random(17)
    disagree_top = 0
    for _ in range(60):
        a_hi = A_hi.random(rng)
        a_lo = A_lo.elt(a_hi.arr % R.P)
        d_lo = a_lo.delta()
        d_hi = a_hi.delta()
        d_hi_down = A_lo.elt(d_hi.arr % R.P)
        assert d_lo.ledger[0] == R.Npi - 1
        assert d_lo == d_hi_down
        if not d_lo.equals_exactly(d_hi_down):
            disagree_top += 1
    # the last digit genuinely is lost: some lifts disagree there
    assert disagree_top > 0


def test_witt_examples():
    A = DeltaCtx(Zp(2, 4), 1, 6)
    t = A.var("t0")
    one, zero = A.one(), A.zero()
    a = Witt2Elt(A.parse("1 + t0"), A.parse("3*t0^2"))
    assert Witt2Elt(one, zero) * a == a
    assert (Witt2Elt(t, zero) * Witt2Elt(zero, one)) == Witt2Elt(zero, t ** 2)
    assert witt2_arith("add", Witt2Elt(one, zero), Witt2Elt(-one, zero)) == Witt2Elt(zero, one)
    assert witt2_section(one) == Witt2Elt(one, zero)
    assert witt2_section(A.pi) == Witt2Elt(A.pi, one - A.pi)
    b = A.parse("2 + t0")
    assert witt2_section(t) * witt2_section(b) == witt2_section(t * b)


@pytest.mark.parametrize("R", [Zp(2, 4), eisenstein(2, 3), Zp(3, 3)])
def test_witt_ring_laws(R):
    A = DeltaCtx(R, 1, 5)
    rng = random.Random(8)
    W = lambda: Witt2Elt(A.random(rng), A.random(rng))
    for _ in range(100):
        x, y, z = W(), W(), W()
        assert (x + y) + z == x + (y + z)
        assert (x * y) * z == x * (y * z)
        assert x * (y + z) == x * y + x * z
        assert x + y == y + x and x * y == y * x
        assert x - x == Witt2Elt(A.zero(), A.zero())
        a, b = A.random(rng), A.random(rng)
        assert witt2_section(a) * witt2_section(b) == witt2_section(a * b)
        assert witt2_section(a) + witt2_section(b) == witt2_section(a + b)
        assert witt2_section(a).w0.equals_exactly(a)


def test_ledger_is_min_and_never_raised():
    A = DeltaCtx(Zp(2, 4), 1, 6)
    a = A.parse("1 + t0").with_ledger((2, 6))
    b = A.parse("t0").with_ledger((4, 3))
    assert (a * b).ledger == (2, 3) and (a + b).ledger == (2, 3)
    assert a.phi().ledger == a.ledger
    assert a.delta().ledger == (1, 6)


def test_equality_at_certified_precision():
    A = DeltaCtx(Zp(2, 4), 1, 6)
    a = A.parse("1 + t0").with_ledger((2, 6))
    assert a == A.parse("5 + t0")
    assert not a == A.parse("3 + t0")
    b = A.parse("1 + t0").with_ledger((4, 2))
    assert b == A.parse("1 + t0 + t0^3")


def test_text_round_trip():
    A = DeltaCtx(unramified(2, 2, 3), 2, 4)
    a = A.parse("(3 + 2*x)*t0^2*t1 + x")
    assert str(a) == "x + (3 + 2*x)*t0^2*t1"
    assert A.parse(str(a)).equals_exactly(a)
    rng = random.Random(2)
    for _ in range(20):
        b = A.random(rng)
        assert A.parse(str(b)).equals_exactly(b)
    with pytest.raises(ParseError) as exc:
        A.parse("t0 +* 3")
    assert exc.value.col is not None
    with pytest.raises(ParseError):
        A.parse("t7")


def test_inverse_and_units():
    A = DeltaCtx(eisenstein(2, 3), 2, 4)
    rng = random.Random(4)
    for _ in range(20):
        u = A.random_unit(rng)
        assert (u * u.inverse()).equals_exactly(A.one())
    with pytest.raises(ZeroDivisionError):
        A.parse("x + t0").inverse()


def test_ring_map_and_zero_variables():
    A = DeltaCtx(Zp(2, 3), 1, 4)
    B = DeltaCtx(Zp(2, 3), 2, 4, names=["t0", "s0"])
    f = RingMap(A, B, ["t0 + s0"])
    a = A.parse("1 + 3*t0^2")
    assert f(a) == B.parse("1 + 3*(t0 + s0)^2")
    assert f.commutes_with_phi() is False  # (t+s)^2 != t^2 + s^2
    with pytest.raises(ValidationError):
        RingMap(A, B, ["1"])
    R0 = DeltaCtx(Zp(2, 3), 0, 1)
    assert R0.n_mon == 1 and R0.pi.delta() == R0.from_int(-1)
