import random

import pytest

from prismkit import mat
from prismkit.bkmod import Cocharacter
from prismkit.displays import (
    GL,
    BanalDisplay,
    OrthQ,
    act,
    bk_intertwiner,
    change_generator,
    decompose,
    display_to_bk,
    graded_dims,
    graded_quotients,
    in_parabolic,
    in_unipotent,
    lie_weights,
    membership_display_group,
    one_bounded,
    phi_torsor,
    phi_torsor_consistent,
    preserves_filtration,
    random_member,
    reduction_in_parabolic,
    rees_evaluate,
    rees_witness,
    sigma_mu_d,
    verify_iso,
)
from prismkit.prisms import BudgetExceeded, make_bk_prism
from prismkit.rings import DeltaCtx, ValidationError, Zp

MU10 = Cocharacter([1, 0])
MU110 = Cocharacter([1, 1, 0])
MU_O = Cocharacter([1, 0, 0, -1])


@pytest.fixture(scope="module")
def pr():
    return make_bk_prism(DeltaCtx(Zp(2, 3), 1, 4), "2 + t0")


def random_matrix_like_member(pr, mu, rng):
    """Half members, half arbitrary invertible matrices."""
    if rng.random() < 0.5:
        return random_member(GL(mu.n), mu, pr, rng)
    return mat.random_invertible(pr.ring, mu.n, rng)


def test_membership_examples(pr):
    A, E = pr.ring, pr.E
    o, z = A.one(), A.zero()
    assert membership_display_group(GL(2), MU10, pr, mat.identity(A, 2)) is not None
    elt = membership_display_group(GL(2), MU10, pr, [[o, z], [E, o]])
    assert elt is not None and elt.witnesses[(1, 0)] == o
    assert mat.equals(elt.g_conj, [[o, z], [o, o]])
    assert membership_display_group(GL(2), MU10, pr, [[o, z], [o, o]]) is None
    # the upper entry is free
    assert membership_display_group(GL(2), MU10, pr, [[o, o], [z, o]]) is not None
    assert membership_display_group(GL(2), MU10, pr, [[o, o], [o, o]]) is None


@pytest.mark.parametrize("mu", [MU10, MU110, Cocharacter([2, 0]), Cocharacter([2, 1, 0])])
def test_membership_matches_filtration_oracle(pr, mu):
    rng = random.Random(len(mu.weights) + mu.weights[0])
    seen = {True: 0, False: 0}
    for _ in range(50):
        g = random_matrix_like_member(pr, mu, rng)
        flag = membership_display_group(GL(mu.n), mu, pr, g) is not None
        assert flag == preserves_filtration(pr, mu, g)
        seen[flag] += 1
    assert seen[True] and seen[False]


def test_decompose_examples(pr):
    A = pr.ring
    one = mat.identity(A, 2)
    u, p = decompose(GL(2), MU10, pr, membership_display_group(GL(2), MU10, pr, one))
    assert mat.is_identity(u) and mat.is_identity(p)
    rng = random.Random(4)
    for _ in range(10):
        # build from parts, then split
        g = random_member(GL(3), MU110, pr, rng)
        u0, p0 = decompose(GL(3), MU110, pr, membership_display_group(GL(3), MU110, pr, g))
        u, p = decompose(GL(3), MU110, pr, membership_display_group(GL(3), MU110, pr, mat.mul(u0, p0)))
        assert mat.equals_exactly(u, u0) and mat.equals_exactly(p, p0)


def test_decompose_recomposes(pr):
    rng = random.Random(8)
    for _ in range(30):
        g = random_member(GL(3), MU110, pr, rng)
        u, p = decompose(GL(3), MU110, pr, membership_display_group(GL(3), MU110, pr, g))
        assert mat.equals_exactly(mat.mul(u, p), g)
        assert in_unipotent(MU110, u) and in_parabolic(MU110, p)


def test_orthogonal_group(pr):
    rng = random.Random(2)
    desc = OrthQ(4)
    assert lie_weights(desc, MU_O) == [1, 1, 0, 0, -1, -1]
    for _ in range(5):
        g = random_member(desc, MU_O, pr, rng)
        elt = membership_display_group(desc, MU_O, pr, g)
        assert elt is not None
        u, p = decompose(desc, MU_O, pr, elt)
        assert desc.contains(u) and desc.contains(p)
        assert mat.equals_exactly(mat.mul(u, p), g)
    with pytest.raises(ValidationError):
        desc.check_cocharacter(Cocharacter([1, 0, 0, 0]))


def test_one_bounded_gl_oracle():
    rng = random.Random(12)
    for _ in range(50):
        n = rng.randint(1, 4)
        w = sorted((rng.randint(-2, 2) for _ in range(n)), reverse=True)
        mu = Cocharacter(w)
        # oracle: enumerate m_j - m_i directly
        top = max(w[j] - w[i] for i in range(n) for j in range(n))
        assert one_bounded(GL(n), mu) == (top <= 1)
    assert one_bounded(OrthQ(4), MU_O)
    assert not one_bounded(GL(2), Cocharacter([2, 0]))
    assert not one_bounded(GL(4), MU_O)
    assert graded_dims(GL(2), MU10) == {-1: 1, 0: 2, 1: 1}


def test_bb_shadow(pr):
    rng = random.Random(6)
    for mu in (MU10, MU110):
        for _ in range(30):
            g = random_matrix_like_member(pr, mu, rng)
            assert reduction_in_parabolic(pr, mu, g) == (membership_display_group(GL(mu.n), mu, pr, g) is not None)
    # fails without 1-boundedness
    A, E = pr.ring, pr.E
    g = [[A.one(), A.zero()], [E, A.one()]]
    mu = Cocharacter([2, 0])
    assert reduction_in_parabolic(pr, mu, g) and membership_display_group(GL(2), mu, pr, g) is None


def test_act_examples(pr):
    A, E = pr.ring, pr.E
    o, z = A.one(), A.zero()
    d = BanalDisplay(pr, GL(2), MU10, mat.identity(A, 2))
    assert mat.equals_exactly(act(d, mat.identity(A, 2)).X, d.X)
    g = [[o, z], [E, o]]
    s = sigma_mu_d(pr, MU10, g)
    assert mat.equals(s, [[o, z], [o, o]])
    assert mat.equals(act(d, g).X, mat.mul(mat.inverse(g), s))
    assert mat.equals_exactly(change_generator(MU10, d.X, o), d.X)


def test_action_law(pr):
    rng = random.Random(10)
    for mu in (MU10, MU110):
        desc = GL(mu.n)
        for _ in range(15):
            X = mat.random_invertible(pr.ring, mu.n, rng)
            g, h = random_member(desc, mu, pr, rng), random_member(desc, mu, pr, rng)
            d = BanalDisplay(pr, desc, mu, X)
            assert mat.equals(act(act(d, g), h).X, act(d, mat.mul(g, h)).X)


def test_change_generator_equivariance(pr):
    # for d = u d' the map X -> X phi(mu(u)) intertwines the two actions
    A = pr.ring
    rng = random.Random(3)
    u = A.parse("1 + t0")
    pr2 = make_bk_prism(A, pr.E * u.inverse())
    for _ in range(5):
        X = mat.random_invertible(A, 2, rng)
        g = random_member(GL(2), MU10, pr, rng)
        d1 = BanalDisplay(pr, GL(2), MU10, X)
        d2 = BanalDisplay(pr2, GL(2), MU10, change_generator(MU10, X, u))
        assert mat.equals(change_generator(MU10, act(d1, g).X, u), act(d2, g).X)


def test_verify_iso(pr):
    rng = random.Random(5)
    X = mat.random_invertible(pr.ring, 2, rng)
    d = BanalDisplay(pr, GL(2), MU10, X)
    assert verify_iso(d, d, mat.identity(pr.ring, 2))
    g = random_member(GL(2), MU10, pr, rng)
    # X' . g = X with X' = X . g^-1
    d2 = act(d, mat.inverse(g))
    assert verify_iso(d, d2, g)
    d3 = BanalDisplay(pr, GL(2), MU10, mat.random_invertible(pr.ring, 2, rng))
    assert not verify_iso(d, d3, g)


def test_display_to_bk(pr):
    A, E = pr.ring, pr.E
    d = BanalDisplay(pr, GL(2), MU10, mat.identity(A, 2))
    m = display_to_bk(d)
    assert mat.equals_exactly(m.F_num, mat.diag([E, A.one()]))
    num, k = phi_torsor(d)
    assert k == 0 and mat.equals_exactly(num, mat.phi(mat.diag([E, A.one()])))
    rng = random.Random(1)
    X = mat.random_invertible(A, 2, rng)
    assert mat.equals_exactly(display_to_bk(BanalDisplay(pr, GL(2), Cocharacter([0, 0]), X)).F_num, X)
    for mu in (MU10, Cocharacter([0, -1]), Cocharacter([1, -1])):
        dsp = BanalDisplay(pr, GL(2), mu, mat.random_invertible(A, 2, rng))
        assert phi_torsor_consistent(dsp)
        elt = membership_display_group(GL(2), mu, pr, random_member(GL(2), mu, pr, rng))
        assert bk_intertwiner(dsp, elt)["verified"]


def test_rees_witness(pr):
    A, E = pr.ring, pr.E
    o, z = A.one(), A.zero()
    one = membership_display_group(GL(2), MU10, pr, mat.identity(A, 2))
    rec = rees_witness(pr, MU10, one)
    assert all(rec[(i, j)][0] == (o if i == j else z) for i in range(2) for j in range(2))
    assert rec[(1, 0)][1] == 1 and rec[(0, 1)][1] == 0
    a = A.parse("1 + t0")
    elt = membership_display_group(GL(2), MU10, pr, [[o, z], [E * a, o]])
    assert rees_witness(pr, MU10, elt)[(1, 0)][0] == a
    rng = random.Random(7)
    for _ in range(20):
        g = random_member(GL(3), Cocharacter([2, 1, 0]), pr, rng)
        elt = membership_display_group(GL(3), Cocharacter([2, 1, 0]), pr, g)
        assert mat.equals_exactly(rees_evaluate(pr, rees_witness(pr, Cocharacter([2, 1, 0]), elt), 3), g)


def test_graded_quotients_acceptance_point():
    pr = make_bk_prism(DeltaCtx(Zp(2, 2), 1, 2), "2 + t0")
    rep = graded_quotients(GL(2), MU10, pr, 2)
    obs = {r["m"]: r["observed"] for r in rep["pieces"]}
    # enumeration oracle: 4096 members, 256 congruent to 1 mod E, and E^2 = 0
    assert rep["subgroup_sizes"][0] == 4096 and rep["subgroup_sizes"][1] == 256
    assert obs == {0: 16, 1: 256, 2: 1}
    assert rep["all_match"]


def test_graded_quotients_gl1_and_budget():
    pr = make_bk_prism(DeltaCtx(Zp(2, 2), 1, 2), "2 + t0")
    rep = graded_quotients(GL(1), Cocharacter([1]), pr, 3)
    assert [r["observed"] for r in rep["pieces"]] == [2, 4, 1, 1] and rep["all_match"]
    big = make_bk_prism(DeltaCtx(Zp(2, 3), 1, 4), "2 + t0")
    with pytest.raises(BudgetExceeded):
        graded_quotients(GL(2), MU10, big, 1)
