import itertools
import random

import numpy as np
import pytest

from prismkit.zlinalg import (
    Lattice,
    ZModMatrix,
    howell_form,
    ideal_reduce,
    kernel,
    matmul,
    solve_mod,
)


def span_bruteforce(rows, P, dim):
    """Every Z/P-combination of ``rows``."""
    out = set()
    rows = [tuple(int(x) % P for x in r) for r in rows]
    for coefs in itertools.product(range(P), repeat=len(rows)):
        v = [0] * dim
        for c, r in zip(coefs, rows):
            for k in range(dim):
                v[k] = (v[k] + c * r[k]) % P
        out.add(tuple(v))
    return out


def random_matrix(rng, P, rows, cols):
    return [[rng.randrange(P) for _ in range(cols)] for _ in range(rows)]


def test_rejects_bad_modulus():
    with pytest.raises(ValueError):
        ZModMatrix(6, 1, [[1]])
    with pytest.raises(ValueError):
        ZModMatrix(2, 0, [[1]])


def test_howell_examples():
    h, t = howell_form(ZModMatrix(2, 2, [[2, 0], [0, 2]]))
    assert h.a[:2].tolist() == [[2, 0], [0, 2]]
    assert not h.a[2:].any()

    h, _ = howell_form(ZModMatrix(2, 2, [[2]]))
    lat = Lattice.from_rows(2, 2, h.a)
    assert lat.contains([2]) and not lat.contains([1])

    h, t = howell_form(ZModMatrix(2, 3, [[3, 1], [1, 3]]))
    assert h.a[0, 0] == 1
    # brute-force span comparison over all 8^2 vectors
    assert span_bruteforce(h.a, 8, 2) == span_bruteforce([[3, 1], [1, 3]], 8, 2)


def test_howell_extra_row():
    # (2,1) mod 4: the span contains (0,2) which needs its own Howell row
    h, t = howell_form(ZModMatrix(2, 2, [[2, 1]]))
    rows = [r for r in h.a.tolist() if any(r)]
    assert rows == [[2, 1], [0, 2]]


@pytest.mark.parametrize("p,N", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (2, 4)])
def test_howell_span_idempotent_canonical(p, N):
    rng = random.Random(p * 100 + N)
    P = p**N
    for _ in range(30):
        r, c = rng.randint(1, 3), rng.randint(1, 3)
        m = ZModMatrix(p, N, random_matrix(rng, P, r, c))
        h, t = howell_form(m)
        padded = np.vstack([m.a, np.zeros((c, c), dtype=np.int64)])
        assert np.array_equal(matmul(t.a, padded, P), h.a)
        if P ** r <= 4096:
            hl = Lattice.from_rows(p, N, h.a)
            inside = {v for v in itertools.product(range(P), repeat=c) if hl.contains(v)}
            assert inside == span_bruteforce(m.a, P, c)
        h2, _ = howell_form(ZModMatrix(p, N, h.a))
        nz = lambda a: a[np.any(a, axis=1)]
        assert np.array_equal(nz(h2.a), nz(h.a))
        # a random invertible recombination spans the same module
        while True:
            u = np.array(random_matrix(rng, P, r, r), dtype=np.int64)
            if round(np.linalg.det(u % p)) % p and int(round(np.linalg.det(u))) % p:
                break
        h3, _ = howell_form(ZModMatrix(p, N, matmul(u, m.a, P)))
        assert np.array_equal(nz(h3.a), nz(h.a))


def test_solve_examples():
    x0, ker = solve_mod(ZModMatrix(2, 3, [[2]]), [4])
    assert (2 * int(x0[0])) % 8 == 4
    assert span_bruteforce(ker, 8, 1) == {(0,), (4,)}
    assert solve_mod(ZModMatrix(2, 3, [[2]]), [1]) is None
    x0, ker = solve_mod(ZModMatrix(2, 2, [[0]]), [0])
    assert int(x0[0]) == 0
    assert span_bruteforce(ker, 4, 1) == {(0,), (1,), (2,), (3,)}
    with pytest.raises(ValueError):
        solve_mod(ZModMatrix(2, 3, [[2, 1]]), [1])


@pytest.mark.parametrize("p,N", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (2, 4)])
def test_solve_matches_exhaustive(p, N):
    rng = random.Random(7 * p + N)
    P = p**N
    for _ in range(25):
        r, c = rng.randint(1, 3), rng.randint(1, 3)
        if P**r > 5000:
            r = 2
        m = np.array(random_matrix(rng, P, r, c), dtype=np.int64)
        b = [rng.randrange(P) for _ in range(c)]
        sols = [x for x in itertools.product(range(P), repeat=r)
                if all(v == w for v, w in zip(matmul(np.array([x]), m, P)[0].tolist(), b))]
        res = solve_mod(ZModMatrix(p, N, m), b)
        if not sols:
            assert res is None
            continue
        x0, ker = res
        assert matmul(x0.reshape(1, -1), m, P)[0].tolist() == b
        homog = {tuple((np.array(s) - x0) % P) for s in sols}
        assert span_bruteforce(ker, P, r) == homog if ker else homog == {(0,) * r}


def test_ideal_reduce_examples():
    member, wit, nf = ideal_reduce([[2, 0], [0, 2]], [2, 2], 2, 2)
    assert member and wit.tolist() == [1, 1] and not nf.any()
    member, wit, nf = ideal_reduce([[2, 1]], [0, 2], 2, 2)
    assert member
    assert ((int(wit[0]) * np.array([2, 1])) % 4).tolist() == [0, 2]
    member, wit, nf = ideal_reduce([[2, 0]], [1, 0], 2, 2)
    assert not member and wit is None and nf.any()


def test_ideal_reduce_matches_span():
    rng = random.Random(3)
    for p, N in [(2, 2), (2, 3), (3, 2)]:
        P = p**N
        for _ in range(20):
            g, c = rng.randint(0, 2), rng.randint(1, 2)
            gens = random_matrix(rng, P, g, c)
            span = span_bruteforce(gens, P, c) if gens else {(0,) * c}
            for v in itertools.product(range(P), repeat=c):
                member, wit, nf = ideal_reduce(gens, v, p, N)
                assert member == (v in span)
                if member and gens:
                    assert matmul(wit.reshape(1, -1), np.array(gens), P)[0].tolist() == list(v)


def test_normal_form_is_canonical():
    # equal cosets give equal normal forms
    rng = random.Random(11)
    gens = [[2, 1, 0], [0, 4, 2]]
    lat = Lattice.from_rows(2, 3, gens)
    span = list(span_bruteforce(gens, 8, 3))
    for _ in range(50):
        v = np.array([rng.randrange(8) for _ in range(3)])
        w = (v + np.array(rng.choice(span))) % 8
        assert np.array_equal(lat.normal_form(v), lat.normal_form(w))


def test_kernel_and_size():
    m = ZModMatrix(2, 3, [[2, 0], [0, 4], [2, 4]])
    ker = kernel(m)
    for row in ker:
        assert not matmul(row.reshape(1, -1), m.a, 8).any()
    lat = Lattice.from_rows(2, 3, m.a)
    assert lat.size() == len(span_bruteforce(m.a, 8, 2))
