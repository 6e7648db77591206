"""Small dense matrices over a truncated ring, and free modules as Z/p^N lattices.

Matrices are lists of rows of ``SeriesElt``.  Vectors of ``A^n`` are columns;
a matrix ``F`` acts as ``x -> F x``.  ``FreeModule`` flattens ``A^n`` to
``(Z/p^N)^(n * dim A)`` so that submodules become ``Lattice`` objects.
"""

from __future__ import annotations

from itertools import permutations
from typing import Sequence

import numpy as np

from .rings import DeltaCtx, SeriesElt
from .zlinalg import Lattice, matmul


def identity(ctx: DeltaCtx, n: int) -> list:
    return [[ctx.one() if i == j else ctx.zero() for j in range(n)] for i in range(n)]


def zeros(ctx: DeltaCtx, n: int, m: int | None = None) -> list:
    return [[ctx.zero() for _ in range(n if m is None else m)] for _ in range(n)]


def diag(entries: Sequence[SeriesElt]) -> list:
    ctx = entries[0].ctx
    n = len(entries)
    return [[entries[i] if i == j else ctx.zero() for j in range(n)] for i in range(n)]


def mul(a: list, b: list) -> list:
    n, m, k = len(a), len(b), len(b[0]) if b else 0
    out = []
    for i in range(n):
        row = []
        for j in range(k):
            s = a[i][0] * b[0][j]
            for l in range(1, m):
                s = s + a[i][l] * b[l][j]
            row.append(s)
        out.append(row)
    return out


def add(a: list, b: list) -> list:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def sub(a: list, b: list) -> list:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def scale(c: SeriesElt, a: list) -> list:
    return [[c * x for x in row] for row in a]


def transpose(a: list) -> list:
    return [list(col) for col in zip(*a)]


def apply(f, a: list) -> list:
    """Apply a ring map (or any callable) entrywise."""
    return [[f(x) for x in row] for row in a]


def phi(a: list) -> list:
    return [[x.phi() for x in row] for row in a]


def column(a: list, j: int) -> list:
    return [row[j] for row in a]


def from_columns(cols: Sequence[Sequence[SeriesElt]]) -> list:
    return [list(r) for r in zip(*cols)]


def det(a: list) -> SeriesElt:
    n = len(a)
    if n == 0:
        raise ValueError("empty matrix")
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    ctx = a[0][0].ctx
    total = ctx.zero()
    for perm in permutations(range(n)):
        sign = 1
        seen = list(perm)
        for i in range(n):
            for j in range(i + 1, n):
                if seen[i] > seen[j]:
                    sign = -sign
        term = a[0][perm[0]]
        for i in range(1, n):
            term = term * a[i][perm[i]]
        total = total + term if sign > 0 else total - term
    return total


def inverse(a: list) -> list:
    """Inverse by Gauss-Jordan with unit pivots (works over a local ring)."""
    n = len(a)
    ctx = a[0][0].ctx
    work = [list(row) + identity(ctx, n)[i] for i, row in enumerate(a)]
    for c in range(n):
        piv = next((r for r in range(c, n) if work[r][c].is_unit()), None)
        if piv is None:
            raise ZeroDivisionError("matrix is not invertible")
        work[c], work[piv] = work[piv], work[c]
        inv = work[c][c].inverse()
        work[c] = [inv * x for x in work[c]]
        for r in range(n):
            if r != c and work[r][c].arr.any():
                f = work[r][c]
                work[r] = [x - f * y for x, y in zip(work[r], work[c])]
    return [row[n:] for row in work]


def is_invertible(a: list) -> bool:
    return det(a).is_unit()


def equals_exactly(a: list, b: list) -> bool:
    return all(x.equals_exactly(y) for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def equals(a: list, b: list) -> bool:
    """Entrywise equality at certified precision."""
    return all(x == y for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def is_identity(a: list) -> bool:
    ctx = a[0][0].ctx
    return equals_exactly(a, identity(ctx, len(a)))


def ledger(a: list) -> tuple:
    entries = [x for row in a for x in row]
    return (min(x.ledger[0] for x in entries), min(x.ledger[1] for x in entries))


def to_strings(a: list) -> list:
    return [[str(x) for x in row] for row in a]


def parse(ctx: DeltaCtx, rows: Sequence[Sequence[str]]) -> list:
    out = [[ctx.parse(str(x)) for x in row] for row in rows]
    if any(len(r) != len(out) for r in out):
        raise ValueError("matrix must be square")
    return out


def random_matrix(ctx: DeltaCtx, n: int, rng) -> list:
    return [[ctx.random(rng) for _ in range(n)] for _ in range(n)]


def random_invertible(ctx: DeltaCtx, n: int, rng) -> list:
    while True:
        a = random_matrix(ctx, n, rng)
        if is_invertible(a):
            return a


def map_ring(f, a: list) -> list:
    return apply(f, a)


class FreeModule:
    """``A^n`` flattened to ``(Z/p^N)^(n dim A)``; block ``i`` holds coordinate ``i``."""

    def __init__(self, ctx: DeltaCtx, n: int):
        self.ctx = ctx
        self.n = n
        self.block = ctx.dim
        self.dim = n * ctx.dim
        self.p = ctx.coeff.p
        self.N = ctx.coeff.N
        self.P = ctx.coeff.P
        rel = ctx.relations
        if rel is not None and rel.H.shape[0]:
            rows = []
            for i in range(n):
                r = np.zeros((rel.H.shape[0], self.dim), dtype=np.int64)
                r[:, i * self.block:(i + 1) * self.block] = rel.H
                rows.append(r)
            self._rel = np.vstack(rows)
        else:
            self._rel = np.zeros((0, self.dim), dtype=np.int64)
        self._mult = {}

    def flatten(self, vec: Sequence[SeriesElt]) -> np.ndarray:
        if not self.n:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([v.vec for v in vec])

    def unflatten(self, arr) -> list:
        arr = np.asarray(arr, dtype=np.int64)
        b = self.block
        return [self.ctx.from_vec(arr[i * b:(i + 1) * b]) for i in range(self.n)]

    def mult(self, a: SeriesElt) -> np.ndarray:
        """Row-convention matrix of multiplication by ``a`` on one coordinate."""
        key = a.vec.tobytes()
        if key not in self._mult:
            self._mult[key] = self.ctx.ideal_rows(a) % self.P
        return self._mult[key]

    def lattice(self, rows, track: bool = False) -> Lattice:
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, self.dim)
        return Lattice.from_rows(self.p, self.N, np.vstack([rows, self._rel]), self.dim, track=track)

    def span_rows(self, vectors) -> np.ndarray:
        out = [np.hstack([self.mult(x) for x in v]) for v in vectors]
        if not out:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.vstack(out)

    def span(self, vectors) -> Lattice:
        """A-submodule generated by the given vectors."""
        return self.lattice(self.span_rows(vectors))

    def whole(self) -> Lattice:
        return self.lattice(np.eye(self.dim, dtype=np.int64))

    def scaled(self, a: SeriesElt) -> Lattice:
        """``a A^n``."""
        ctx = self.ctx
        basis = [[a if i == j else ctx.zero() for i in range(self.n)] for j in range(self.n)]
        return self.span(basis)

    def map_matrix(self, F: list) -> np.ndarray:
        """Row-convention matrix of ``x -> F x``."""
        b = self.block
        out = np.zeros((self.dim, self.dim), dtype=np.int64)
        for i in range(self.n):
            for j in range(self.n):
                out[j * b:(j + 1) * b, i * b:(i + 1) * b] = self.mult(F[i][j])
        return out

    def image(self, F: list) -> Lattice:
        return self.span([column(F, j) for j in range(self.n)])

    def preimage(self, Fm: np.ndarray, target: Lattice) -> Lattice:
        """``{x : x Fm in target}``."""
        rows = np.vstack([Fm % self.P, target.H])
        lat = Lattice.from_rows(self.p, self.N, rows, self.dim, track=True)
        ker = lat.kernel if lat.kernel is not None else np.zeros((0, rows.shape[0]), dtype=np.int64)
        return self.lattice(ker[:, : self.dim] if ker.size else np.zeros((0, self.dim), dtype=np.int64))

    def times(self, lat: Lattice, a: SeriesElt) -> Lattice:
        """``a * lat`` for an A-submodule ``lat``."""
        m = np.zeros((self.dim, self.dim), dtype=np.int64)
        ma = self.mult(a)
        b = self.block
        for i in range(self.n):
            m[i * b:(i + 1) * b, i * b:(i + 1) * b] = ma
        return self.lattice(matmul(lat.H, m, self.P) if lat.H.shape[0] else lat.H)

    def add(self, *lats: Lattice) -> Lattice:
        return self.lattice(np.vstack([l.H for l in lats]))

    def apply(self, F: list, v: Sequence[SeriesElt]) -> list:
        return [sum((F[i][j] * v[j] for j in range(self.n)), self.ctx.zero()) for i in range(self.n)]

    def log_size(self, lat: Lattice) -> int:
        return lat.log_size()

    def solve(self, F: list, v: Sequence[SeriesElt]):
        """Some ``x`` with ``F x = v`` (or None).

        The solution is unique only up to the kernel of ``F``; its ledger is
        lowered until that kernel vanishes at the reported precision.
        """
        gens = self.map_matrix(F)
        lat = Lattice.from_rows(self.p, self.N, np.vstack([gens, self._rel]), self.dim, track=True)
        w = lat.witness(self.flatten(v))
        if w is None:
            return None
        ker = lat.kernel[:, : self.dim] if lat.kernel is not None and lat.kernel.size else None
        start = ledger(F) if self.n else (self.ctx.N, self.ctx.M)
        vl = (min(x.ledger[0] for x in v), min(x.ledger[1] for x in v))
        led = self.certified((min(start[0], vl[0]), min(start[1], vl[1])), ker)
        return [x.with_ledger(led) for x in self.unflatten(w[: self.dim])]

    def certified(self, led, ker) -> tuple:
        """Largest ledger below ``led`` at which every row of ``ker`` vanishes."""
        if ker is None or not ker.size:
            return led
        b = self.block
        blocks = ker.reshape(-1, b)
        Nc, Mc = led
        while Nc >= 1:
            m = Mc
            while m > 0 and not self.ctx.precision_lattice(Nc, m).contains_all(blocks):
                m -= 1
            if m > 0:
                return (Nc, m)
            Nc -= 1
        return (0, 0)
