"""Exact linear algebra over Z/p^N.

Everything here works with row vectors: a matrix ``m`` acts by ``x -> x @ m``
and a module is the row span of its generator matrix.  The central tool is the
Howell normal form, which is the canonical echelon form over Z/p^N whose row
span semantics survive the zero divisors of the ring.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

MAX_MODULUS = 1 << 20


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    k = 2
    while k * k <= p:
        if p % k == 0:
            return False
        k += 1
    return True


@lru_cache(maxsize=64)
def _tables(p: int, N: int):
    """Valuation table, unit part and unit inverse for every residue mod p^N."""
    P = p**N
    val = np.full(P, N, dtype=np.int64)
    unit = np.zeros(P, dtype=np.int64)
    inv = np.zeros(P, dtype=np.int64)
    for a in range(1, P):
        v, b = 0, a
        while b % p == 0:
            b //= p
            v += 1
        val[a] = v
        unit[a] = b
        inv[a] = pow(b, -1, P)
    return val, unit, inv


class ZModMatrix:
    """Dense matrix over Z/p^N with entries kept in [0, p^N)."""

    __slots__ = ("p", "N", "modulus", "a")

    def __init__(self, p: int, N: int, entries):
        if not _is_prime(p) or N < 1:
            raise ValueError(f"modulus must be a prime power p^N with N >= 1, got p={p}, N={N}")
        if p**N > MAX_MODULUS:
            raise ValueError(f"modulus {p}^{N} exceeds the supported bound {MAX_MODULUS}")
        self.p = p
        self.N = N
        self.modulus = p**N
        arr = np.array(entries, dtype=np.int64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
        self.a = arr % self.modulus

    @property
    def rows(self) -> int:
        return self.a.shape[0]

    @property
    def cols(self) -> int:
        return self.a.shape[1]

    def __matmul__(self, other: "ZModMatrix") -> "ZModMatrix":
        return ZModMatrix(self.p, self.N, matmul(self.a, other.a, self.modulus))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ZModMatrix)
            and self.modulus == other.modulus
            and self.a.shape == other.a.shape
            and bool(np.all(self.a == other.a))
        )

    def tolist(self):
        return self.a.tolist()

    def __repr__(self) -> str:
        return f"ZModMatrix(mod {self.modulus}, {self.a.tolist()})"


def matmul(a: np.ndarray, b: np.ndarray, P: int) -> np.ndarray:
    """Matrix product mod P without int64 overflow for P <= 2^20."""
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    # chunk the inner dimension so partial sums stay below 2^63
    step = max(1, (1 << 62) // (P * P))
    for k0 in range(0, a.shape[1], step):
        out = (out + a[:, k0 : k0 + step] @ b[k0 : k0 + step, :]) % P
    return out


def _howell_inplace(a: np.ndarray, p: int, N: int, ncols: Optional[int] = None):
    """Row-reduce ``a`` to Howell form, pivoting only in the first ``ncols`` columns.

    Returns the reduced array (zero rows dropped) and the pivot list.  Columns
    past ``ncols`` are carried along, which is how transforms and kernels are
    tracked.
    """
    P = p**N
    val, unit, inv = _tables(p, N)
    a = a % P
    if ncols is None:
        ncols = a.shape[1]
    rows = [r for r in a if r.any()]
    work = np.array(rows, dtype=np.int64).reshape(len(rows), a.shape[1])
    pivots: list[tuple[int, int]] = []
    r = 0
    for c in range(ncols):
        if r >= work.shape[0]:
            break
        col = work[r:, c]
        nz = np.nonzero(col)[0]
        if nz.size == 0:
            continue
        vals = val[col[nz]]
        k = nz[int(np.argmin(vals))] + r
        v = int(val[work[k, c]])
        if k != r:
            work[[r, k]] = work[[k, r]]
        work[r] = (work[r] * inv[work[r, c]]) % P
        piv = p**v
        below = work[r + 1 :, c]
        if below.any():
            f = below // piv
            work[r + 1 :] = (work[r + 1 :] - np.outer(f, work[r]) % P) % P
        above = work[:r, c]
        if above.any():
            f = above // piv
            work[:r] = (work[:r] - np.outer(f, work[r]) % P) % P
        pivots.append((c, v))
        if v > 0:
            extra = (work[r] * p ** (N - v)) % P
            if extra.any():
                work = np.vstack([work, extra])
        r += 1
        # drop rows that became zero so the pool stays small
        tail = work[r:]
        keep = tail.any(axis=1)
        if not keep.all():
            work = np.vstack([work[:r], tail[keep]])
    return work[:r], pivots, work[r:]


def howell_form(m: ZModMatrix) -> tuple[ZModMatrix, ZModMatrix]:
    """Howell normal form ``h`` of ``m`` together with an invertible ``t``.

    ``m`` is first padded with ``cols`` zero rows so that the extra rows the
    Howell property needs always have a slot; then ``h = t @ m_padded`` with
    ``t`` square and invertible.  Nonzero rows of ``h`` come first.
    """
    p, N, P = m.p, m.N, m.modulus
    R = m.rows + m.cols
    padded = np.zeros((R, m.cols), dtype=np.int64)
    padded[: m.rows] = m.a
    lat = Lattice.from_rows(p, N, padded, m.cols, track=True)
    k = lat.H.shape[0]
    h = np.zeros((R, m.cols), dtype=np.int64)
    h[:k] = lat.H
    kern = [row for row in lat.kernel] if lat.kernel is not None else []
    chosen: list[np.ndarray] = []
    for row in lat.T:
        fixed = _independent_completion(chosen, row, kern, p, P)
        if fixed is None:
            raise ArithmeticError("could not complete the Howell transform")
        chosen.append(fixed)
    for row in kern:
        if len(chosen) == R:
            break
        if _rank_mod_p(np.array(chosen + [row]), p) == len(chosen) + 1:
            chosen.append(row % P)
    t = np.array(chosen, dtype=np.int64).reshape(len(chosen), R)
    assert t.shape == (R, R) and _invertible(t, p, N)
    assert np.array_equal(matmul(t, padded, P), h)
    return ZModMatrix(p, N, h), ZModMatrix(p, N, t)


def _independent_completion(chosen, row, kern, p, P):
    """Adjust ``row`` by a kernel vector so it stays independent mod p."""
    for k in [np.zeros_like(row)] + list(kern):
        cand = (row + k) % P
        if _rank_mod_p(np.array(chosen + [cand]), p) == len(chosen) + 1:
            return cand
    return None


def _rank_mod_p(a: np.ndarray, p: int) -> int:
    return len(_howell_inplace(a % p, p, 1)[1])


def _invertible(a: np.ndarray, p: int, N: int) -> bool:
    return a.shape[0] == a.shape[1] and _rank_mod_p(a, p) == a.shape[0]


@dataclass
class Lattice:
    """Row span of a generator matrix over Z/p^N, held in Howell form.

    With ``track=True`` the reduction also records how each Howell row is
    written in the original generators, which gives membership witnesses and
    the kernel of the generator matrix.
    """

    p: int
    N: int
    dim: int
    H: np.ndarray
    pivots: list
    T: Optional[np.ndarray] = None
    kernel: Optional[np.ndarray] = None
    ngens: int = 0
    _pos: dict = field(default_factory=dict)

    @classmethod
    def from_rows(cls, p: int, N: int, rows, dim: Optional[int] = None, track: bool = False) -> "Lattice":
        P = p**N
        arr = np.array(rows, dtype=np.int64)
        if arr.size == 0:
            d = dim if dim is not None else (arr.shape[1] if arr.ndim == 2 else 0)
            arr = np.zeros((arr.shape[0] if arr.ndim == 2 else 0, d), dtype=np.int64)
        arr = arr.reshape(arr.shape[0], d if arr.size == 0 else -1) % P
        d = arr.shape[1]
        if track:
            g = arr.shape[0]
            aug = np.hstack([arr, np.eye(g, dtype=np.int64)])
            top, piv, rest = _howell_inplace(aug, p, N, d)
            H, T = top[:, :d], top[:, d:]
            ker = _howell_inplace(rest[:, d:], p, N)[0] if rest.shape[0] else np.zeros((0, g), dtype=np.int64)
            lat = cls(p, N, d, H, piv, T, ker, g)
        else:
            top, piv, _ = _howell_inplace(arr, p, N)
            lat = cls(p, N, d, top, piv, None, None, arr.shape[0])
        lat._pos = {c: i for i, (c, _) in enumerate(lat.pivots)}
        return lat

    @property
    def modulus(self) -> int:
        return self.p**self.N

    def reduce(self, v) -> tuple[np.ndarray, np.ndarray]:
        """Canonical residue of ``v`` and the Howell-row coefficients removed."""
        P = self.modulus
        r = np.array(v, dtype=np.int64).reshape(-1) % P
        coef = np.zeros(self.H.shape[0], dtype=np.int64)
        if self.H.shape[0] == 0:
            return r, coef
        for i, (c, vv) in enumerate(self.pivots):
            x = int(r[c])
            if x == 0:
                continue
            piv = self.p**vv
            f = x // piv
            if f:
                coef[i] = f
                r = (r - f * self.H[i]) % P
        return r, coef

    def normal_form(self, v) -> np.ndarray:
        return self.reduce(v)[0]

    def reduce_many(self, vs: np.ndarray) -> np.ndarray:
        """Normal forms of every row of ``vs`` at once."""
        P = self.modulus
        r = np.array(vs, dtype=np.int64) % P
        for i, (c, vv) in enumerate(self.pivots):
            f = r[:, c] // (self.p**vv)
            if f.any():
                r = (r - np.outer(f, self.H[i]) % P) % P
        return r

    def contains(self, v) -> bool:
        return not self.reduce(v)[0].any()

    def contains_all(self, vs) -> bool:
        vs = np.array(vs, dtype=np.int64)
        if vs.size == 0:
            return True
        return not self.reduce_many(vs.reshape(-1, self.dim)).any()

    def witness(self, v) -> Optional[np.ndarray]:
        """Coefficients ``x`` over the original generators with ``x @ gens = v``."""
        if self.T is None:
            raise ValueError("lattice was built without tracking")
        r, coef = self.reduce(v)
        if r.any():
            return None
        return matmul(coef.reshape(1, -1), self.T, self.modulus).reshape(-1)

    def log_size(self) -> int:
        """log_p of the number of elements in the span."""
        return sum(self.N - v for _, v in self.pivots)

    def size(self) -> int:
        return self.p ** self.log_size()

    def rows(self) -> np.ndarray:
        return self.H

    def includes(self, other: "Lattice") -> bool:
        return self.contains_all(other.H)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Lattice):
            return NotImplemented
        return (
            self.modulus == other.modulus
            and self.H.shape == other.H.shape
            and bool(np.all(self.H == other.H))
        )

    def sum(self, other: "Lattice") -> "Lattice":
        return Lattice.from_rows(self.p, self.N, np.vstack([self.H, other.H]), self.dim)


def solve_mod(m: ZModMatrix, b: Sequence[int]):
    """Solve ``x @ m = b``.

    Returns ``(x0, kernel_basis)`` or ``None`` when there is no solution; the
    kernel basis generates every ``y`` with ``y @ m = 0``.
    """
    b = np.array(b, dtype=np.int64).reshape(-1)
    if b.shape[0] != m.cols:
        raise ValueError(f"dimension mismatch: b has length {b.shape[0]}, matrix has {m.cols} columns")
    lat = Lattice.from_rows(m.p, m.N, m.a, m.cols, track=True)
    x0 = lat.witness(b)
    if x0 is None:
        return None
    ker = lat.kernel if lat.kernel is not None else np.zeros((0, m.rows), dtype=np.int64)
    if ker.shape[0] == 0 and m.rows:
        ker = np.zeros((0, m.rows), dtype=np.int64)
    return x0, [row for row in ker]


def kernel(m: ZModMatrix) -> np.ndarray:
    """Generators (as rows) of the left kernel ``{x : x @ m = 0}``."""
    lat = Lattice.from_rows(m.p, m.N, m.a, m.cols, track=True)
    return lat.kernel


def ideal_reduce(gens, v, p: int, N: int):
    """Membership of ``v`` in the Z/p^N-span of ``gens``.

    Returns ``(member, witness, normal_form)``; the normal form is the
    canonical residue against the Howell form of ``gens`` and vanishes exactly
    when ``v`` is a member.
    """
    v = np.array(v, dtype=np.int64).reshape(-1)
    gens = np.array(gens, dtype=np.int64).reshape(-1, v.shape[0]) if len(gens) else np.zeros((0, v.shape[0]), dtype=np.int64)
    lat = Lattice.from_rows(p, N, gens, v.shape[0], track=True)
    nf, _ = lat.reduce(v)
    if nf.any():
        return False, None, nf
    return True, lat.witness(v), nf
