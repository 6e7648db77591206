"""Coefficient rings, truncated delta-rings and length-2 Witt vectors.

A coefficient ring ``O`` is ``Z[x]/(f(x), p^N)`` with a chosen uniformizer
``pi`` and a Frobenius ``sigma``.  A :class:`DeltaCtx` is a polynomial ring
over ``O`` in weighted variables, truncated at weighted degree ``M`` and
optionally divided by a relation module.  Its Frobenius is the ring
endomorphism given by ``sigma`` on coefficients and by chosen images of the
variables, and ``delta(a) = (phi(a) - a^q) / pi``.

Everything is flattened to vectors over ``Z/p^N`` (coordinate
``monomial * deg_f + k`` holds the coefficient of ``x^k * monomial``) so that
every ideal question becomes a call into :mod:`prismkit.zlinalg`.
"""

from __future__ import annotations

import ast
import itertools
import random
from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Callable, Optional, Sequence

import numpy as np

from .zlinalg import Lattice, matmul, _is_prime


class PrecisionError(ArithmeticError):
    """An operation would leave no certified digits."""


class ParseError(ValueError):
    """Malformed element text; carries the 1-based column when known."""

    def __init__(self, msg: str, col: Optional[int] = None):
        self.col = col
        super().__init__(msg if col is None else f"{msg} (column {col})")


class ValidationError(ValueError):
    """A ring or prism invariant failed at construction time."""


# ---------------------------------------------------------------------------
# expression parsing shared by coefficient rings and series rings


def _parse_expr(text: str, leaf: Callable[[str], object], const: Callable[[int], object]):
    src = text.strip().replace("^", "**")
    if not src:
        raise ParseError("empty expression", 1)
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse {text!r}", exc.offset) from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return const(node.value)
        if isinstance(node, ast.Name):
            return leaf(node.id)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                    raise ParseError("exponents must be integer literals", node.col_offset + 1)
                if node.right.value < 0:
                    raise ParseError("negative exponents are not supported", node.col_offset + 1)
                return ev(node.left) ** node.right.value
            ops = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b, ast.Mult: lambda a, b: a * b}
            for kind, fn in ops.items():
                if isinstance(node.op, kind):
                    return fn(ev(node.left), ev(node.right))
        raise ParseError(f"unsupported syntax in {text!r}", getattr(node, "col_offset", 0) + 1)

    return ev(tree)


# ---------------------------------------------------------------------------
# coefficient rings


class CoefficientRing:
    """``O = Z[x]/(f, p^N)`` with uniformizer ``pi`` and Frobenius ``sigma``.

    ``N`` is the p-adic storage exponent; the pi-adic precision is
    ``Npi = e * N``.  Elements are integer vectors of length ``deg f``.
    Construction runs every invariant check and raises
    :class:`ValidationError` naming the one that failed.
    """

    def __init__(self, p: int, f: Sequence[int], N: int, pi=None, sigma=None,
                 q: Optional[int] = None, name: str = "", p_over_pi=None):
        if not _is_prime(p):
            raise ValidationError(f"p={p} is not prime")
        f = [int(c) for c in f]
        if not f or f[-1] != 1:
            raise ValidationError("f must be monic (leading coefficient 1)")
        if len(f) < 2:
            raise ValidationError("f must have degree >= 1")
        if N < 1:
            raise ValidationError("precision N must be >= 1")
        self.p, self.N, self.P = p, N, p**N
        if self.P > (1 << 20):
            raise ValidationError(f"p^N = {self.P} exceeds the supported bound 2^20")
        self.f_int = f
        self.f = [c % self.P for c in f]
        self._specs = (pi, sigma, q, name, p_over_pi)
        self._factory = None
        self.n = len(f) - 1
        self.q = p if q is None else q
        self.name = name
        self.zero = np.zeros(self.n, dtype=np.int64)
        self.one = self.from_int(1)
        self.gen = self._gen()
        self.pi = self.one * p % self.P if pi is None else self.element(pi)
        self.sigma_x = self.gen if sigma is None else self.element(sigma)
        self._sigma_powers = self._powers(self.sigma_x)
        self._validate()
        self.p_over_pi = self._p_over_pi(p_over_pi)

    # -- construction helpers
    def _gen(self):
        g = np.zeros(self.n, dtype=np.int64)
        if self.n == 1:
            g[0] = (-self.f[0]) % self.P
        else:
            g[1] = 1
        return g

    def _powers(self, a):
        out = [self.one]
        for _ in range(1, self.n):
            out.append(self.mul(out[-1], a))
        return np.array(out)

    def element(self, spec) -> np.ndarray:
        if isinstance(spec, str):
            return self.parse(spec)
        if isinstance(spec, (int, np.integer)):
            return self.from_int(int(spec))
        arr = np.zeros(self.n, dtype=np.int64)
        vals = np.array(spec, dtype=np.int64).reshape(-1)
        arr[: len(vals)] = vals
        return self.reduce_poly(vals) if len(vals) > self.n else arr % self.P

    def from_int(self, c: int) -> np.ndarray:
        a = np.zeros(self.n, dtype=np.int64)
        a[0] = c % self.P
        return a

    def _validate(self):
        q = self.q
        k = q
        while k % self.p == 0:
            k //= self.p
        if k != 1:
            raise ValidationError(f"q={q} is not a power of p={self.p}")
        if self.eval_f(self.sigma_x).any():
            raise ValidationError("sigma is not a ring endomorphism: f(sigma(x)) != 0")
        if not self.divisible_by_pi(self.pow(self.gen, q) - self.sigma_x):
            raise ValidationError(f"sigma does not reduce to y -> y^{q} modulo pi (checked on x)")
        if not np.array_equal(self.sigma(self.pi), self.pi):
            raise ValidationError("sigma(pi) != pi, so delta(pi) = 1 - pi^(q-1) fails")
        e = self._ramification()
        if e is None:
            raise ValidationError("pi^e is not a unit multiple of p for any e")
        self.e = e
        self.Npi = e * self.N

    @cached_property
    def _pi_lattices(self):
        """``pi^k O`` as lattices, k = 0 .. Npi."""
        out, cur = [], np.eye(self.n, dtype=np.int64)
        for _ in range(self.n * self.N + 2):
            out.append(Lattice.from_rows(self.p, self.N, cur, self.n))
            cur = np.array([self.mul(r, self.pi) for r in cur])
        return out

    def divisible_by_pi(self, a) -> bool:
        return self._pi_lattices[1].contains(np.asarray(a) % self.P)

    def _ramification(self):
        """Smallest e with pi^e = p * unit, or None."""
        pO = Lattice.from_rows(self.p, self.N, self.mult_matrix(self.from_int(self.p)), self.n, track=True)
        pk = self.one
        for e in range(1, self.n * self.N + 1):
            pk = self.mul(pk, self.pi)
            w = pO.witness(pk)
            if w is None:
                continue
            unit = Lattice.from_rows(self.p, self.N, self.mult_matrix(w), self.n).contains(self.one)
            return e if unit else None
        return None

    def _p_over_pi(self, spec):
        if spec is not None:
            z = self.element(spec)
            if not np.array_equal(self.mul(z, self.pi), self.from_int(self.p)):
                raise ValidationError("p_over_pi * pi != p")
            return z
        if np.array_equal(self.pi, self.from_int(self.p)):
            return self.one.copy()
        z = self.div_pi(self.from_int(self.p))
        return z

    # -- arithmetic on single elements and stacks of elements
    def reduce_poly(self, c: np.ndarray) -> np.ndarray:
        """Reduce coefficient arrays (last axis = degree) modulo f and p^N."""
        c = np.array(c, dtype=np.int64) % self.P
        n = self.n
        f = np.array(self.f[:n], dtype=np.int64)
        for d in range(c.shape[-1] - 1, n - 1, -1):
            top = c[..., d].copy()
            if top.any():
                c[..., d - n : d] = (c[..., d - n : d] - np.multiply.outer(top, f)) % self.P
            c[..., d] = 0
        return c[..., :n] if c.shape[-1] >= n else np.concatenate(
            [c, np.zeros(c.shape[:-1] + (n - c.shape[-1],), dtype=np.int64)], axis=-1)

    def mul(self, a, b) -> np.ndarray:
        """Product of elements; broadcasts over leading axes."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        n = self.n
        if n == 1:
            return (a * b) % self.P
        shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        out = np.zeros(shape + (2 * n - 1,), dtype=np.int64)
        for i in range(n):
            for j in range(n):
                out[..., i + j] = (out[..., i + j] + a[..., i] * b[..., j]) % self.P
        return self.reduce_poly(out)

    def pow(self, a, k: int) -> np.ndarray:
        out = self.one.copy()
        base = np.asarray(a) % self.P
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def eval_f(self, a) -> np.ndarray:
        acc = self.zero.copy()
        for c in reversed(self.f):
            acc = (self.mul(acc, a) + self.from_int(c)) % self.P
        return acc

    def sigma(self, a) -> np.ndarray:
        """Frobenius on coefficient vectors (broadcasts over leading axes)."""
        a = np.asarray(a, dtype=np.int64)
        if self.n == 1:
            return a % self.P
        return matmul(a.reshape(-1, self.n), self._sigma_powers, self.P).reshape(a.shape)

    def mult_matrix(self, a) -> np.ndarray:
        """Rows are ``x^k * a``; a row vector ``c`` maps to ``c * a``."""
        return np.array([self.mul(a, r) for r in np.eye(self.n, dtype=np.int64)])

    def valuation(self, a) -> int:
        """pi-adic valuation; ``Npi`` for zero."""
        a = np.asarray(a) % self.P
        if not a.any():
            return self.Npi
        for k in range(1, self.Npi + 1):
            if not self._pi_lattices[k].contains(a):
                return k - 1
        return self.Npi

    def is_unit(self, a) -> bool:
        return not self.divisible_by_pi(a)

    def inv(self, a) -> np.ndarray:
        if not self.is_unit(a):
            raise ZeroDivisionError("not a unit in the coefficient ring")
        lat = Lattice.from_rows(self.p, self.N, self.mult_matrix(a), self.n, track=True)
        return lat.witness(self.one) % self.P

    def div_pi(self, a) -> np.ndarray:
        """Some ``z`` with ``pi * z = a``; unique modulo ``pi^(Npi-1)``."""
        a = np.asarray(a, dtype=np.int64) % self.P
        z = self._div_pi_lattice.witness(a)
        if z is None:
            raise ArithmeticError("element is not divisible by pi")
        return z % self.P

    @cached_property
    def _div_pi_lattice(self):
        return Lattice.from_rows(self.p, self.N, self.mult_matrix(self.pi), self.n, track=True)

    def random(self, rng: random.Random) -> np.ndarray:
        return np.array([rng.randrange(self.P) for _ in range(self.n)], dtype=np.int64)

    # -- text
    def format(self, a) -> str:
        a = np.asarray(a) % self.P
        if self.n == 1:
            return str(int(a[0]))
        terms = []
        for k, c in enumerate(a.tolist()):
            if not c:
                continue
            mon = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            if not mon:
                terms.append(str(c))
            else:
                terms.append(mon if c == 1 else f"{c}*{mon}")
        return " + ".join(terms) if terms else "0"

    def parse(self, text: str) -> np.ndarray:
        def leaf(name):
            if name == "x":
                return _CoeffVal(self, self.gen)
            if name == "pi":
                return _CoeffVal(self, self.pi)
            if name == "p":
                return _CoeffVal(self, self.from_int(self.p))
            raise ParseError(f"unknown symbol {name!r} in coefficient")

        out = _parse_expr(text, leaf, lambda c: _CoeffVal(self, self.from_int(c)))
        return out.v

    def with_precision(self, N: int) -> "CoefficientRing":
        """Same ring at another p-adic storage exponent."""
        if self._factory is not None:
            return self._factory(N)
        pi, sigma, q, name, p_over_pi = self._specs
        return CoefficientRing(self.p, self.f_int, N, pi, sigma, q, name, p_over_pi)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "p": self.p,
            "f": list(self.f),
            "N": self.N,
            "q": self.q,
            "e": self.e,
            "pi": self.format(self.pi),
            "sigma_x": self.format(self.sigma_x),
        }

    def __repr__(self):
        return f"CoefficientRing({self.name or self.f}, p={self.p}, N={self.N}, q={self.q}, e={self.e})"


class _CoeffVal:
    """Tiny arithmetic wrapper used while parsing coefficient text."""

    def __init__(self, ring, v):
        self.r, self.v = ring, np.asarray(v) % ring.P

    def _c(self, o):
        return o if isinstance(o, _CoeffVal) else _CoeffVal(self.r, self.r.from_int(o))

    def __add__(self, o):
        return _CoeffVal(self.r, self.v + self._c(o).v)

    def __sub__(self, o):
        return _CoeffVal(self.r, self.v - self._c(o).v)

    def __mul__(self, o):
        return _CoeffVal(self.r, self.r.mul(self.v, self._c(o).v))

    def __neg__(self):
        return _CoeffVal(self.r, -self.v)

    def __pow__(self, k):
        return _CoeffVal(self.r, self.r.pow(self.v, k))


def Zp(p: int, N: int) -> CoefficientRing:
    """``Z/p^N`` with ``pi = p`` and trivial Frobenius."""
    return CoefficientRing(p, [0, 1], N, name=f"Z{p}")


def _irreducible_mod_p(p: int, d: int) -> list[int]:
    """First monic irreducible polynomial of degree d over F_p (low to high)."""
    def polymod(a, b):
        a = a[:]
        while len(a) >= len(b) and any(a):
            if a[-1] == 0:
                a.pop()
                continue
            c = a[-1]
            shift = len(a) - len(b)
            for i, bc in enumerate(b):
                a[shift + i] = (a[shift + i] - c * bc) % p
            a.pop()
        while a and a[-1] == 0:
            a.pop()
        return a

    for tail in itertools.product(range(p), repeat=d):
        f = list(tail) + [1]
        if f[0] == 0:
            continue
        ok = True
        for k in range(1, d // 2 + 1):
            for low in itertools.product(range(p), repeat=k):
                g = list(low) + [1]
                if not polymod(f, g):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return f
    raise ValueError("no irreducible polynomial found")


def unramified(p: int, d: int, N: int) -> CoefficientRing:
    """``W(F_{p^d})/p^N`` with sigma the Frobenius lift (so q = p)."""
    if d == 1:
        return Zp(p, N)
    f = _irreducible_mod_p(p, d)
    tmp = CoefficientRing(p, f, N, sigma=None, q=p ** d, name="tmp")
    # Hensel-lift x^p to a root of f
    s = tmp.pow(tmp.gen, p)
    df = [(i * c) for i, c in enumerate(f)][1:]
    for _ in range(N + 1):
        fs = tmp.eval_f(s)
        acc = tmp.zero.copy()
        for c in reversed(df):
            acc = (tmp.mul(acc, s) + tmp.from_int(c)) % tmp.P
        s = (s - tmp.mul(fs, tmp.inv(acc))) % tmp.P
    ring = CoefficientRing(p, f, N, sigma=s, q=p, name=f"W(F{p}^{d})")
    ring._factory = lambda N2: unramified(p, d, N2)
    return ring


def eisenstein(p: int, N: int) -> CoefficientRing:
    """``Z_p[pi]/(pi^2 - p)`` at storage exponent N, sigma = id, q = p."""
    return CoefficientRing(p, [-p, 0, 1], N, pi="x", sigma="x", q=p, name=f"Z{p}[sqrt{p}]", p_over_pi="x")


def make_coefficient_ring(p: int, f, N: int, pi_spec="p", sigma_spec="x", q=None) -> CoefficientRing:
    """Validated coefficient ring from polynomial data (``f`` low-to-high)."""
    return CoefficientRing(p, f, N, pi=pi_spec, sigma=sigma_spec, q=q)


# ---------------------------------------------------------------------------
# truncated weighted polynomial rings with Frobenius


def _monomials(weights: Sequence[int], M: int) -> list[tuple[int, ...]]:
    out = []

    def rec(i, prefix, w):
        if i == len(weights):
            out.append(tuple(prefix))
            return
        e = 0
        while w + e * weights[i] < M:
            rec(i + 1, prefix + [e], w + e * weights[i])
            e += 1

    rec(0, [], 0)
    out.sort(key=lambda m: (sum(a * b for a, b in zip(m, weights)), tuple(-x for x in m)))
    return out


class DeltaCtx:
    """Truncated weighted polynomial ring over a coefficient ring, with Frobenius.

    Variables carry positive integer weights and the ring is cut off at
    weighted degree ``M``.  ``phi_images`` gives the Frobenius on variables
    (strings parsed in this ring, default ``v^q``); ``sigma`` acts on
    coefficients.  ``relations`` (elements of the free ring) are divided out;
    their span together with all monomial multiples must be phi-stable.
    """

    def __init__(self, coeff: CoefficientRing, r: int = 1, M: int = 4,
                 names: Optional[Sequence[str]] = None, weights: Optional[Sequence[int]] = None,
                 phi_images: Optional[dict] = None, relations: Optional[Sequence] = None,
                 budget: int = 20000):
        self.coeff = coeff
        self.names = list(names) if names is not None else [f"t{i}" for i in range(r)]
        self.r = len(self.names)
        self.weights = list(weights) if weights is not None else [1] * self.r
        if any(w < 1 for w in self.weights):
            raise ValidationError("variable weights must be positive")
        if M < 1:
            raise ValidationError("truncation M must be >= 1")
        self.M = M
        self.N = coeff.Npi
        self.q = coeff.q
        self.monos = _monomials(self.weights, M)
        self.n_mon = len(self.monos)
        self.dim = self.n_mon * coeff.n
        if self.dim > budget:
            raise MemoryError(f"flattened dimension {self.dim} exceeds budget {budget}")
        self.index = {m: i for i, m in enumerate(self.monos)}
        self.mono_weight = np.array([sum(a * b for a, b in zip(m, self.weights)) for m in self.monos])
        self._build_mult_table()
        self.relations: Optional[Lattice] = None
        self.relation_elts: list = []
        if relations:
            self._set_relations(relations)
        self._phi_spec = dict(phi_images or {})
        self._Phi = None

    # -- tables
    def _build_mult_table(self):
        I, J, K = [], [], []
        for i, a in enumerate(self.monos):
            for j, b in enumerate(self.monos):
                m = tuple(x + y for x, y in zip(a, b))
                k = self.index.get(m)
                if k is not None:
                    I.append(i)
                    J.append(j)
                    K.append(k)
        self._I = np.array(I, dtype=np.int64)
        self._J = np.array(J, dtype=np.int64)
        self._K = np.array(K, dtype=np.int64)

    def _set_relations(self, rels):
        rows = []
        for rel in rels:
            rows.extend(self.ideal_rows(rel))
        self.relation_elts = list(rels)
        self.relations = Lattice.from_rows(self.coeff.p, self.coeff.N, np.array(rows), self.dim)

    def ideal_rows(self, a: "SeriesElt") -> np.ndarray:
        """Flattened ``x^k * monomial * a`` for every basis element (module generators of (a))."""
        n = self.coeff.n
        vec = a.arr
        rows = []
        basis = np.eye(n, dtype=np.int64)
        for mi in range(self.n_mon):
            shifted = self._mono_mul(mi, vec)
            for k in range(n):
                rows.append(self.coeff.mul(shifted, basis[k]).reshape(-1))
        return np.array(rows, dtype=np.int64).reshape(len(rows), self.dim)

    def _mono_mul(self, mi: int, arr: np.ndarray) -> np.ndarray:
        out = np.zeros_like(arr)
        sel = self._I == mi
        np.add.at(out, self._K[sel], arr[self._J[sel]])
        return out % self.coeff.P

    # -- element constructors
    def elt(self, arr, ledger=None) -> "SeriesElt":
        return SeriesElt(self, arr, ledger)

    def zero(self) -> "SeriesElt":
        return SeriesElt(self, np.zeros((self.n_mon, self.coeff.n), dtype=np.int64))

    def one(self) -> "SeriesElt":
        return self.scalar(self.coeff.one)

    def scalar(self, c) -> "SeriesElt":
        arr = np.zeros((self.n_mon, self.coeff.n), dtype=np.int64)
        arr[0] = self.coeff.element(c)
        return SeriesElt(self, arr)

    def from_int(self, c: int) -> "SeriesElt":
        return self.scalar(self.coeff.from_int(c))

    def var(self, name) -> "SeriesElt":
        i = self.names.index(name) if isinstance(name, str) else int(name)
        mono = tuple(1 if j == i else 0 for j in range(self.r))
        arr = np.zeros((self.n_mon, self.coeff.n), dtype=np.int64)
        if mono in self.index:
            arr[self.index[mono]] = self.coeff.one
        return SeriesElt(self, arr)

    def monomial(self, mono) -> "SeriesElt":
        arr = np.zeros((self.n_mon, self.coeff.n), dtype=np.int64)
        if tuple(mono) in self.index:
            arr[self.index[tuple(mono)]] = self.coeff.one
        return SeriesElt(self, arr)

    @property
    def pi(self) -> "SeriesElt":
        return self.scalar(self.coeff.pi)

    def from_vec(self, v, ledger=None) -> "SeriesElt":
        return SeriesElt(self, np.asarray(v, dtype=np.int64).reshape(self.n_mon, self.coeff.n), ledger)

    def random(self, rng: random.Random, ideal_weight: int = 0) -> "SeriesElt":
        """Uniform element; with ``ideal_weight`` only monomials of at least that weight."""
        arr = np.array([[rng.randrange(self.coeff.P) for _ in range(self.coeff.n)] for _ in range(self.n_mon)],
                       dtype=np.int64).reshape(self.n_mon, self.coeff.n)
        arr[self.mono_weight < ideal_weight] = 0
        return SeriesElt(self, arr)

    def random_unit(self, rng: random.Random) -> "SeriesElt":
        while True:
            a = self.random(rng)
            if a.is_unit():
                return a

    # -- Frobenius
    def phi_images(self) -> list["SeriesElt"]:
        out = []
        for name in self.names:
            spec = self._phi_spec.get(name)
            if spec is None:
                out.append(self.var(name) ** self.q)
            elif isinstance(spec, SeriesElt):
                out.append(spec)
            else:
                out.append(self.parse(spec))
        return out

    @property
    def Phi(self) -> np.ndarray:
        """Matrix of phi on flattened vectors (row convention)."""
        if self._Phi is None:
            self._Phi = hom_matrix(self, self, self.phi_images(), sigma=True)
            if self.relations is not None:
                img = matmul(self.relations.H, self._Phi, self.coeff.P)
                if self.relations.reduce_many(img).any():
                    raise ValidationError("relation module is not stable under phi")
        return self._Phi

    # -- ideals
    def ideal(self, gens: Sequence["SeriesElt"], track: bool = False) -> Lattice:
        """The ideal generated by ``gens`` (plus relations) as a flattened lattice."""
        rows = [self.ideal_rows(g) for g in gens]
        if self.relations is not None:
            rows.append(self.relations.H)
        arr = np.vstack(rows) if rows else np.zeros((0, self.dim), dtype=np.int64)
        return Lattice.from_rows(self.coeff.p, self.coeff.N, arr, self.dim, track=track)

    def in_ideal(self, a: "SeriesElt", gens: Sequence["SeriesElt"]):
        """Membership with witness: returns ``[c_1, ..., c_k]`` with ``a = sum c_i g_i`` or None."""
        lat = self.ideal(gens, track=True)
        w = lat.witness(a.vec)
        if w is None:
            return None
        block = self.n_mon * self.coeff.n
        out = []
        for gi in range(len(gens)):
            coef = w[gi * block : (gi + 1) * block]
            out.append(self._combine_rows(coef))
        return out

    def _combine_rows(self, coef: np.ndarray) -> "SeriesElt":
        """Element ``sum coef[mi*n + k] * x^k * monomial_mi``."""
        n = self.coeff.n
        arr = np.zeros((self.n_mon, n), dtype=np.int64)
        for mi in range(self.n_mon):
            c = coef[mi * n : (mi + 1) * n]
            if c.any():
                arr[mi] = (arr[mi] + c) % self.coeff.P
        # coefficients were on the basis x^k, which is exactly a coefficient vector
        return SeriesElt(self, arr)

    def precision_lattice(self, Nc: int, Mc: int) -> Lattice:
        """``pi^Nc A + (weight >= Mc) + relations``; zero test at a ledger."""
        key = (Nc, Mc)
        cache = self.__dict__.setdefault("_prec_cache", {})
        if key not in cache:
            rows = []
            pik = self.coeff.pow(self.coeff.pi, Nc)
            mm = self.coeff.mult_matrix(pik)
            n = self.coeff.n
            for mi in range(self.n_mon):
                if self.mono_weight[mi] >= Mc:
                    for k in range(n):
                        v = np.zeros(self.dim, dtype=np.int64)
                        v[mi * n + k] = 1
                        rows.append(v)
                elif Nc < self.N:
                    for k in range(n):
                        v = np.zeros(self.dim, dtype=np.int64)
                        v[mi * n : (mi + 1) * n] = mm[k]
                        rows.append(v)
            if self.relations is not None:
                rows.extend(self.relations.H)
            arr = np.array(rows, dtype=np.int64).reshape(len(rows), self.dim)
            cache[key] = Lattice.from_rows(self.coeff.p, self.coeff.N, arr, self.dim)
        return cache[key]

    # -- text
    def format_mono(self, m) -> str:
        parts = []
        for name, e in zip(self.names, m):
            if e == 1:
                parts.append(name)
            elif e > 1:
                parts.append(f"{name}^{e}")
        return "*".join(parts)

    def parse(self, text: str) -> "SeriesElt":
        def leaf(name):
            if name in self.names:
                return self.var(name)
            if name == "x" and self.coeff.n > 1:
                return self.scalar(self.coeff.gen)
            if name == "pi":
                return self.pi
            if name == "p":
                return self.from_int(self.coeff.p)
            raise ParseError(f"unknown symbol {name!r}")

        return _parse_expr(text, leaf, self.from_int)

    def describe(self) -> dict:
        return {"coeff": self.coeff.describe(), "vars": list(self.names), "weights": list(self.weights),
                "M": self.M, "n_mon": self.n_mon}

    def __repr__(self):
        return f"DeltaCtx({self.coeff!r}, vars={self.names}, M={self.M})"


def hom_matrix(src: DeltaCtx, dst: DeltaCtx, images: Sequence["SeriesElt"], sigma: bool = False) -> np.ndarray:
    """Flattened matrix of the ring map sending variable i to ``images[i]``.

    With ``sigma`` the coefficients are moved by the Frobenius first.  The
    map must respect the truncation: images of monomials cut off in ``src``
    must vanish in ``dst``; this is checked by testing each variable power
    that first leaves the monomial set.
    """
    cr = src.coeff
    n = cr.n
    imgs = {(0,) * src.r: dst.one()}
    for m in src.monos[1:]:
        i = next(k for k, e in enumerate(m) if e)
        prev = tuple(e - (1 if k == i else 0) for k, e in enumerate(m))
        imgs[m] = imgs[prev] * images[i]
    # boundary monomials must map into the truncation ideal
    for m in src.monos:
        for i in range(src.r):
            nxt = tuple(e + (1 if k == i else 0) for k, e in enumerate(m))
            if nxt not in src.index:
                if not (imgs[m] * images[i]).is_zero():
                    raise ValidationError("ring map does not respect the truncation")
    xs = cr._sigma_powers if sigma else np.eye(n, dtype=np.int64)
    rows = np.zeros((src.dim, dst.dim), dtype=np.int64)
    for mi, m in enumerate(src.monos):
        base = imgs[m].arr
        for k in range(n):
            rows[mi * n + k] = dst.coeff.mul(base, xs[k]).reshape(-1) if n > 1 else (base * xs[k][0] % cr.P).reshape(-1)
    if dst.relations is not None:
        rows = dst.relations.reduce_many(rows)
    return rows


class RingMap:
    """A coefficient-linear ring map between truncated rings, given on variables."""

    def __init__(self, src: DeltaCtx, dst: DeltaCtx, images: Sequence, name: str = ""):
        self.src, self.dst, self.name = src, dst, name
        self.images = [dst.parse(im) if isinstance(im, str) else im for im in images]
        self.matrix = hom_matrix(src, dst, self.images)
        if src.relations is not None:
            img = matmul(src.relations.H, self.matrix, dst.coeff.P)
            if dst.relations is not None:
                img = dst.relations.reduce_many(img)
            if img.any():
                raise ValidationError(f"map {name} does not kill the source relations")

    def __call__(self, a):
        if isinstance(a, list):
            return [self(x) for x in a]
        if isinstance(a, np.ndarray) and a.dtype == object:
            return np.vectorize(self, otypes=[object])(a)
        v = matmul(a.vec.reshape(1, -1), self.matrix, self.dst.coeff.P).reshape(-1)
        Nc, Mc = a.ledger
        return self.dst.from_vec(v, (min(Nc, self.dst.N), min(Mc, self.dst.M)))

    def commutes_with_phi(self) -> bool:
        left = matmul(self.src.Phi, self.matrix, self.src.coeff.P)
        right = matmul(self.matrix, self.dst.Phi, self.src.coeff.P)
        diff = (left - right) % self.src.coeff.P
        if self.dst.relations is not None:
            diff = self.dst.relations.reduce_many(diff)
        return not diff.any()


# ---------------------------------------------------------------------------
# elements


class SeriesElt:
    """Element of a truncated ring with a certified-precision ledger.

    ``ledger = (N_cert, M_cert)``: the value is correct modulo ``pi^N_cert``
    and modulo monomials of weight ``>= M_cert``.
    """

    __slots__ = ("ctx", "arr", "ledger")

    def __init__(self, ctx: DeltaCtx, arr, ledger=None):
        self.ctx = ctx
        arr = np.asarray(arr, dtype=np.int64) % ctx.coeff.P
        if ctx.relations is not None:
            arr = ctx.relations.normal_form(arr.reshape(-1)).reshape(arr.shape)
        self.arr = arr
        self.ledger = tuple(ledger) if ledger is not None else (ctx.N, ctx.M)

    @property
    def vec(self) -> np.ndarray:
        return self.arr.reshape(-1)

    def _lift(self, other):
        if isinstance(other, SeriesElt):
            if other.ctx is not self.ctx:
                raise TypeError("elements live in different rings")
            return other
        if isinstance(other, (int, np.integer)):
            return self.ctx.from_int(int(other))
        return NotImplemented

    def _meet(self, other):
        return (min(self.ledger[0], other.ledger[0]), min(self.ledger[1], other.ledger[1]))

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return SeriesElt(self.ctx, self.arr + other.arr, self._meet(other))

    __radd__ = __add__

    def __neg__(self):
        return SeriesElt(self.ctx, -self.arr, self.ledger)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return SeriesElt(self.ctx, self.arr - other.arr, self._meet(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        ctx = self.ctx
        cr = ctx.coeff
        prod = cr.mul(self.arr[ctx._I], other.arr[ctx._J])
        out = np.zeros_like(self.arr)
        np.add.at(out, ctx._K, prod)
        return SeriesElt(ctx, out, self._meet(other))

    __rmul__ = __mul__

    def scale(self, c) -> "SeriesElt":
        """Multiply by a coefficient-ring element."""
        return SeriesElt(self.ctx, self.ctx.coeff.mul(self.arr, self.ctx.coeff.element(c)), self.ledger)

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = self.ctx.one()
        out.ledger = self.ledger
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def with_ledger(self, ledger) -> "SeriesElt":
        return SeriesElt(self.ctx, self.arr, ledger)

    # -- Frobenius and delta
    def phi(self) -> "SeriesElt":
        v = matmul(self.vec.reshape(1, -1), self.ctx.Phi, self.ctx.coeff.P).reshape(-1)
        return self.ctx.from_vec(v, self.ledger)

    def div_pi(self) -> "SeriesElt":
        """Exact division by pi; costs one pi-digit of certified precision."""
        ctx = self.ctx
        if ctx.relations is None:
            arr = np.array([ctx.coeff.div_pi(row) for row in self.arr]).reshape(self.arr.shape)
        else:
            lat = _pi_division_lattice(ctx)
            w = lat.witness(self.vec)
            if w is None:
                raise ArithmeticError("element is not divisible by pi")
            arr = w[: ctx.dim].reshape(self.arr.shape)
        Nc = self.ledger[0] - 1
        if Nc < 1:
            raise PrecisionError("precision exhausted by division by pi")
        return SeriesElt(ctx, arr, (Nc, self.ledger[1]))

    def delta(self) -> "SeriesElt":
        """``(phi(a) - a^q) / pi``; certified one pi-digit lower."""
        if self.ledger[0] < 2:
            raise PrecisionError("delta needs at least two certified pi-digits")
        return (self.phi() - self ** self.ctx.q).div_pi()

    # -- predicates
    def const(self) -> np.ndarray:
        return self.arr[0]

    def is_unit(self) -> bool:
        return self.ctx.coeff.is_unit(self.arr[0])

    def inverse(self) -> "SeriesElt":
        if not self.is_unit():
            raise ZeroDivisionError("element is not a unit")
        ctx = self.ctx
        b = ctx.scalar(ctx.coeff.inv(self.arr[0]))
        for _ in range(64):
            err = ctx.one() - self * b
            if err.is_zero(exact=True):
                return b.with_ledger(self.ledger)
            b = b + b * err
        raise ArithmeticError("unit inversion did not converge")

    def is_zero(self, exact: bool = False) -> bool:
        """Zero at certified precision (or exactly in the truncated ring)."""
        if exact or self.ledger == (self.ctx.N, self.ctx.M):
            return not self.arr.any()
        return self.ctx.precision_lattice(*self.ledger).contains(self.vec)

    def __eq__(self, other) -> bool:
        other = self._lift(other)
        if other is NotImplemented:
            return False
        return (self - other).is_zero()

    def equals_exactly(self, other) -> bool:
        return np.array_equal(self.arr, self._lift(other).arr)

    __hash__ = None

    def pi_valuation(self) -> int:
        return min((self.ctx.coeff.valuation(r) for r in self.arr), default=self.ctx.N)

    def t_order(self) -> int:
        """Lowest weight carrying a coefficient that is nonzero mod pi (M if none)."""
        cr = self.ctx.coeff
        for mi in range(self.ctx.n_mon):
            if not cr.divisible_by_pi(self.arr[mi]):
                return int(self.ctx.mono_weight[mi])
        return self.ctx.M

    def terms(self):
        for mi, m in enumerate(self.ctx.monos):
            if self.arr[mi].any():
                yield m, self.arr[mi]

    def __str__(self):
        ctx = self.ctx
        cr = ctx.coeff
        parts = []
        for m, c in self.terms():
            cs = cr.format(c)
            ms = ctx.format_mono(m)
            if not ms:
                parts.append(cs)
            elif cs == "1":
                parts.append(ms)
            elif " " in cs:
                parts.append(f"({cs})*{ms}")
            else:
                parts.append(f"{cs}*{ms}")
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"SeriesElt({self}; ledger={self.ledger})"


def _pi_division_lattice(ctx: DeltaCtx) -> Lattice:
    cache = ctx.__dict__.setdefault("_pidiv", None)
    if cache is None:
        rows = ctx.ideal_rows(ctx.pi)
        rel = ctx.relations.H
        arr = np.vstack([rows, rel])
        cache = Lattice.from_rows(ctx.coeff.p, ctx.coeff.N, arr, ctx.dim, track=True)
        ctx.__dict__["_pidiv"] = cache
    return cache


def frobenius_lift(a: SeriesElt) -> SeriesElt:
    return a.phi()


def delta_e(a: SeriesElt) -> SeriesElt:
    return a.delta()


def witt_carry(a: SeriesElt, b: SeriesElt) -> SeriesElt:
    """``(a^q + b^q - (a+b)^q) / pi`` from integer binomials, without dividing."""
    ctx = a.ctx
    q = ctx.q
    p = ctx.coeff.p
    out = ctx.zero().with_ledger(a._meet(b))
    for i in range(1, q):
        c = comb(q, i)
        term = (a ** i) * (b ** (q - i))
        out = out - term.scale(ctx.coeff.mul(ctx.coeff.from_int(c // p), ctx.coeff.p_over_pi))
    return out


# ---------------------------------------------------------------------------
# length-2 Witt vectors


@dataclass
class Witt2Elt:
    """Length-2 pi-typical Witt vector ``(w0, w1)``."""

    w0: SeriesElt
    w1: SeriesElt

    def __add__(self, other: "Witt2Elt") -> "Witt2Elt":
        return Witt2Elt(self.w0 + other.w0, self.w1 + other.w1 + witt_carry(self.w0, other.w0))

    def __neg__(self) -> "Witt2Elt":
        # -(a0, a1) solves (a0, a1) + (-a0, z) = 0
        z = -self.w1 - witt_carry(self.w0, -self.w0)
        return Witt2Elt(-self.w0, z)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "Witt2Elt") -> "Witt2Elt":
        q = self.w0.ctx.q
        pi = self.w0.ctx.pi
        return Witt2Elt(
            self.w0 * other.w0,
            (self.w0 ** q) * other.w1 + (other.w0 ** q) * self.w1 + pi * self.w1 * other.w1,
        )

    def __eq__(self, other) -> bool:
        return self.w0 == other.w0 and self.w1 == other.w1

    def __str__(self):
        return f"({self.w0}, {self.w1})"


def witt2_arith(op: str, a: Witt2Elt, b: Witt2Elt) -> Witt2Elt:
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown Witt operation {op!r}")


def witt2_section(a: SeriesElt) -> Witt2Elt:
    """``s(a) = (a, delta(a))``; a ring map splitting the first projection."""
    return Witt2Elt(a, a.delta())


# ---------------------------------------------------------------------------
# axiom checks


def axiom_suite(ctx: DeltaCtx, trials: int = 200, seed: int = 0) -> dict:
    """Check the product and sum laws of delta on random pairs."""
    rng = random.Random(seed)
    report = {"trials": trials, "product_law": "pass", "sum_law": "pass", "counterexample": None}
    pi = ctx.pi
    q = ctx.q
    for k in range(trials):
        x, y = (ctx.zero(), ctx.zero()) if k == 0 else (ctx.random(rng), ctx.random(rng))
        dx, dy = x.delta(), y.delta()
        lhs = (x * y).delta()
        rhs = (x ** q) * dy + (y ** q) * dx + pi * dx * dy
        if not lhs == rhs:
            report["product_law"] = "fail"
            report["counterexample"] = {"x": str(x), "y": str(y), "law": "product"}
            break
        lhs = (x + y).delta()
        rhs = dx + dy + witt_carry(x, y)
        if not lhs == rhs:
            report["sum_law"] = "fail"
            report["counterexample"] = {"x": str(x), "y": str(y), "law": "sum"}
            break
    report["passed"] = report["product_law"] == "pass" and report["sum_law"] == "pass"
    return report
