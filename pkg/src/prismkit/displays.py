"""Display groups and banal displays.

For a cocharacter ``mu`` with weights ``m_1 >= ... >= m_n`` the display group
is ``G_mu = {g in G(A) : mu(E) g mu(E)^-1 in G(A)}``.  Entry ``(i, j)`` of
``mu(E) g mu(E)^-1`` is ``E^(m_i - m_j) g_ij``, so the constrained entries are
those below the diagonal blocks (``m_i < m_j``), which must be divisible by
``E^(m_j - m_i)``.  ``E_ij`` has weight ``m_j - m_i`` under
``g -> mu(t)^-1 g mu(t)``; ``U^-`` is the block lower unipotent part (positive
weights) and ``P_mu`` the block upper part (weights <= 0).

A banal display is a matrix ``X``; ``g`` acts by ``X.g = g^-1 X sigma(g)`` with
``sigma(g) = phi(mu(E) g mu(E)^-1)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import mat
from .bkmod import BKModule, Cocharacter, fil_mu, is_orthogonal, isomorphic_via, make_banal_bk
from .mat import FreeModule
from .prisms import BudgetExceeded, PrismCtx, ideal_pow_membership
from .rings import SeriesElt, ValidationError
from .zlinalg import Lattice


# ---------------------------------------------------------------------------
# groups


@dataclass(frozen=True)
class GroupDescriptor:
    """``GL_n`` or the split orthogonal group of ``Q(a) = sum a_i a_(n+1-i)``."""

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in ("GL", "OrthQ"):
            raise ValidationError(f"unknown group kind {self.kind!r}")
        if self.n < 1 or (self.kind == "OrthQ" and self.n % 2):
            raise ValidationError(f"bad rank {self.n} for {self.kind}")

    def __str__(self):
        return f"{self.kind}({self.n})"

    def contains(self, g: list) -> bool:
        if len(g) != self.n or not mat.is_invertible(g):
            return False
        return self.kind == "GL" or is_orthogonal(g)

    def lie_basis(self) -> list:
        """Basis of ``Lie(G)`` as lists of ``((row, col), coefficient)``."""
        n = self.n
        if self.kind == "GL":
            return [[((i, j), 1)] for i in range(n) for j in range(n)]
        # X = J S for S = E_ij - E_ji skew
        return [[((n - 1 - i, j), 1), ((n - 1 - j, i), -1)] for i in range(n) for j in range(i + 1, n)]

    def check_cocharacter(self, mu: Cocharacter) -> None:
        if mu.n != self.n:
            raise ValidationError(f"cocharacter {mu} has the wrong size for {self}")
        if self.kind == "OrthQ":
            w = mu.weights
            if any(w[i] + w[self.n - 1 - i] for i in range(self.n)):
                raise ValidationError(f"cocharacter {mu} does not land in the orthogonal group")


def GL(n: int) -> GroupDescriptor:
    return GroupDescriptor("GL", n)


def OrthQ(n: int) -> GroupDescriptor:
    return GroupDescriptor("OrthQ", n)


def lie_weights(desc: GroupDescriptor, mu: Cocharacter) -> list:
    """Weight of every Lie basis vector under ``Ad(mu(t)^-1)``."""
    desc.check_cocharacter(mu)
    w = mu.weights
    out = []
    for vec in desc.lie_basis():
        ws = {w[b] - w[a] for (a, b), _ in vec}
        if len(ws) != 1:
            raise ArithmeticError("Lie basis vector is not a weight vector")
        out.append(ws.pop())
    return out


def one_bounded(desc: GroupDescriptor, mu: Cocharacter) -> bool:
    """No Lie weight ``>= 2``."""
    return max(lie_weights(desc, mu)) <= 1


def graded_dims(desc: GroupDescriptor, mu: Cocharacter) -> dict:
    out = {}
    for w in lie_weights(desc, mu):
        out[w] = out.get(w, 0) + 1
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# membership


@dataclass
class DisplayGroupElt:
    """A member ``g`` with ``g_conj = mu(E) g mu(E)^-1`` and the division witnesses."""

    g: list
    g_conj: list
    witnesses: dict = field(default_factory=dict)


def required_power(mu: Cocharacter, i: int, j: int) -> int:
    return max(0, mu.weights[j] - mu.weights[i])


def conjugate_up(pr: PrismCtx, mu: Cocharacter, g: list) -> Optional[tuple]:
    """``(mu(E) g mu(E)^-1, witnesses)`` if it is integral, else None."""
    n = mu.n
    out, wit = [], {}
    for i in range(n):
        row = []
        for j in range(n):
            e = mu.weights[i] - mu.weights[j]
            if e >= 0:
                row.append(g[i][j] * pr.E ** e)
            else:
                member, q = ideal_pow_membership(pr, g[i][j], -e)
                if not member:
                    return None
                wit[(i, j)] = q
                row.append(q)
        out.append(row)
    return out, wit


def membership_display_group(desc: GroupDescriptor, mu: Cocharacter, pr: PrismCtx, g: list) -> Optional[DisplayGroupElt]:
    """``g`` as a display-group element, or None."""
    desc.check_cocharacter(mu)
    if not desc.contains(g):
        return None
    up = conjugate_up(pr, mu, g)
    if up is None:
        return None
    conj, wit = up
    return DisplayGroupElt(g, conj, wit)


def preserves_filtration(pr: PrismCtx, mu: Cocharacter, g: list) -> bool:
    """Definitional test for ``GL_n``: ``g(Fil^i_mu) = Fil^i_mu`` at the jump levels.

    Levels in ``(m_n, m_1]`` carry all the constraints; at higher levels the
    truncation makes ``E`` a zero divisor and the test would see junk.
    """
    if not mat.is_invertible(g):
        return False
    mod = FreeModule(pr.ring, mu.n)
    ginv = mat.inverse(g)
    w = mu.weights
    for i in range(w[-1] + 1, w[0] + 1):
        basis = fil_mu(pr, mu, i)
        fil = mod.span(basis)
        for h in (g, ginv):
            if not fil.includes(mod.span([mod.apply(h, v) for v in basis])):
                return False
    return True


def reduction_in_parabolic(pr: PrismCtx, mu: Cocharacter, g: list) -> bool:
    """Does ``g mod E`` lie in ``P_mu(A/E)`` (positive-weight entries in ``(E)``)?"""
    n = mu.n
    return mat.is_invertible(g) and all(
        ideal_pow_membership(pr, g[i][j], 1)[0]
        for i in range(n) for j in range(n) if required_power(mu, i, j) > 0)


# ---------------------------------------------------------------------------
# decomposition


def _blocks(mu: Cocharacter) -> list:
    out = []
    for lvl in mu.levels():
        out.append([k for k, m in enumerate(mu.weights) if m == lvl])
    return out


def _sub(a: list, rows, cols) -> list:
    return [[a[r][c] for c in cols] for r in rows]


def _put(a: list, rows, cols, b: list) -> None:
    for x, r in enumerate(rows):
        for y, c in enumerate(cols):
            a[r][c] = b[x][y]


def decompose(desc: GroupDescriptor, mu: Cocharacter, pr: PrismCtx, elt: DisplayGroupElt) -> tuple:
    """``g = u p`` with ``u`` block lower unipotent and ``p`` block upper (block LU)."""
    g = elt.g
    ctx = pr.ring
    n = mu.n
    bl = _blocks(mu)
    u = mat.identity(ctx, n)
    p = mat.zeros(ctx, n)
    for k, Bk in enumerate(bl):
        for l in range(k, len(bl)):
            Bl = bl[l]
            acc = _sub(g, Bk, Bl)
            for s in range(k):
                acc = mat.sub(acc, mat.mul(_sub(u, Bk, bl[s]), _sub(p, bl[s], Bl)))
            _put(p, Bk, Bl, acc)
        try:
            pinv = mat.inverse(_sub(p, Bk, Bk))
        except ZeroDivisionError:
            raise ArithmeticError("diagonal block is not invertible; g is not in the display group")
        for l in range(k + 1, len(bl)):
            Bl = bl[l]
            acc = _sub(g, Bl, Bk)
            for s in range(k):
                acc = mat.sub(acc, mat.mul(_sub(u, Bl, bl[s]), _sub(p, bl[s], Bk)))
            _put(u, Bl, Bk, mat.mul(acc, pinv))
    if membership_display_group(desc, mu, pr, u) is None:
        raise ArithmeticError("unipotent factor is not in the display group")
    return u, p


def in_parabolic(mu: Cocharacter, p: list) -> bool:
    n = mu.n
    return mat.is_invertible(p) and all(
        not p[i][j].arr.any() for i in range(n) for j in range(n) if mu.weights[i] < mu.weights[j])


def in_unipotent(mu: Cocharacter, u: list) -> bool:
    n = mu.n
    for i in range(n):
        for j in range(n):
            if mu.weights[i] == mu.weights[j]:
                want = 1 if i == j else 0
                if not (u[i][j] - u[i][j].ctx.from_int(want)).is_zero():
                    return False
            elif mu.weights[i] > mu.weights[j] and u[i][j].arr.any():
                return False
    return True


def random_member(desc: GroupDescriptor, mu: Cocharacter, pr: PrismCtx, rng) -> list:
    """A random element of ``G_mu``."""
    desc.check_cocharacter(mu)
    ctx = pr.ring
    n = mu.n
    if desc.kind == "GL":
        u = mat.identity(ctx, n)
        p = mat.zeros(ctx, n)
        for i in range(n):
            for j in range(n):
                if mu.weights[i] < mu.weights[j]:
                    u[i][j] = ctx.random(rng) * pr.E ** required_power(mu, i, j)
                else:
                    p[i][j] = ctx.random(rng)
        for B in _blocks(mu):
            while not mat.is_invertible(_sub(p, B, B)):
                for i in B:
                    for j in B:
                        p[i][j] = ctx.random(rng)
        return mat.mul(u, p)
    # torus
    units = [ctx.random_unit(rng) for _ in range(n // 2)]
    diag = units + [x.inverse() for x in reversed(units)]
    g = mat.diag(diag)
    w = lie_weights(desc, mu)
    for vec, wt in zip(desc.lie_basis(), w):
        if len(vec) < 2 or vec[0][0][0] == vec[0][0][1]:
            continue
        a = ctx.random(rng) * pr.E ** max(0, wt)
        root = mat.identity(ctx, n)
        for (r, c), s in vec:
            root[r][c] = root[r][c] + (a if s > 0 else -a)
        g = mat.mul(g, root)
    return g


# ---------------------------------------------------------------------------
# banal displays


@dataclass
class BanalDisplay:
    prism: PrismCtx
    group: GroupDescriptor
    mu: Cocharacter
    X: list

    def __post_init__(self):
        self.group.check_cocharacter(self.mu)
        if not self.group.contains(self.X):
            raise ValidationError(f"X is not in {self.group}(A)")

    def to_dict(self) -> dict:
        return {"group": str(self.group), "mu": list(self.mu.weights), "X": mat.to_strings(self.X)}


def sigma_mu_d(pr: PrismCtx, mu: Cocharacter, g: list) -> list:
    """``phi(mu(d) g mu(d)^-1)`` for ``d`` the orientation of ``pr``."""
    up = conjugate_up(pr, mu, g)
    if up is None:
        raise ValidationError("g is not in the display group")
    return mat.phi(up[0])


def act_matrix(pr: PrismCtx, mu: Cocharacter, X: list, g: list) -> list:
    return mat.mul(mat.mul(mat.inverse(g), X), sigma_mu_d(pr, mu, g))


def act(dsp: BanalDisplay, g) -> BanalDisplay:
    """``X.g = g^-1 X sigma(g)``."""
    gm = g.g if isinstance(g, DisplayGroupElt) else g
    return BanalDisplay(dsp.prism, dsp.group, dsp.mu, act_matrix(dsp.prism, dsp.mu, dsp.X, gm))


def change_generator(mu: Cocharacter, X: list, u: SeriesElt) -> list:
    """Representative for ``d' = u^-1 d``: ``X -> X phi(mu(u))``."""
    return mat.mul(X, mat.phi(mu.mu_of(u)))


def verify_iso(dsp1: BanalDisplay, dsp2: BanalDisplay, g) -> bool:
    """Is ``g`` an isomorphism ``dsp1 -> dsp2``, i.e. ``X2.g = X1``?"""
    gm = g.g if isinstance(g, DisplayGroupElt) else g
    if membership_display_group(dsp1.group, dsp1.mu, dsp1.prism, gm) is None:
        return False
    return mat.equals(act_matrix(dsp2.prism, dsp2.mu, dsp2.X, gm), dsp1.X)


def display_to_bk(dsp: BanalDisplay) -> BKModule:
    return make_banal_bk(dsp.prism, dsp.mu, dsp.X)


def phi_torsor(dsp: BanalDisplay) -> tuple:
    """``X_phi = X phi(mu(E))`` as ``(numerator, k)`` meaning ``numerator / phi(E)^k``."""
    w = dsp.mu.weights
    base = min(w[-1], 0)
    pE = dsp.prism.E.phi()
    return mat.mul(dsp.X, mat.diag([pE ** (m - base) for m in w])), -base


def phi_torsor_consistent(dsp: BanalDisplay) -> bool:
    """``phi^*`` of the BK module is ``X_phi`` after the change of basis ``X^-1``.

    ``X phi(F) phi(X)^-1 = X_phi`` with ``F = mu(E) X``, compared with matching
    powers of ``phi(E)`` cleared.
    """
    m = display_to_bk(dsp)
    num, k = phi_torsor(dsp)
    lhs = mat.mul(mat.mul(dsp.X, mat.phi(m.F_num)), mat.inverse(mat.phi(dsp.X)))
    pE = dsp.prism.E.phi()
    if m.denom_k > k:
        num = mat.scale(pE ** (m.denom_k - k), num)
    elif k > m.denom_k:
        lhs = mat.scale(pE ** (k - m.denom_k), lhs)
    return mat.equals(lhs, num)


def bk_intertwiner(dsp: BanalDisplay, g: DisplayGroupElt) -> dict:
    """``mu(E) g mu(E)^-1`` is an isomorphism from the module of ``X.g`` to that of ``X``."""
    m1 = display_to_bk(dsp)
    m2 = display_to_bk(act(dsp, g))
    return {"h": g.g_conj, "verified": isomorphic_via(m1, m2, g.g_conj)}


# ---------------------------------------------------------------------------
# Rees coordinates


def rees_witness(pr: PrismCtx, mu: Cocharacter, elt: DisplayGroupElt) -> dict:
    """``g_ij = E^(w_ij) b_ij`` with ``w_ij`` the required power at each slot."""
    n = mu.n
    out = {}
    for i in range(n):
        for j in range(n):
            w = required_power(mu, i, j)
            b = elt.witnesses[(i, j)] if w else elt.g[i][j]
            out[(i, j)] = (b, w)
    return out


def rees_evaluate(pr: PrismCtx, record: dict, n: int) -> list:
    return [[record[(i, j)][0] * pr.E ** record[(i, j)][1] for j in range(n)] for i in range(n)]


# ---------------------------------------------------------------------------
# congruence filtration by enumeration


class FiniteRing:
    """Element tables of a small truncated ring."""

    def __init__(self, ctx, budget: int = 4096):
        P = ctx.coeff.P
        size = P ** ctx.dim
        if size > budget:
            raise BudgetExceeded(f"ring has {size} elements; budget is {budget}")
        if ctx.relations is not None and ctx.relations.H.shape[0]:
            raise ValidationError("enumeration needs a ring without relations")
        self.ctx = ctx
        vecs = np.array(list(itertools.product(range(P), repeat=ctx.dim)), dtype=np.int64)
        self.elts = [ctx.from_vec(v) for v in vecs]
        self.size = size
        self._index = {v.tobytes(): k for k, v in enumerate(vecs)}
        self.mul = np.array([[self.index(a * b) for b in self.elts] for a in self.elts], dtype=np.int64)
        self.add = np.array([[self.index(a + b) for b in self.elts] for a in self.elts], dtype=np.int64)
        self.neg = np.array([self.index(-a) for a in self.elts], dtype=np.int64)
        self.unit = np.array([a.is_unit() for a in self.elts])

    def index(self, a: SeriesElt) -> int:
        return self._index[(a.vec % self.ctx.coeff.P).astype(np.int64).tobytes()]

    def ideal_mask(self, gens: list) -> np.ndarray:
        lat = Lattice.from_rows(self.ctx.coeff.p, self.ctx.coeff.N,
                                np.vstack([self.ctx.ideal_rows(g) for g in gens]) if gens else
                                np.zeros((0, self.ctx.dim), dtype=np.int64), self.ctx.dim)
        return np.array([lat.contains(a.vec) for a in self.elts])

    def det(self, entries: np.ndarray, n: int) -> np.ndarray:
        """Determinants of many ``n x n`` matrices given as index arrays ``(count, n*n)``."""
        total = None
        for perm in itertools.permutations(range(n)):
            sign = 1
            for a in range(n):
                for b in range(a + 1, n):
                    if perm[a] > perm[b]:
                        sign = -sign
            term = entries[:, perm[0]]
            for r in range(1, n):
                term = self.mul[term, entries[:, r * n + perm[r]]]
            if sign < 0:
                term = self.neg[term]
            total = term if total is None else self.add[total, term]
        return total


def graded_quotients(desc: GroupDescriptor, mu: Cocharacter, pr: PrismCtx, m_max: int,
                     budget: int = 200000) -> dict:
    """Brute-force ``|G^{>=m}_mu / G^{>=m+1}_mu|`` against the structural formula."""
    if desc.kind != "GL":
        raise ValidationError("enumeration is implemented for GL_n")
    desc.check_cocharacter(mu)
    n = desc.n
    count = (pr.ring.coeff.P ** pr.ring.dim) ** (n * n)
    if count > budget:
        raise BudgetExceeded(f"{count} matrices exceed the budget {budget}")
    R = FiniteRing(pr.ring)
    grid = np.array(list(itertools.product(range(R.size), repeat=n * n)), dtype=np.int64)
    ctx = pr.ring
    E = pr.E
    pow_mask = {}

    def ideal(k):
        if k not in pow_mask:
            pow_mask[k] = np.ones(R.size, bool) if k == 0 else R.ideal_mask([E ** k])
        return pow_mask[k]

    invertible = R.unit[R.det(grid, n)]
    member = invertible.copy()
    for i in range(n):
        for j in range(n):
            w = required_power(mu, i, j)
            if w:
                member &= ideal(w)[grid[:, i * n + j]]
    one, zero = R.index(ctx.one()), R.index(ctx.zero())
    # nilpotency of the ideal inside the truncation
    top = 0
    while (E ** (top + 1)).arr.any() and top < 64:
        top += 1
    sizes = {}
    for m in range(m_max + 2):
        cong = member.copy()
        if m > 0:
            Im = ideal(m)
            for i in range(n):
                for j in range(n):
                    diff = R.add[grid[:, i * n + j], R.neg[one if i == j else zero]]
                    cong &= Im[diff]
        sizes[m] = int(cong.sum())
    dims = graded_dims(desc, mu)
    rows = []
    for m in range(m_max + 1):
        observed = sizes[m] // sizes[m + 1] if sizes[m + 1] else 0
        if m == 0:
            expected = _parabolic_mod_E_size(R, mu, ideal(1))
            formula = "|P_mu(A/E)|"
        else:
            gm = R.ideal_mask([E ** m]).sum() if (E ** m).arr.any() else 1
            gm1 = R.ideal_mask([E ** (m + 1)]).sum() if (E ** (m + 1)).arr.any() else 1
            quot = int(gm) // int(gm1)
            dim = sum(d for w, d in dims.items() if w <= m)
            expected = quot ** dim
            formula = f"|E^{m}A/E^{m + 1}A|^{dim}"
        rows.append({"m": m, "observed": observed, "expected": expected, "formula": formula,
                     "match": observed == expected and sizes[m] % max(sizes[m + 1], 1) == 0})
    return {"group": str(desc), "mu": list(mu.weights), "ring_size": R.size, "nilpotency": top + 1,
            "subgroup_sizes": sizes, "pieces": rows, "all_match": all(r["match"] for r in rows)}


def _parabolic_mod_E_size(R: FiniteRing, mu: Cocharacter, I_mask: np.ndarray) -> int:
    """``|P_mu(A/E)|`` by enumerating coset representatives of ``A/E``."""
    # the smallest index in each coset of E A
    reps = sorted({int(np.nonzero(I_mask[R.add[k, R.neg]])[0][0]) for k in range(R.size)})
    nq = len(reps)
    n = mu.n
    free = [(i, j) for i in range(n) for j in range(n) if mu.weights[i] >= mu.weights[j]]
    total = nq ** len(free)
    if total > 2_000_000:
        raise BudgetExceeded("parabolic enumeration too large")
    grid = np.full((total, n * n), R.index(R.ctx.zero()), dtype=np.int64)
    choice = np.array(list(itertools.product(reps, repeat=len(free))), dtype=np.int64).reshape(total, len(free))
    for c, (i, j) in enumerate(free):
        grid[:, i * n + j] = choice[:, c]
    return int(R.unit[R.det(grid, n)].sum())
