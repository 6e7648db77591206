"""Breuil-Kisin modules over a truncated prism.

A module is ``M = A^n`` with ``F = F_num / E^k`` acting on column vectors.
``phi^*M`` is identified with ``A^n`` through ``1 (x) a -> phi(a)``, so the
matrix of ``F`` on the standard basis ``1 (x) e_j`` is ``F`` itself and a
change of basis ``h`` of ``M`` pulls back to ``phi(h)`` on ``phi^*M``.

Every submodule is computed as a lattice over ``Z/p^N``.  A verdict such as
"displayed" is a statement about the truncated model; the reports say so.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import mat
from .mat import FreeModule
from .prisms import PrismCtx, ideal_pow_membership, lift_elt, lift_prism, projection_matrix
from .rings import RingMap, SeriesElt, ValidationError
from .zlinalg import Lattice, matmul


class NotDisplayed(ValueError):
    """The Hodge filtration has a non-free graded piece."""


class NotBanal(ValueError):
    pass


# ---------------------------------------------------------------------------
# cocharacters and standard filtrations


@dataclass(frozen=True)
class Cocharacter:
    """Weights ``m_1 >= ... >= m_n`` of a diagonal cocharacter."""

    weights: tuple

    def __init__(self, weights):
        w = tuple(int(x) for x in weights)
        if any(a < b for a, b in zip(w, w[1:])):
            raise ValidationError(f"weights must be weakly decreasing, got {list(w)}")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.weights)

    def r(self, i: int) -> int:
        return self.weights.count(i)

    def levels(self) -> list:
        return sorted(set(self.weights), reverse=True)

    def mu_of(self, a: SeriesElt) -> list:
        """``mu(a) = diag(a^m_1, ..., a^m_n)`` (``a`` a unit when weights are negative)."""
        return mat.diag([a ** m for m in self.weights])

    def __str__(self):
        return "(" + ",".join(str(w) for w in self.weights) + ")"


def fil_mu(pr: PrismCtx, mu: Cocharacter, i: int) -> list:
    """Generators of ``Fil^i_mu``: ``e_j`` if ``m_j >= i`` else ``E^(i - m_j) e_j``."""
    ctx = pr.ring
    out = []
    for j, m in enumerate(mu.weights):
        v = [ctx.zero() for _ in range(mu.n)]
        v[j] = ctx.one() if m >= i else pr.E ** (i - m)
        out.append(v)
    return out


# ---------------------------------------------------------------------------
# modules


@dataclass
class BKModule:
    prism: PrismCtx
    F_num: list
    denom_k: int = 0
    # rebuilds F_num over a prism with spare precision; None means lift digitwise
    lift: Optional[Callable] = field(default=None, repr=False, compare=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.F_num)

    @property
    def ring(self):
        return self.prism.ring

    @property
    def ledger(self):
        return mat.ledger(self.F_num) if self.n else (self.ring.N, self.ring.M)

    @property
    def module(self) -> FreeModule:
        if "mod" not in self._cache:
            self._cache["mod"] = FreeModule(self.ring, self.n)
        return self._cache["mod"]

    @property
    def F_flat(self) -> np.ndarray:
        if "F" not in self._cache:
            self._cache["F"] = self.module.map_matrix(self.F_num)
        return self._cache["F"]

    def to_dict(self) -> dict:
        return {"rank": self.n, "denom_k": self.denom_k, "F_num": mat.to_strings(self.F_num)}

    def __str__(self):
        body = "; ".join(", ".join(r) for r in mat.to_strings(self.F_num))
        return f"BK[{body}] / E^{self.denom_k}" if self.denom_k else f"BK[{body}]"


def _det_exponent(pr: PrismCtx, d: SeriesElt) -> Optional[int]:
    """``s`` with ``d = unit * E^s``, or None."""
    s = 0
    cap = pr.ring.N * max(pr.ring.M, 1) + 1
    while not d.is_unit():
        if s > cap or not d.arr.any():
            return None
        member, q = ideal_pow_membership(pr, d, 1)
        if not member:
            return None
        d = q.with_ledger((pr.ring.N, pr.ring.M))
        s += 1
    return s


def make_bk_module(pr: PrismCtx, F_num, denom_k: int = 0) -> BKModule:
    """Validate and normalize: ``det F_num = unit * E^s`` and the smallest ``k``."""
    ctx = pr.ring
    F = [[ctx.parse(x) if isinstance(x, str) else x for x in row] for row in F_num]
    n = len(F)
    if any(len(r) != n for r in F):
        raise ValidationError("F must be square")
    if n and _det_exponent(pr, mat.det(F)) is None:
        raise ValidationError("det F is not a unit times a power of E; F is not invertible after inverting E")
    k = denom_k
    while k > 0 and n:
        quots = []
        for row in F:
            qs = []
            for x in row:
                member, q = ideal_pow_membership(pr, x, 1)
                if not member:
                    break
                qs.append(q)
            if len(qs) != n:
                break
            quots.append(qs)
        if len(quots) != n:
            break
        F = quots
        k -= 1

    def lift(hi):
        src = [[hi.ring.parse(x) if isinstance(x, str) else lift_elt(x, hi.ring) for x in row] for row in F_num]
        up = make_bk_module(hi, src, denom_k)
        return up.F_num if up.denom_k == k else None

    return BKModule(pr, F, k, lift)


def make_banal_bk(pr: PrismCtx, mu: Cocharacter, X: list) -> BKModule:
    """``F = mu(E) X`` with the smallest non-negative denominator."""
    if len(X) != mu.n:
        raise ValidationError("X and mu have different sizes")
    if mu.n and not mat.is_invertible(X):
        raise ValidationError("X is not invertible")
    base = min(mu.weights[-1], 0) if mu.n else 0
    D = mat.diag([pr.E ** (m - base) for m in mu.weights]) if mu.n else []
    F = mat.mul(D, X) if mu.n else []

    def lift(hi):
        return make_banal_bk(hi, mu, [[lift_elt(x, hi.ring) for x in row] for row in X]).F_num

    return BKModule(pr, F, -base, lift)


# ---------------------------------------------------------------------------
# filtrations


@dataclass
class FilteredPiece:
    i: int
    lattice: Lattice
    generators: list
    hodge: Lattice


def _fil_direct(m: BKModule, i: int) -> Lattice:
    key = ("fil_direct", i)
    if key not in m._cache:
        mod = m.module
        e = i + m.denom_k
        if e <= 0:
            lat = mod.whole()
        else:
            lat = mod.preimage(m.F_flat, _E_power_lattice(m, e))
        m._cache[key] = lat
    return m._cache[key]


def det_exponent(m: BKModule) -> int:
    if "s" not in m._cache:
        s = _det_exponent(m.prism, mat.det(m.F_num)) if m.n else 0
        if s is None:
            raise ValidationError("det F is not a unit times a power of E")
        m._cache["s"] = s
    return m._cache["s"]


def _lifted(m: BKModule, extra: int):
    """The module over the prism with ``extra`` spare digits, and the projection back."""
    key = ("lift", extra)
    if key not in m._cache:
        hi = lift_prism(m.prism, extra)
        if hi is None:
            m._cache[key] = None
        else:
            if m.lift is not None:
                F = m.lift(hi)
            else:
                F = [[lift_elt(x, hi.ring) for x in row] for row in m.F_num]
            # a lift is usable only if it keeps det F = unit * E^s
            if F is None or (m.n and _det_exponent(hi, mat.det(F)) != det_exponent(m)):
                m._cache[key] = None
                return None
            mh = BKModule(hi, F, m.denom_k)
            b = projection_matrix(hi.ring, m.ring)
            proj = np.zeros((mh.module.dim, m.module.dim), dtype=np.int64)
            for c in range(m.n):
                proj[c * hi.ring.dim:(c + 1) * hi.ring.dim, c * m.ring.dim:(c + 1) * m.ring.dim] = b
            m._cache[key] = (mh, proj)
    return m._cache[key]


def spare_digits(m: BKModule) -> int:
    return det_exponent(m) + m.denom_k + 2


def fil_lattice(m: BKModule, i: int, extra: Optional[int] = None) -> Lattice:
    """``Fil^i = {x : F x in E^i A^n}`` as a lattice.

    Division by ``E`` inside a truncation admits spurious solutions near the
    precision boundary, so the preimage is computed with spare digits and
    weight, then reduced back.  Rings that cannot be lifted are handled at
    their own precision.
    """
    extra = spare_digits(m) if extra is None else extra
    key = ("fil", i, extra)
    if key not in m._cache:
        lifted = _lifted(m, extra) if i + m.denom_k > 0 else None
        if lifted is None:
            lat = _fil_direct(m, i)
        else:
            mh, proj = lifted
            lat = _project(m, _fil_direct(mh, i), proj)
        m._cache[key] = lat
    return m._cache[key]


def _project(m: BKModule, lat: Lattice, proj: np.ndarray) -> Lattice:
    H = lat.H
    if not H.shape[0]:
        return m.module.lattice(np.zeros((0, m.module.dim), dtype=np.int64))
    return m.module.lattice(matmul(H, proj, m.module.P))


def filtration_is_stable(m: BKModule) -> bool:
    """Do one more spare digit leave every computed ``Fil^i`` unchanged?"""
    lo, hi = filtration_range(m)
    e = spare_digits(m)
    if _lifted(m, e) is None:
        return False
    return all(fil_lattice(m, i, e) == fil_lattice(m, i, e + 1) for i in range(lo, hi + 2))


def _E_power_lattice(m: BKModule, e: int) -> Lattice:
    key = ("Epow", e)
    if key not in m._cache:
        m._cache[key] = m.module.scaled(m.prism.E ** e)
    return m._cache[key]


def _max_ideal_gens(ctx):
    return [ctx.pi] + [ctx.var(nm) for nm in ctx.names]


def minimal_generators(mod: FreeModule, lat: Lattice, modulo: Optional[Lattice] = None) -> list:
    """Rows of ``lat`` that generate it as an A-module (over ``modulo``), by Nakayama."""
    ctx = mod.ctx
    base = [lat.H[:0]]
    if modulo is not None:
        base.append(modulo.H)
    radical = [mod.times(lat, g).H for g in _max_ideal_gens(ctx)]
    cur = mod.lattice(np.vstack(base + radical))
    chosen = []
    for row in lat.H:
        if not cur.contains(row):
            chosen.append(row)
            cur = mod.add(cur, mod.span([mod.unflatten(row)]))
    return chosen


def fil_phi_star(m: BKModule, i: int) -> FilteredPiece:
    lat = fil_lattice(m, i)
    gens = [m.module.unflatten(r) for r in minimal_generators(m.module, lat)]
    return FilteredPiece(i, lat, gens, _hodge(m, i))


def _hodge(m: BKModule, i: int) -> Lattice:
    """``Fil^i + E A^n``; its image in ``M_dR`` is ``P^i``."""
    key = ("P", i)
    if key not in m._cache:
        mod = m.module
        m._cache[key] = mod.add(fil_lattice(m, i), _E_power_lattice(m, 1))
    return m._cache[key]


def height(m: BKModule) -> int:
    """Smallest ``h`` with ``E^h M contained in F(phi^*M)`` (forces ``Fil^(h+1) in E phi^*M``)."""
    mod = m.module
    img = mod.image(m.F_num)
    ctx = m.ring
    h = -m.denom_k
    while True:
        e = h + m.denom_k
        Ee = m.prism.E ** e
        ok = all(img.contains(mod.flatten([Ee if a == j else ctx.zero() for a in range(m.n)])) for j in range(m.n))
        if ok:
            return h
        h += 1
        if h > ctx.N * ctx.M + 1:
            raise ArithmeticError("no height found inside the truncation")


def filtration_range(m: BKModule) -> tuple:
    """``(lo, hi)``: ``Fil^lo`` is everything and ``P^(hi+1) = 0``."""
    return -m.denom_k, height(m)


def ladder_holds(m: BKModule, i: int) -> bool:
    """``E Fil^(i-1) = Fil^i  cap  E phi^*M``, checked as lattice equality.

    Both sides are formed with spare precision (when the ring allows it) and
    then reduced, since ``E`` is a zero divisor in the truncation.
    """
    lifted = _lifted(m, spare_digits(m))
    if lifted is None:
        mod = m.module
        lhs = mod.times(fil_lattice(m, i - 1), m.prism.E)
        return lhs == _intersect(mod, fil_lattice(m, i), _E_power_lattice(m, 1))
    mh, proj = lifted
    mod = mh.module
    lhs = mod.times(_fil_direct(mh, i - 1), mh.prism.E)
    cap = _intersect(mod, _fil_direct(mh, i), _E_power_lattice(mh, 1))
    return _project(m, lhs, proj) == _project(m, cap, proj)


def _intersect(mod: FreeModule, a: Lattice, b: Lattice) -> Lattice:
    # x = u (from a) = v (from b):  kernel of [a; -b] projected on the a-part
    rows = np.vstack([a.H, (-b.H) % mod.P])
    lat = Lattice.from_rows(mod.p, mod.N, rows, mod.dim, track=True)
    ker = lat.kernel
    if ker is None or not ker.size:
        return mod.lattice(np.zeros((0, mod.dim), dtype=np.int64))
    coef = ker[:, : a.H.shape[0]]
    return mod.lattice(matmul(coef, a.H, mod.P))


def height_lemma(m: BKModule, h: int) -> dict:
    """Both sides of: ``Fil^(h+1) in E phi^*M``  iff  ``E^h M in F(phi^*M)``."""
    mod = m.module
    left = _E_power_lattice(m, 1).includes(fil_lattice(m, h + 1))
    e = h + m.denom_k
    if e < 0:
        right = False
    else:
        right = mod.image(m.F_num).includes(_E_power_lattice(m, e) if e > 0 else mod.whole())
    return {"h": h, "fil_in_EM": left, "EM_in_image": right, "agree": left == right}


# ---------------------------------------------------------------------------
# Hodge filtration and classification


def _residue_log(ctx) -> int:
    cr = ctx.coeff
    return cr.n // cr.e


def _graded_info(m: BKModule, i: int) -> dict:
    mod = m.module
    Pi, Pn = _hodge(m, i), _hodge(m, i + 1)
    logQ = Pi.log_size() - Pn.log_size()
    rad = mod.add(Pn, *[mod.times(Pi, g) for g in _max_ideal_gens(m.ring)])
    mu = (Pi.log_size() - rad.log_size()) // _residue_log(m.ring)
    logAE = mod.whole().log_size() // max(m.n, 1) - _E_power_lattice(m, 1).log_size() // max(m.n, 1)
    return {"level": i, "log_size": logQ, "generators": mu, "free": logQ == mu * logAE, "rank": mu}


def _torsion_witness(m: BKModule, i: int) -> Optional[dict]:
    """A minimal generator of ``P^i/P^(i+1)`` whose annihilator is too large for a free module."""
    mod = m.module
    Pi, Pn = _hodge(m, i), _hodge(m, i + 1)
    pi = m.ring.pi
    best = None
    for row in minimal_generators(mod, Pi, Pn):
        v = mod.unflatten(row)
        s = 0
        cur = v
        while not Pn.contains(mod.flatten(cur)):
            cur = [pi * x for x in cur]
            s += 1
            if s > m.ring.N:
                break
        if best is None or s < best[0]:
            best = (s, v)
    if best is None:
        return None
    s, v = best
    return {"level": i, "class": [str(x) for x in v], "pi_exponent": s,
            "killed_by_pi": s == 1, "nonzero": s > 0}


def graded_class(m: BKModule, i: int, v: Sequence[SeriesElt]) -> dict:
    """Where ``v`` sits in ``P^i/P^(i+1)``: membership, nonvanishing, killed by pi."""
    mod = m.module
    x = mod.flatten(v)
    Pi, Pn = _hodge(m, i), _hodge(m, i + 1)
    return {"in_P": Pi.contains(x), "nonzero": not Pn.contains(x),
            "killed_by_pi": Pn.contains(mod.flatten([m.ring.pi * a for a in v]))}


def coker_killed_by_E(m: BKModule) -> bool:
    mod = m.module
    return mod.image(m.F_num).includes(_E_power_lattice(m, 1))


def hodge_and_classify(m: BKModule) -> dict:
    if m.n == 0:
        return {"ranks": {}, "pieces": [], "range": [0, 0], "top_vanishes": True, "displayed": True,
                "minuscule": True, "minuscule_by_cokernel": True, "minuscule_criteria_agree": True,
                "effective": True, "type": Cocharacter([]), "witness": None, "filtration_stable": True,
                "precision": "verdict certifies the truncated model"}
    lo, hi = filtration_range(m)
    pieces = [_graded_info(m, i) for i in range(lo, hi + 1)]
    top_zero = _E_power_lattice(m, 1).includes(fil_lattice(m, hi + 1))
    displayed = all(p["free"] for p in pieces)
    witness = None
    if not displayed:
        bad = next(p for p in pieces if not p["free"])
        witness = _torsion_witness(m, bad["level"])
    weights = []
    for p in sorted(pieces, key=lambda p: -p["level"]):
        weights += [p["level"]] * p["rank"]
    effective = m.denom_k == 0
    # filtration criterion: P^0 = M_dR, P^2 = 0, displayed
    full0 = _hodge(m, 0) == _hodge(m, lo) if lo <= 0 else True
    p2_zero = hi <= 1 or _E_power_lattice(m, 1).includes(fil_lattice(m, 2))
    minuscule_fil = displayed and full0 and p2_zero
    minuscule_coker = effective and coker_killed_by_E(m)
    return {
        "ranks": {p["level"]: p["rank"] for p in pieces},
        "pieces": pieces,
        "range": [lo, hi],
        "top_vanishes": top_zero,
        "displayed": displayed,
        "minuscule": minuscule_fil,
        "minuscule_by_cokernel": minuscule_coker,
        "minuscule_criteria_agree": minuscule_fil == minuscule_coker,
        "effective": effective,
        "type": Cocharacter(weights) if displayed else None,
        "witness": witness,
        "filtration_stable": filtration_is_stable(m),
        "precision": "verdict certifies the truncated model",
    }


def is_displayed(m: BKModule) -> tuple:
    """``(displayed, witness)``; the witness is None for displayed modules."""
    rep = hodge_and_classify(m)
    return rep["displayed"], rep["witness"]


# ---------------------------------------------------------------------------
# normal decomposition and standard form


def normal_decomposition(m: BKModule) -> dict:
    """``h`` (columns ordered by descending weight) with ``Fil^i = h(Fil^i_mu)``."""
    rep = hodge_and_classify(m)
    if not rep["displayed"]:
        raise NotDisplayed("module is not displayed")
    mod = m.module
    lo, hi = rep["range"]
    cols, weights, pieces = [], [], {}
    for i in range(hi, lo - 1, -1):
        Pn = _hodge(m, i + 1)
        rows = minimal_generators(mod, fil_lattice(m, i), mod.add(Pn))
        vecs = [mod.unflatten(r) for r in rows]
        pieces[i] = vecs
        cols += vecs
        weights += [i] * len(vecs)
    if len(cols) != m.n:
        raise NotBanal(f"normal decomposition found {len(cols)} basis vectors for rank {m.n}")
    h = mat.from_columns(cols)
    if not mat.is_invertible(h):
        raise NotBanal("lifted basis is not a basis")
    mu = Cocharacter(weights)
    checks = {}
    for i in range(lo, hi + 2):
        target = mod.span([mod.apply(h, v) for v in fil_mu(m.prism, mu, i)])
        checks[i] = target == fil_lattice(m, i)
    return {"h": h, "mu": mu, "L": pieces, "levels_match": checks}


def to_standard_form(m: BKModule) -> dict:
    """``X`` with ``m`` isomorphic to ``make_banal_bk(mu, X)``, and the isomorphism.

    ``h_d = F h mu(E)^-1`` maps the standard module to ``m``; ``X = h^-1 phi(h_d)``
    and ``g = mu(E)^-1 h_d mu(E)`` is the matching display-group element.
    """
    nd = normal_decomposition(m)
    h, mu = nd["h"], nd["mu"]
    pr = m.prism
    Fh = mat.mul(m.F_num, h)
    hd = []
    for i in range(m.n):
        row = []
        for j in range(m.n):
            e = m.denom_k + mu.weights[j]
            x = Fh[i][j]
            if e >= 0:
                member, q = ideal_pow_membership(pr, x, e)
                if not member:
                    raise ArithmeticError("F h is not divisible as the normal decomposition predicts")
                row.append(q)
            else:
                row.append(x * pr.E ** (-e))
        hd.append(row)
    X = mat.mul(mat.inverse(h), mat.phi(hd))
    std = make_banal_bk(pr, mu, X)
    ok = _intertwines(m, std, hd)
    g = _conjugate_down(pr, mu, hd)
    return {"X": X, "mu": mu, "h": h, "h_d": hd, "g": g, "iso_verified": ok}


def _intertwines(target: BKModule, source: BKModule, h: list) -> bool:
    """``F_target phi(h) = h F_source`` after clearing denominators."""
    pr = target.prism
    kt, ks = target.denom_k, source.denom_k
    lhs = mat.mul(target.F_num, mat.phi(h))
    rhs = mat.mul(h, source.F_num)
    if ks > kt:
        lhs = mat.scale(pr.E ** (ks - kt), lhs)
    elif kt > ks:
        rhs = mat.scale(pr.E ** (kt - ks), rhs)
    return mat.equals(lhs, rhs)


def _conjugate_down(pr: PrismCtx, mu: Cocharacter, c: list) -> Optional[list]:
    """``mu(E)^-1 c mu(E)``: entry ``(i, j)`` times ``E^(m_j - m_i)``, dividing where needed."""
    n = mu.n
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            e = mu.weights[j] - mu.weights[i]
            if e >= 0:
                row.append(c[i][j] * pr.E ** e)
            else:
                member, q = ideal_pow_membership(pr, c[i][j], -e)
                if not member:
                    return None
                row.append(q)
        out.append(row)
    return out


def isomorphic_via(m1: BKModule, m2: BKModule, h: list) -> bool:
    """Is ``h`` (invertible) an isomorphism ``m2 -> m1`` of BK modules?"""
    return mat.is_invertible(h) and _intertwines(m1, m2, h)


# ---------------------------------------------------------------------------
# windows


@dataclass
class Window:
    """``(N = A^n, Fil^1 = span of the columns of G, Phi, Phi_1)``.

    ``Phi`` gives ``Phi(e_j)``; ``Phi1`` gives ``Phi_1(G e_j)``; both are
    phi-linear, so ``Phi_1(sum a_j G e_j) = sum phi(a_j) Phi1[:, j]``.
    """

    prism: PrismCtx
    G: list
    Phi: list
    Phi1: list

    @property
    def n(self) -> int:
        return len(self.G)

    def validate(self) -> dict:
        pr = self.prism
        n = self.n
        if n == 0:
            return {"dN_in_Fil": True, "Phi_factors": True, "P1_summand": True, "Phi1_linearization_invertible": True}
        mod = FreeModule(pr.ring, n)
        fil = mod.image(self.G)
        dN = mod.scaled(pr.E)
        c1 = fil.includes(dN)
        # Phi(e_j) = Phi_1(E e_j): write E e_j = G c_j and apply Phi_1
        c2 = True
        for j in range(n):
            ej = [pr.E if a == j else pr.ring.zero() for a in range(n)]
            c = mod.solve(self.G, ej)
            if c is None:
                c2 = False
                break
            val = mod.apply(self.Phi1, [x.phi() for x in c])
            c2 = c2 and all(a == b for a, b in zip(val, mat.column(self.Phi, j)))
        quotient_free = _quotient_free(mod, mod.add(fil, dN), dN, pr)
        c4 = mat.is_invertible(self.Phi1)
        return {"dN_in_Fil": c1, "Phi_factors": c2, "P1_summand": quotient_free,
                "Phi1_linearization_invertible": c4}


def _quotient_free(mod: FreeModule, sub: Lattice, dN: Lattice, pr: PrismCtx) -> bool:
    """Is ``N / sub`` free over ``A/E`` (``sub`` contains ``E N``)?"""
    whole = mod.whole()
    logQ = whole.log_size() - sub.log_size()
    rad = mod.add(sub, *[mod.times(whole, g) for g in _max_ideal_gens(pr.ring)])
    mu = (whole.log_size() - rad.log_size()) // _residue_log(pr.ring)
    logAE = (whole.log_size() - dN.log_size()) // mod.n
    return logQ == mu * logAE


def window_of(m: BKModule) -> Window:
    """``N = E^-1 F(phi^*M)`` with basis ``E^-1 F e_j``; ``Fil^1 = M``; ``Phi_1(G e_j) = e_j``."""
    rep = hodge_and_classify(m)
    if not rep["minuscule_by_cokernel"]:
        raise ValidationError("module is not minuscule")
    pr = m.prism
    n = m.n
    ctx = pr.ring
    if n == 0:
        return Window(pr, [], [], [])
    mod = m.module
    cols = []
    for j in range(n):
        ej = [pr.E if a == j else ctx.zero() for a in range(n)]
        c = mod.solve(m.F_num, ej)
        if c is None:
            raise ValidationError("cokernel of F is not killed by E")
        cols.append(c)
    G = mat.from_columns(cols)
    return Window(pr, G, mat.phi(m.F_num), mat.identity(ctx, n))


def minuscule_of(w: Window) -> BKModule:
    """``M = Fil^1 N`` in the basis ``G e_j`` and ``F = E (1 (x) Phi_1)``."""
    pr = w.prism
    n = w.n
    if n == 0:
        return BKModule(pr, [], 0)
    mod = FreeModule(pr.ring, n)
    cols = []
    for j in range(n):
        target = [pr.E * x for x in mat.column(w.Phi1, j)]
        c = mod.solve(w.G, target)
        if c is None:
            raise ValidationError("E Phi_1 does not land in Fil^1")
        cols.append(c)
    return BKModule(pr, mat.from_columns(cols), 0)


# ---------------------------------------------------------------------------
# orthogonal modules


def antidiagonal_form(ctx, n: int) -> list:
    return [[ctx.one() if i + j == n - 1 else ctx.zero() for j in range(n)] for i in range(n)]


def quadratic_value(v: Sequence[SeriesElt]) -> SeriesElt:
    """``Q(a) = sum_{i <= n/2} a_i a_(n+1-i)``."""
    n = len(v)
    out = v[0].ctx.zero()
    for i in range(n // 2):
        out = out + v[i] * v[n - 1 - i]
    return out


def is_orthogonal(X: list, scale_elt: Optional[SeriesElt] = None) -> bool:
    """``X^T J X = c J`` and ``Q(X e_j) = 0`` (needed when 2 is not a unit)."""
    n = len(X)
    if n % 2:
        return False
    ctx = X[0][0].ctx
    J = antidiagonal_form(ctx, n)
    rhs = J if scale_elt is None else mat.scale(scale_elt, J)
    if not mat.equals(mat.mul(mat.mul(mat.transpose(X), J), X), rhs):
        return False
    return all(quadratic_value(mat.column(X, j)).is_zero() for j in range(n))


def orthogonal_cocharacter(n: int) -> Cocharacter:
    return Cocharacter([1] + [0] * (n - 2) + [-1])


def make_orthogonal_bk(pr: PrismCtx, X: list):
    """Banal module of type ``(1, 0, ..., 0, -1)`` with a quadratic-form certificate."""
    n = len(X)
    if n % 2 or n == 0:
        raise ValidationError("orthogonal modules need even rank")
    if not is_orthogonal(X):
        raise ValidationError("X does not preserve the quadratic form")
    mu = orthogonal_cocharacter(n)
    m = make_banal_bk(pr, mu, X)
    Ek2 = pr.E ** (2 * m.denom_k)
    compat = is_orthogonal(m.F_num, Ek2)
    return m, {"form": "sum a_i a_(n+1-i)", "F_preserves_form": compat, "phi_fixes_form": True}


# ---------------------------------------------------------------------------
# base change


def base_change(m: BKModule, f: RingMap, dst: PrismCtx) -> BKModule:
    """Transport along a prism map; ``f(E) = v E'`` converts the denominator."""
    if f.src is not m.ring or f.dst is not dst.ring:
        raise ValidationError("ring map does not match the module and target prism")
    fE = f(m.prism.E)
    member, v = ideal_pow_membership(dst, fE, 1)
    if not member or not v.is_unit():
        raise ValidationError("f(E) does not generate the target ideal")
    F = mat.apply(f, m.F_num)
    if m.denom_k:
        vk = v.inverse() ** m.denom_k
        F = mat.scale(vk, F)
    return BKModule(dst, F, m.denom_k)


def transport_filtration(m: BKModule, f: RingMap, dst: PrismCtx, i: int) -> bool:
    """``f(Fil^i) A' = Fil^i`` of the base change (span equality)."""
    out = base_change(m, f, dst)
    gens = fil_phi_star(m, i).generators
    images = [[f(x) for x in v] for v in gens]
    return out.module.span(images) == fil_lattice(out, i)
