"""Breuil-Kisin type prisms, division by the orientation, and the coproduct envelope.

A prism here is a truncated ring ``A = O[t_1..t_r]/(deg >= M)`` with an
orientation ``E`` whose constant term is a uniformizer.  The coproduct
``A2`` of two copies of ``A`` is presented as the delta-envelope

    O[t, x, Y_j] / (delta^j(E(t) * Y_0 - x))

where ``x = t' - t`` and ``Y_j`` stands for ``delta^j(x / E)``.  Variables
are weighted (``t``, ``x`` and ``Y_0`` weight 1, ``Y_j`` weight ``q^j``) so
that the Frobenius multiplies weights by ``q`` and the cut-off at weight
``M`` is Frobenius-stable.  Every ``delta^j`` relation with ``q^j >= M``
already lies in the cut-off, so the relation set is finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rings import DeltaCtx, RingMap, SeriesElt, ValidationError, PrecisionError
from .zlinalg import Lattice, matmul


class NotDistinguished(ValidationError):
    """delta(E) is not a unit."""


class BadConstantTerm(ValidationError):
    """The constant term of E is not a uniformizer times a unit."""


class BudgetExceeded(MemoryError):
    """The flattened monomial basis would exceed the requested budget."""


# ---------------------------------------------------------------------------
# exact division


def divide(a: SeriesElt, g: SeriesElt) -> Optional[SeriesElt]:
    """Some ``c`` with ``c * g = a`` in the truncated ring, or None.

    The quotient is unique only up to the annihilator of ``g``; its ledger is
    lowered until that annihilator vanishes at the reported precision.
    """
    ctx = a.ctx
    w = ctx.in_ideal(a, [g])
    if w is None:
        return None
    c = w[0]
    c.ledger = _quotient_ledger(ctx, g, a.ledger, 1)
    return c


def _quotient_ledger(ctx: DeltaCtx, g: SeriesElt, ledger, cost: int):
    """Certified precision of a quotient by ``g``.

    The pi-digits drop by ``cost``.  The weight bound is the largest ``m`` for
    which every annihilator of ``g`` dies modulo ``(pi^N', weight >= m)``.
    """
    Nc = ledger[0] - cost
    if Nc < 1:
        raise PrecisionError("precision exhausted by division")
    ann = _annihilator(ctx, g)
    Mc = min(ledger[1], ctx.M)
    while Mc > 0 and not ctx.precision_lattice(Nc, Mc).contains_all(ann):
        Mc -= 1
    return (Nc, Mc)


def _annihilator(ctx: DeltaCtx, g: SeriesElt) -> np.ndarray:
    key = g.vec.tobytes()
    cache = ctx.__dict__.setdefault("_ann_cache", {})
    if key not in cache:
        rows = ctx.ideal_rows(g)
        if ctx.relations is not None:
            rows = np.vstack([rows, ctx.relations.H])
        lat = Lattice.from_rows(ctx.coeff.p, ctx.coeff.N, rows, ctx.dim, track=True)
        ker = lat.kernel[:, : ctx.dim] if lat.kernel is not None and lat.kernel.size else np.zeros((0, ctx.dim), dtype=np.int64)
        cache[key] = ker
    return cache[key]


# ---------------------------------------------------------------------------
# prisms


@dataclass
class PrismCtx:
    """Oriented Breuil-Kisin type prism ``(A, (E))`` with its witnesses."""

    ring: DeltaCtx
    E: SeriesElt
    delta_E_inverse_witness: SeriesElt
    e_t: Optional[int]

    @property
    def pi(self) -> SeriesElt:
        return self.ring.pi

    def E_pow(self, k: int) -> SeriesElt:
        return self.E ** k

    def describe(self) -> dict:
        return {"ring": self.ring.describe(), "E": str(self.E), "e_t": self.e_t,
                "delta_E_inverse": str(self.delta_E_inverse_witness)}


def make_bk_prism(ctx: DeltaCtx, E) -> PrismCtx:
    """Validate ``E`` as an orientation and return the prism."""
    if isinstance(E, str):
        E = ctx.parse(E)
    cr = ctx.coeff
    if cr.valuation(E.const()) != 1:
        raise BadConstantTerm(f"constant term of E = {E} is not a uniformizer times a unit")
    dE = E.delta()
    if not dE.is_unit():
        raise NotDistinguished(f"delta(E) = {dE} is not a unit")
    u = dE.inverse()
    if not (u * dE) == ctx.one():
        raise NotDistinguished("unit witness for delta(E) failed")
    if ctx.in_ideal(ctx.pi, [E, E.phi()]) is None:
        raise NotDistinguished("pi is not in (E, phi(E))")
    order = E.t_order()
    e_t = None if order >= ctx.M else order
    return PrismCtx(ctx, E, u, e_t)


def is_distinguished(d: SeriesElt) -> tuple[bool, bool]:
    """``(delta(d) is a unit, pi in (d, phi(d)))``; both agree on radical elements."""
    ctx = d.ctx
    flag = d.delta().is_unit()
    equiv = ctx.in_ideal(ctx.pi, [d, d.phi()]) is not None
    return flag, equiv


def ideal_pow_membership(pr: PrismCtx, a: SeriesElt, k: int):
    """Is ``a`` in ``(E^k)``?  Returns ``(member, quotient)``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return True, a
    if not a.arr.any():
        return True, a.ctx.zero().with_ledger(a.ledger)
    Ek = pr.E ** k
    w = pr.ring.in_ideal(a, [Ek])
    if w is None:
        return False, None
    c = w[0]
    c.ledger = _quotient_ledger(pr.ring, Ek, a.ledger, k)
    return True, c


def divide_by_gen(pr: PrismCtx, a: SeriesElt, k: int = 1) -> SeriesElt:
    member, c = ideal_pow_membership(pr, a, k)
    if not member:
        raise ArithmeticError(f"element is not divisible by E^{k}")
    return c


# ---------------------------------------------------------------------------
# the coproduct envelope


def _levels(q: int, M: int) -> int:
    """Largest j with q^j < M (the last Y level that survives the cut-off)."""
    j = 0
    while q ** (j + 1) < M:
        j += 1
    return j


@dataclass
class EnvelopeCtx:
    """Truncated coproduct prism with its structure maps and kernel data."""

    base: PrismCtx
    D: int
    depth: int
    complete: bool
    ring: DeltaCtx
    relation_gens: list
    p1: RingMap
    p2: RingMap
    m: RingMap
    K_gens: list
    y_names: list
    u: SeriesElt = None
    d1: SeriesElt = None
    d2: SeriesElt = None
    phi_witness: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.base.ring.r

    def y(self, i: int, j: int) -> SeriesElt:
        return self.ring.var(f"y{i}_{j}")

    def K_lattice(self) -> Lattice:
        return self.ring.ideal(self.K_gens)

    def in_K(self, a: SeriesElt) -> bool:
        return self.K_lattice().contains(a.vec)

    def k_coords(self, a: SeriesElt):
        """Coefficients ``b_j`` with ``a = sum b_j K_gens[j]``, or None."""
        return self.ring.in_ideal(a, self.K_gens)

    def describe(self) -> dict:
        return {"D": self.D, "depth": self.depth, "complete": self.complete,
                "vars": list(self.ring.names), "n_mon": self.ring.n_mon,
                "relations": [str(r) for r in self.relation_gens]}


def build_coproduct(pr: PrismCtx, D: int = 2, budget: int = 20000) -> EnvelopeCtx:
    """Present the coproduct of two copies of ``pr`` as a truncated delta-envelope."""
    if D < 1:
        raise ValueError("depth D must be >= 1")
    A = pr.ring
    cr = A.coeff
    q, M, r = A.q, A.M, A.r
    full = _levels(q, M)
    L = min(D, full)
    complete = D >= full
    names, weights, ynames = [], [], []
    for i in range(r):
        names += [f"t{i}", f"x{i}"]
        weights += [1, 1]
    for i in range(r):
        for j in range(L + 1):
            names.append(f"y{i}_{j}")
            weights.append(q**j)
            ynames.append(f"y{i}_{j}")
    est = _estimate_monomials(weights, M) * cr.n
    if est > budget:
        raise BudgetExceeded(f"envelope needs {est} flattened coordinates, budget is {budget}")

    def phi_spec(y_top_ok: bool):
        spec = {}
        for i in range(r):
            spec[f"x{i}"] = f"(x{i} + t{i})^{q} - t{i}^{q}"
            for j in range(L + 1):
                if j < L:
                    spec[f"y{i}_{j}"] = f"y{i}_{j}^{q} + pi*y{i}_{j + 1}"
                else:
                    spec[f"y{i}_{j}"] = f"y{i}_{j}^{q}"
        return spec

    # relations delta^j(E(t) y_i0 - x_i) computed in the free ring with spare digits
    hi = cr.with_precision(cr.N + L + 1)
    F_hi = DeltaCtx(hi, names=names, weights=weights, M=M, phi_images=phi_spec(True), budget=budget)
    E_free = F_hi.parse(str(pr.E))
    rels_hi = []
    for i in range(r):
        g = E_free * F_hi.var(f"y{i}_0") - F_hi.var(f"x{i}")
        for j in range(L + 1):
            rels_hi.append(g)
            if j < L:
                g = g.delta()
    free = DeltaCtx(cr, names=names, weights=weights, M=M, phi_images=phi_spec(True), budget=budget)
    rels = [free.elt(g.arr % cr.P) for g in rels_hi]
    B = DeltaCtx(cr, names=names, weights=weights, M=M, phi_images=phi_spec(True), relations=rels, budget=budget)
    if complete:
        _ = B.Phi  # validates phi-stability of the relations
    p1 = RingMap(A, B, [f"t{i}" for i in range(r)], "p1")
    p2 = RingMap(A, B, [f"t{i} + x{i}" for i in range(r)], "p2")
    m_images = []
    for name in names:
        m_images.append(name if name.startswith("t") else "0")
    m = RingMap(B, A, m_images, "m")
    K_gens = [B.var(n) for n in ynames]
    env = EnvelopeCtx(pr, D, L, complete, B, rels, p1, p2, m, K_gens, ynames)
    env.d1 = p1(pr.E)
    env.d2 = p2(pr.E)
    env.u = _coproduct_unit(env, free)
    return env


def _estimate_monomials(weights, M) -> int:
    # count monomials of weighted degree < M by dynamic programming
    counts = [0] * M
    counts[0] = 1
    for w in weights:
        for s in range(w, M):
            counts[s] += counts[s - w]
    return sum(counts)


def _coproduct_unit(env: EnvelopeCtx, free: DeltaCtx) -> SeriesElt:
    """``u`` with ``p1(E) = u * p2(E)``, built from ``E(t + x) - E(t) = sum x_i Q_i``."""
    B = env.ring
    E = env.base.E
    r = env.r
    # telescoping differences, each divisible by one x_i in the free ring
    cur = free.parse(str(E))
    v = B.one()
    for i in range(r):
        subs = {f"t{k}": (f"(t{k} + x{k})" if k <= i else f"t{k}") for k in range(r)}
        nxt = free.parse(_substitute(str(E), subs))
        diff = nxt - cur
        Q = _divide_by_variable(free, diff, f"x{i}")
        v = v + B.var(f"y{i}_0") * B.elt(Q.arr)
        cur = nxt
    if not (env.d2 == env.d1 * v):
        raise ValidationError("p2(E) != p1(E) * v in the envelope")
    u = v.inverse()
    return u


def _substitute(text: str, subs: dict) -> str:
    import re

    return re.sub(r"\bt\d+\b", lambda mt: subs.get(mt.group(0), mt.group(0)), text)


def _divide_by_variable(ctx: DeltaCtx, a: SeriesElt, name: str) -> SeriesElt:
    k = ctx.names.index(name)
    out = ctx.zero()
    for mono, c in a.terms():
        if mono[k] == 0:
            raise ArithmeticError(f"not divisible by {name}")
        lower = tuple(e - (1 if i == k else 0) for i, e in enumerate(mono))
        term = ctx.monomial(lower).scale(c)
        out = out + term
    return out


def kernel_lemma_witnesses(env: EnvelopeCtx, d: SeriesElt) -> dict:
    """``z_j`` with ``phi(Y_j) = d * z_j``, each ``z_j`` given in K-coordinates.

    Returns a dict name -> list of coefficients over ``env.K_gens`` (or None
    when the truncated model cannot certify membership).
    """
    B = env.ring
    gens = [d * y for y in env.K_gens]
    out = {}
    for name, y in zip(env.y_names, env.K_gens):
        w = B.in_ideal(y.phi(), gens)
        out[name] = w
    return out


def _status(ok: bool) -> str:
    return "verified" if ok else "inconclusive"


def verify_kernel_lemmas(env: EnvelopeCtx) -> dict:
    """Check the kernel inclusions on generators in the truncated envelope.

    With ``d = p1(E)``: ``phi(Y) in dK`` for every K-generator; ``w_i =
    phi(Y_i0)/d`` with ``d w_i = phi(Y_i0)``; ``phi(K) in dM + d(pi,d)K``; and
    ``phi(M) in d(t)M + d(pi,d)K``.  A failed membership is reported as
    inconclusive since truncation can only hide relations.
    """
    checks = []
    B = env.ring
    d = env.d1
    if not env.complete:
        for name in env.y_names:
            checks.append({"lemma": "phi(K) in dK", "generator": name, "status": "inconclusive",
                           "reason": "depth cap below the weight cut-off; phi not defined on the top level"})
        return {"checks": checks, "all_verified": False, "w": []}
    for name, y in zip(env.y_names, env.K_gens):
        checks.append({"lemma": "m(K) = 0", "generator": name, "status": _status(not env.m(y).arr.any())})
    wit = kernel_lemma_witnesses(env, d)
    for name in env.y_names:
        checks.append({"lemma": "phi(K) in dK", "generator": name, "status": _status(wit[name] is not None)})
    ws = []
    for i in range(env.r):
        name = f"y{i}_0"
        coords = wit[name]
        if coords is None:
            raise ArithmeticError(f"division witness missing for phi({name})/d")
        w = sum((c * g for c, g in zip(coords, env.K_gens)), B.zero())
        ok = (d * w).equals_exactly(B.var(name).phi())
        checks.append({"lemma": "d * w = phi(Y0)", "generator": f"w{i}", "status": _status(ok)})
        ws.append(w)
    pi = B.pi
    small = [d * pi * y for y in env.K_gens] + [d * d * y for y in env.K_gens]
    refined = B.ideal([d * w for w in ws] + small)
    for name, y in zip(env.y_names, env.K_gens):
        ok = refined.contains(y.phi().vec)
        checks.append({"lemma": "phi(K) in dM + d(pi,d)K", "generator": name, "status": _status(ok)})
    tM = [d * env.p1(env.base.ring.var(i)) * w for i in range(env.r) for w in ws]
    refined_t = B.ideal(tM + small)
    for i, w in enumerate(ws):
        ok = refined_t.contains(w.phi().vec)
        checks.append({"lemma": "phi(M) in d(t)M + d(pi,d)K", "generator": f"w{i}", "status": _status(ok)})
    return {"checks": checks, "all_verified": all(c["status"] == "verified" for c in checks),
            "w": [str(w) for w in ws]}


# ---------------------------------------------------------------------------
# lifting to spare precision


def lift_prism(pr: PrismCtx, extra: int) -> Optional[PrismCtx]:
    """The same prism with ``extra`` more p-adic digits and weight cut-off.

    Only plain truncated rings (no relations, default Frobenius) can be lifted;
    for anything else None is returned and callers work at the given precision.
    """
    A = pr.ring
    if A.relations is not None or A._phi_spec:
        return None
    cache = A.__dict__.setdefault("_lifts", {})
    key = (str(pr.E), extra)
    if key not in cache:
        hi = DeltaCtx(A.coeff.with_precision(A.coeff.N + extra), names=A.names, weights=A.weights,
                      M=A.M + extra)
        E = lift_elt(pr.E, hi)
        cache[key] = PrismCtx(hi, E, lift_elt(pr.delta_E_inverse_witness, hi), pr.e_t)
    return cache[key]


def lift_elt(a: SeriesElt, hi: DeltaCtx) -> SeriesElt:
    """Canonical lift: same residues on the same monomials."""
    lo = a.ctx
    arr = np.zeros((hi.n_mon, hi.coeff.n), dtype=np.int64)
    for mi, mono in enumerate(lo.monos):
        arr[hi.index[mono]] = a.arr[mi]
    return hi.elt(arr)


def projection_matrix(hi: DeltaCtx, lo: DeltaCtx) -> np.ndarray:
    """Row-convention matrix of the reduction ``hi -> lo`` on flattened coordinates."""
    n = lo.coeff.n
    out = np.zeros((hi.dim, lo.dim), dtype=np.int64)
    for mi, mono in enumerate(lo.monos):
        hj = hi.index[mono]
        for k in range(n):
            out[hj * n + k, mi * n + k] = 1
    return out


def project_elt(a: SeriesElt, lo: DeltaCtx) -> SeriesElt:
    v = matmul(a.vec.reshape(1, -1), projection_matrix(a.ctx, lo), lo.coeff.P).reshape(-1)
    return lo.from_vec(v)
