"""Descent of banal displays along the coproduct prism.

Given a banal ``GL_n`` display ``X0`` over ``(A, E)`` and the coproduct
``A2`` with ``d = p1(E) = u p2(E)``, the two base changes of ``X0`` are
``Xa = p1(X0)`` and, after moving ``p2(X0)`` to the generator ``d``,
``Xb = p2(X0) phi(mu(u))^-1``.  A descent isomorphism is ``eps`` in the
display group with ``eps^-1 Xb sigma(eps) = Xa`` and ``m(eps) = 1``.

Elements of ``G(dK)`` are stored as ``1 + d kappa`` with every entry of
``kappa`` written in coordinates over the generators ``Y`` of ``K``.  Since
``phi(Y_l) = d z_l`` with explicit ``z_l``, ``phi(kappa) / d`` is computed on
coordinates and no division by ``d`` is ever needed.  For 1-bounded ``mu``
the map ``U(h) = X sigma(h) X^-1`` is then affine in ``kappa``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import mat
from .bkmod import Cocharacter
from .displays import BanalDisplay, GroupDescriptor, change_generator, one_bounded, sigma_mu_d
from .prisms import EnvelopeCtx, PrismCtx, kernel_lemma_witnesses, make_bk_prism
from .rings import SeriesElt, ValidationError
from .zlinalg import Lattice, matmul


class NotOneBounded(ValidationError):
    pass


class PreconditionViolation(ArithmeticError):
    """An element expected in ``G(dK)`` is not there (envelope too shallow)."""


class NoConvergence(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# elements of dK in coordinates


@dataclass
class KBasis:
    """Generators ``Y`` of ``K`` and the witnesses ``phi(Y_l) = d sum_k c_lk Y_k``."""

    ring: object
    d: SeriesElt
    gens: list
    phi_coords: list

    @property
    def size(self) -> int:
        return len(self.gens)

    def zero(self) -> list:
        return [self.ring.zero() for _ in self.gens]

    def value(self, c: list) -> SeriesElt:
        out = self.ring.zero()
        for b, y in zip(c, self.gens):
            out = out + b * y
        return out

    def scale(self, a: SeriesElt, c: list) -> list:
        return [a * b for b in c]

    def add(self, c1: list, c2: list) -> list:
        return [x + y for x, y in zip(c1, c2)]

    def phi_over_d(self, c: list) -> list:
        """Coordinates of ``phi(value(c)) / d``."""
        out = self.zero()
        for b, w in zip(c, self.phi_coords):
            pb = b.phi()
            out = [o + pb * x for o, x in zip(out, w)]
        return out

    def coords_of_multiple(self, a: SeriesElt) -> Optional[list]:
        """``c`` with ``a = d * value(c)``, or None if ``a`` is not in ``dK``."""
        if not self.gens:
            return [] if not a.arr.any() else None
        w = self.ring.in_ideal(a, [self.d * y for y in self.gens])
        return None if w is None else list(w)


class DKMat:
    """``1 + d kappa`` with ``kappa`` an ``n x n`` matrix of K-coordinates."""

    def __init__(self, kb: KBasis, kappa: list):
        self.kb = kb
        self.kappa = kappa

    @property
    def n(self) -> int:
        return len(self.kappa)

    @classmethod
    def one(cls, kb: KBasis, n: int) -> "DKMat":
        return cls(kb, [[kb.zero() for _ in range(n)] for _ in range(n)])

    @classmethod
    def from_matrix(cls, kb: KBasis, g: list) -> "DKMat":
        n = len(g)
        ctx = kb.ring
        kappa = []
        for i in range(n):
            row = []
            for j in range(n):
                a = g[i][j] - (ctx.one() if i == j else ctx.zero())
                c = kb.coords_of_multiple(a)
                if c is None:
                    raise PreconditionViolation(f"entry ({i},{j}) is not in 1 + dK")
                row.append(c)
            kappa.append(row)
        return cls(kb, kappa)

    def kappa_values(self) -> list:
        return [[self.kb.value(c) for c in row] for row in self.kappa]

    def value(self) -> list:
        kb = self.kb
        ctx = kb.ring
        return [[(ctx.one() if i == j else ctx.zero()) + kb.d * kb.value(c)
                 for j, c in enumerate(row)] for i, row in enumerate(self.kappa)]

    def left(self, a: list) -> list:
        """Coordinates of ``a kappa`` for an ordinary matrix ``a``."""
        kb = self.kb
        n = self.n
        return [[_sum(kb, [kb.scale(a[i][k], self.kappa[k][j]) for k in range(n)]) for j in range(n)] for i in range(n)]

    def right(self, a: list) -> list:
        kb = self.kb
        n = self.n
        return [[_sum(kb, [kb.scale(a[k][j], self.kappa[i][k]) for k in range(n)]) for j in range(n)] for i in range(n)]

    def conj(self, x: list, xinv: list) -> "DKMat":
        """``x h x^-1``."""
        tmp = DKMat(self.kb, self.left(x))
        return DKMat(self.kb, tmp.right(xinv))

    def __mul__(self, other: "DKMat") -> "DKMat":
        # (1 + d a)(1 + d b) = 1 + d (a + b + d a value(b))
        kb = self.kb
        n = self.n
        prod = self.right(mat.scale(kb.d, other.kappa_values()))
        out = [[kb.add(kb.add(self.kappa[i][j], other.kappa[i][j]), prod[i][j]) for j in range(n)] for i in range(n)]
        return DKMat(kb, out)

    def inverse(self) -> "DKMat":
        # (1 + d k)^-1 = 1 - d k (1 + d k)^-1
        w = mat.inverse(self.value())
        neg = self.right(w)
        kb = self.kb
        return DKMat(kb, [[kb.scale(-kb.ring.one(), c) for c in row] for row in neg])

    def equals(self, other: "DKMat") -> bool:
        return mat.equals(self.value(), other.value())

    def equals_exactly(self, other: "DKMat") -> bool:
        return mat.equals_exactly(self.value(), other.value())


def random_dk(kb: KBasis, n: int, rng) -> DKMat:
    """Uniformly random coordinates; the value is an element of ``G(dK)``."""
    return DKMat(kb, [[[kb.ring.random(rng) for _ in kb.gens] for _ in range(n)] for _ in range(n)])


def _sum(kb: KBasis, terms: list) -> list:
    out = kb.zero()
    for t in terms:
        out = kb.add(out, t)
    return out


# ---------------------------------------------------------------------------
# problems


@dataclass
class DeformationProblem:
    env: EnvelopeCtx
    prism: PrismCtx
    group: GroupDescriptor
    mu: Cocharacter
    X0: list
    Xa: list
    Xb: list
    kb: KBasis
    gamma: DKMat
    twist: DKMat
    checks: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.mu.n

    def sigma(self, h: DKMat) -> DKMat:
        """``sigma(1 + d k) = 1 + d (phi(d)^(1+m_i-m_j) phi(k_ij)/d)``, computed on coordinates."""
        kb = self.kb
        pd = kb.d.phi()
        w = self.mu.weights
        n = self.n
        return DKMat(kb, [[kb.scale(pd ** (1 + w[i] - w[j]), kb.phi_over_d(h.kappa[i][j])) for j in range(n)]
                          for i in range(n)])

    def U(self, h: DKMat) -> DKMat:
        """``Xb sigma(h) Xb^-1``."""
        return self.sigma(h).conj(self.Xb, self._Xb_inv)

    def V(self, h: DKMat) -> DKMat:
        return self.U(h) * h.inverse()

    def __post_init__(self):
        self._Xb_inv = mat.inverse(self.Xb)
        self._maps = None
        self._cert = None


def _kbasis(env: EnvelopeCtx) -> KBasis:
    if not env.complete:
        raise PreconditionViolation("envelope depth is below the weight cut-off; phi(K) is not certified")
    d = env.d1
    wit = kernel_lemma_witnesses(env, d)
    coords = []
    for name in env.y_names:
        if wit[name] is None:
            raise PreconditionViolation(f"phi({name}) is not in dK")
        coords.append(list(wit[name]))
    return KBasis(env.ring, d, list(env.K_gens), coords)


def setup_deformation(env: EnvelopeCtx, dsp: BanalDisplay) -> DeformationProblem:
    """Base change the display along both projections and certify ``gamma, twist in G(dK)``."""
    if dsp.prism is not env.base and dsp.prism.ring is not env.base.ring:
        raise ValidationError("display does not live on the base of the envelope")
    if dsp.group.kind != "GL":
        raise ValidationError("descent is implemented for GL_n displays")
    if not one_bounded(dsp.group, dsp.mu):
        raise NotOneBounded(f"mu = {dsp.mu} is not 1-bounded for {dsp.group}")
    B = env.ring
    mu = dsp.mu
    n = mu.n
    kb = _kbasis(env)
    prism = make_bk_prism(B, env.d1)
    Xa = mat.apply(env.p1, dsp.X)
    X2 = mat.apply(env.p2, dsp.X)
    # p2(E) = u^-1 d, so the p2 representative moves by phi(mu(u^-1))
    Xb = change_generator(mu, X2, env.u.inverse())
    # twist = phi(mu(u)) = diag(phi(u)^m_j), built inside G(dK)
    c = [] if not kb.gens else B.in_ideal(env.u - B.one(), kb.gens)
    if c is None:
        raise PreconditionViolation("u is not congruent to 1 modulo K")
    phi_u = DKMat(kb, [[kb.phi_over_d(list(c))]]) if kb.gens else DKMat.one(kb, 1)
    diag = []
    for m in mu.weights:
        p = DKMat.one(kb, 1)
        base = phi_u if m >= 0 else phi_u.inverse()
        for _ in range(abs(m)):
            p = p * base
        diag.append(p.kappa[0][0])
    twist = DKMat(kb, [[diag[i] if i == j else kb.zero() for j in range(n)] for i in range(n)])
    delta = DKMat.from_matrix(kb, mat.mul(mat.inverse(X2), Xa))
    gamma = twist * delta
    checks = {
        "m(Xa) = X0": mat.equals(mat.apply(env.m, Xa), dsp.X),
        "m(Xb) = X0": mat.equals(mat.apply(env.m, Xb), dsp.X),
        "twist = phi(mu(u))": mat.equals(twist.value(), mat.phi(mu.mu_of(env.u))),
        "gamma = Xb^-1 Xa": mat.equals(gamma.value(), mat.mul(mat.inverse(Xb), Xa)),
    }
    if not all(checks.values()):
        raise PreconditionViolation(f"setup checks failed: {checks}")
    return DeformationProblem(env, prism, dsp.group, mu, dsp.X, Xa, Xb, kb, gamma, twist, checks)


# ---------------------------------------------------------------------------
# solving


def solve_v(prob: DeformationProblem, c: DKMat, max_steps: Optional[int] = None) -> tuple:
    """``h`` in ``G(dK)`` with ``U(h) h^-1 = c``, by ``h <- c^-1 U(h)``.

    ``U`` pushes ``dJ`` into ``d phi(J)`` and the ideals ``J`` shrink to zero
    inside the truncation, so the iteration reaches an exact fixed point.
    Returns ``(h, steps)``.
    """
    ctx = prob.env.ring
    if max_steps is None:
        max_steps = 4 * ctx.N * ctx.M + 8
    cinv = c.inverse()
    h = cinv
    for step in range(1, max_steps + 1):
        nxt = cinv * prob.U(h)
        if nxt.equals_exactly(h):
            if not prob.V(h).equals(c):
                raise NoConvergence("fixed point found but the residual is not zero")
            return h, step
        h = nxt
    raise NoConvergence(f"no fixed point after {max_steps} steps")


def lift_descent_isomorphism(prob: DeformationProblem) -> dict:
    """``eps`` with ``eps^-1 Xb sigma(eps) = Xa`` and ``m(eps) = 1``."""
    # U(eps) = eps c with c = Xb gamma Xb^-1; h = eps^-1 solves V(h) = c^-1
    c = prob.gamma.conj(prob.Xb, mat.inverse(prob.Xb))
    h, steps = solve_v(prob, c.inverse())
    eps = h.inverse()
    ev = eps.value()
    env = prob.env
    m_one = mat.equals_exactly(mat.apply(env.m, ev), mat.identity(env.base.ring, prob.n))
    res = _residuals(prob, eps)
    return {"eps": eps, "eps_matrix": ev, "m_eps_is_one": m_one, "steps": steps, **res}


def _residuals(prob: DeformationProblem, eps: DKMat) -> dict:
    """The intertwining residual, on coordinates and through the display action.

    Dividing by ``d`` on values is ambiguous by ``Ann(d)`` in the truncated
    envelope, so the display-action residual is only meaningful at the
    certified ledger of the problem.
    """
    ev = eps.value()
    inv = mat.inverse(ev)
    lhs = mat.mul(mat.mul(inv, prob.Xb), prob.sigma(eps).value())
    led = certified_ledger(prob)
    alt = mat.mul(mat.mul(inv, prob.Xb), sigma_mu_d(prob.prism, prob.mu, ev))
    noise = prob.env.ring.precision_lattice(*led)
    alt_ok = all(noise.contains((a - b).vec) for ra, rb in zip(alt, prob.Xa) for a, b in zip(ra, rb))
    return {"residual_zero": mat.equals(lhs, prob.Xa), "residual_zero_display_action": alt_ok,
            "ledger": led}


# ---------------------------------------------------------------------------
# uniqueness


def _flat_len(prob: DeformationProblem) -> int:
    return prob.n * prob.n * prob.env.ring.dim


def _coord_basis(prob: DeformationProblem):
    """Every coordinate vector ``kappa`` with a single flattened unit entry."""
    kb = prob.kb
    B = prob.env.ring
    n = prob.n
    for i in range(n):
        for j in range(n):
            for l in range(kb.size):
                for k in range(B.dim):
                    v = np.zeros(B.dim, dtype=np.int64)
                    v[k] = 1
                    yield (i, j, l, B.from_vec(v))


def _flatten_value(prob: DeformationProblem, rows: list) -> np.ndarray:
    return np.concatenate([x.vec for row in rows for x in row])


def _linear_maps(prob: DeformationProblem):
    """Rows: ``Lambda(kappa) = d (U-part - kappa)`` and ``val(kappa) = d kappa`` on coordinates."""
    if prob._maps is not None:
        return prob._maps
    kb = prob.kb
    n = prob.n
    lam, val = [], []
    led = (kb.ring.N, kb.ring.M)
    for i, j, l, b in _coord_basis(prob):
        kap = [[kb.zero() for _ in range(n)] for _ in range(n)]
        kap[i][j] = [b if t == l else kb.ring.zero() for t in range(kb.size)]
        h = DKMat(kb, kap)
        u = prob.U(h)
        dv = mat.scale(kb.d, h.kappa_values())
        du = mat.scale(kb.d, u.kappa_values())
        diff = mat.sub(du, dv)
        led = tuple(min(a, b) for a, b in zip(led, mat.ledger(diff)))
        lam.append(_flatten_value(prob, diff))
        val.append(_flatten_value(prob, dv))
    prob._maps = (np.array(lam, dtype=np.int64), np.array(val, dtype=np.int64), led)
    return prob._maps


def certified_ledger(prob: DeformationProblem) -> tuple:
    """Largest ledger at which ``Lambda`` only depends on values, not coordinates.

    Coordinate vectors with equal values can give different ``Lambda`` past
    this ledger; everything stated about the problem holds modulo it.
    """
    if prob._cert is not None:
        return prob._cert
    B = prob.env.ring
    if prob.kb.size == 0:
        prob._cert = (B.N, B.M)
        return prob._cert
    p, N, P = B.coeff.p, B.coeff.N, B.coeff.P
    dim = _flat_len(prob)
    lam, val, led = _linear_maps(prob)
    rel = _relation_rows(prob)
    ker = Lattice.from_rows(p, N, np.vstack([val, rel]), dim, track=True).kernel
    amb = matmul(ker[:, : val.shape[0]], lam, P) if ker is not None and ker.size else np.zeros((0, dim), dtype=np.int64)

    def noise_at(lg) -> Lattice:
        rows = _block_rows(prob, B.precision_lattice(*lg).H)
        return Lattice.from_rows(p, N, np.vstack([rows, rel]), dim)

    cands = sorted(((a, b) for a in range(led[0], 0, -1) for b in range(led[1], 0, -1)),
                   key=lambda lg: (-(lg[0] + lg[1]), -lg[0]))
    prob._cert = next((lg for lg in cands if noise_at(lg).contains_all(amb)), (0, 0))
    return prob._cert


def _block_rows(prob: DeformationProblem, H: np.ndarray) -> np.ndarray:
    """``H`` placed in every matrix slot."""
    B = prob.env.ring
    size = prob.n * prob.n
    out = []
    for s in range(size):
        r = np.zeros((H.shape[0], size * B.dim), dtype=np.int64)
        r[:, s * B.dim:(s + 1) * B.dim] = H
        out.append(r)
    return np.vstack(out)


def _relation_rows(prob: DeformationProblem) -> np.ndarray:
    rel = prob.env.ring.relations
    if rel is None or not rel.H.shape[0]:
        return np.zeros((0, _flat_len(prob)), dtype=np.int64)
    return _block_rows(prob, rel.H)


def _ideal_coord_rows(prob: DeformationProblem, level: int) -> np.ndarray:
    """Generators of the coordinate vectors with entries in ``(pi, d)^level``."""
    B = prob.env.ring
    kb = prob.kb
    pi, d = B.pi, kb.d
    gens = [pi ** a * d ** (level - a) for a in range(level + 1)] if level else [B.one()]
    lat = B.ideal(gens)
    blocks = prob.n * prob.n * kb.size
    H = lat.H
    out = []
    for s in range(blocks):
        r = np.zeros((H.shape[0], blocks * B.dim), dtype=np.int64)
        r[:, s * B.dim:(s + 1) * B.dim] = H
        out.append(r)
    return np.vstack(out) if out else np.zeros((0, blocks * B.dim), dtype=np.int64)


def check_uniqueness(prob: DeformationProblem, eps: Optional[DKMat] = None, max_level: int = 64) -> dict:
    """Kernels of ``h -> U(h) h^-1`` globally and on each step of the ``(pi, d)``-filtration.

    ``U(1 + delta) = 1 + Lambda(delta)`` exactly, so ``V(beta) = 1`` with
    ``beta = 1 + delta`` means ``Lambda(delta) = delta``; a trivial kernel of
    ``Lambda - id`` on ``M_n(dK)`` is uniqueness of the descent isomorphism.
    The global statement holds modulo the reported ledger.  When ``eps`` is
    given its two defining properties are re-checked as well.
    """
    B = prob.env.ring
    p, N = B.coeff.p, B.coeff.N
    P = B.coeff.P
    dim = _flat_len(prob)
    if prob.kb.size == 0:
        return {"global_kernel_trivial": True, "ledger": certified_ledger(prob), "graded": [], "unique": True,
                "statement": "K = 0: the descent datum is the identity"}
    lam, val, _ = _linear_maps(prob)
    rel = _relation_rows(prob)

    def kernel_values(domain: np.ndarray, target: np.ndarray) -> np.ndarray:
        """``val(x)`` for ``x`` in the span of ``domain`` with ``Lambda(x)`` in ``target``."""
        if not domain.shape[0]:
            return np.zeros((0, dim), dtype=np.int64)
        lam_rows = matmul(domain, lam, P)
        stack = np.vstack([lam_rows, target, rel])
        lat = Lattice.from_rows(p, N, stack, dim, track=True)
        ker = lat.kernel
        if ker is None or not ker.size:
            return np.zeros((0, dim), dtype=np.int64)
        combo = ker[:, : domain.shape[0]]
        return matmul(matmul(combo, domain, P), val, P)

    def span(rows: np.ndarray) -> Lattice:
        return Lattice.from_rows(p, N, np.vstack([rows, rel]) if rows.shape[0] else rel, dim)

    zero = span(np.zeros((0, dim), dtype=np.int64))
    cert = certified_ledger(prob)
    noise = span(_block_rows(prob, B.precision_lattice(*cert).H)) if cert != (0, 0) else span(np.eye(dim, dtype=np.int64))
    glob = kernel_values(np.eye(lam.shape[0], dtype=np.int64), noise.H)
    global_ok = noise.contains_all(glob) if glob.shape[0] else True
    graded = []
    level = 0
    while level <= max_level:
        C = _ideal_coord_rows(prob, level)
        C_next = _ideal_coord_rows(prob, level + 1)
        V_l = span(matmul(C, val, P))
        if V_l == zero:
            break
        V_next = span(matmul(C_next, val, P))
        kv = kernel_values(C, V_next.H if V_next.H.shape[0] else np.zeros((0, dim), dtype=np.int64))
        ok = V_next.contains_all(kv) if kv.shape[0] else True
        graded.append({"level": level, "piece_log_size": V_l.log_size() - V_next.log_size(), "kernel_trivial": ok})
        level += 1
    kernels_ok = global_ok and all(g["kernel_trivial"] for g in graded)
    eps_ok = True
    if eps is not None:
        res = _residuals(prob, eps)
        eps_ok = res["residual_zero"] and res["residual_zero_display_action"]
        eps_ok = eps_ok and mat.is_identity(mat.apply(prob.env.m, eps.value()))
    unique = kernels_ok and eps_ok
    if unique:
        statement = "unique descent datum with m(eps) = 1: verified at this precision"
    elif not kernels_ok:
        statement = "kernel nontrivial: uniqueness NOT certified"
    else:
        statement = "kernels trivial but eps fails its defining equations"
    out = {"global_kernel_trivial": global_ok, "ledger": cert, "graded": graded, "unique": unique,
           "statement": statement}
    return out


def descend(env: EnvelopeCtx, dsp: BanalDisplay) -> dict:
    """Setup, solve and certify; the report used by the command line."""
    prob = setup_deformation(env, dsp)
    lift = lift_descent_isomorphism(prob)
    uniq = check_uniqueness(prob, lift["eps"])
    ok = lift["m_eps_is_one"] and lift["residual_zero"] and uniq["unique"]
    return {
        "status": "verified" if ok else "failed",
        "eps": mat.to_strings(lift["eps_matrix"]),
        "m_eps_is_one": lift["m_eps_is_one"],
        "residual_zero": lift["residual_zero"],
        "steps": lift["steps"],
        "uniqueness": uniq,
        "setup_checks": prob.checks,
        "ledger": list(lift["ledger"]),
    }
