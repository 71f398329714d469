"""Exact term algebra for composed cochain operators.

Images of multilinear cochains under the coboundary d and the radial homotopy
T are polynomial cochains.  Instead of composing black-box evaluators (whose
evaluation trees grow exponentially with operator depth), cochains built from
multilinear atoms are kept as finite sums of terms

    coeff * A(p_1(x), ..., p_r(x))

where A is a multilinear atom (a leaf cochain, possibly wrapped in left
bracket multiplications) and each p_i is a homogeneous linear combination of
bracket monomials in the outer arguments.  In this form both operators act
term by term:

  * d substitutes bracket monomials into argument slots and wraps atoms in
    [x_i, .]; argument combinations whose homogeneity degrees mix are
    distributed through the multilinear slots so every slot stays homogeneous;
  * T folds the last argument into the sum of the others and, because each
    term is jointly homogeneous of known degree D, the t-integral equals
    1/(arity + D) exactly.  No quadrature, no approximation.

Term counts are tamed by canonicalization: antisymmetric brackets order their
operands (killing [p, p] outright), alternating leaves sort their argument
slots with the permutation sign, and identical terms merge coefficients.
Evaluation is batched: distinct expressions are computed once per batch in
topological levels and terms are contracted atom group by atom group.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .cochain import Bracket, Cochain, probe_multilinear

__all__ = [
    "TermCochain",
    "lift_multilinear",
    "d_terms",
    "T_terms",
    "homotopy_defect_terms",
    "neumann_sum_terms",
    "m_power_terms",
]


# ---------------------------------------------------------------------------
# Hash-consed expression nodes
# ---------------------------------------------------------------------------
# Monomials: ("v", slot) and ("b", (left, right)) bracket applications.
# Linear combinations: ("lc", ((coeff, monomial), ...)), homogeneous, sorted,
# normalized so the leading coefficient is 1 (the scale moves into the term).

_EXPR_IDS: Dict[tuple, int] = {}
_EXPR_NODES: List[tuple] = []  # (kind, payload, degree, level)


def _intern(key: tuple, degree: int, level: int) -> int:
    eid = _EXPR_IDS.get(key)
    if eid is None:
        eid = len(_EXPR_NODES)
        _EXPR_IDS[key] = eid
        _EXPR_NODES.append((key[0], key[1], degree, level))
    return eid


def expr_degree(eid: int) -> int:
    return _EXPR_NODES[eid][2]


def var_expr(i: int) -> int:
    return _intern(("v", i), 1, 0)


def _monomials_of(eid: int) -> Tuple[Tuple[float, int], ...]:
    kind, payload, _, _ = _EXPR_NODES[eid]
    if kind == "lc":
        return payload
    return ((1.0, eid),)


def br_mono(a: int, b: int, antisym: bool) -> Tuple[float, int | None]:
    """Bracket of two monomials; canonically ordered when antisymmetric."""
    sign = 1.0
    if antisym:
        if a == b:
            return 0.0, None
        if a > b:
            a, b = b, a
            sign = -1.0
    na, nb = _EXPR_NODES[a], _EXPR_NODES[b]
    eid = _intern(("b", (a, b)), na[2] + nb[2], 1 + max(na[3], nb[3]))
    return sign, eid


def lc_expr(pairs: Sequence[Tuple[float, int]]) -> Tuple[float, int | None]:
    """Normalized homogeneous linear combination; returns (scale, node)."""
    acc: Dict[int, float] = {}
    for c, mono in pairs:
        if c != 0.0:
            acc[mono] = acc.get(mono, 0.0) + c
    items = sorted((m, c) for m, c in acc.items() if c != 0.0)
    if not items:
        return 0.0, None
    degs = {expr_degree(m) for m, _ in items}
    if len(degs) != 1:
        raise ValueError("lc_expr requires a homogeneous combination")
    scale = items[0][1]
    if len(items) == 1 and scale == 1.0:
        return 1.0, items[0][0]
    norm = tuple((c / scale, m) for m, c in items)
    if len(norm) == 1:
        return scale, norm[0][1]
    level = 1 + max(_EXPR_NODES[m][3] for m, _ in items)
    eid = _intern(("lc", norm), degs.pop(), level)
    return scale, eid


def _subst(eid: int, mapping: Dict[int, Tuple[Tuple[float, int], ...]],
           antisym: bool, memo: dict) -> Tuple[Tuple[float, int], ...]:
    """Rewrite a node under a variable substitution.

    mapping sends variable slots to monomial combinations; the result is the
    list of (coeff, monomial) pairs of the rewritten expression.
    """
    hit = memo.get(eid)
    if hit is not None:
        return hit
    kind, payload, _, _ = _EXPR_NODES[eid]
    if kind == "v":
        out = mapping.get(payload, ((1.0, eid),))
    elif kind == "b":
        a, b = payload
        ca = _subst(a, mapping, antisym, memo)
        cb = _subst(b, mapping, antisym, memo)
        pairs: List[Tuple[float, int]] = []
        for cx, mx in ca:
            for cy, my in cb:
                s, mono = br_mono(mx, my, antisym)
                if mono is not None:
                    pairs.append((cx * cy * s, mono))
        out = tuple(pairs)
    else:  # lc
        pairs = []
        for c, mono in payload:
            for c2, m2 in _subst(mono, mapping, antisym, memo):
                pairs.append((c * c2, m2))
        out = tuple(pairs)
    memo[eid] = out
    return out


def _group_pairs(pairs: Sequence[Tuple[float, int]]) -> List[Tuple[int, float, int]]:
    """Split monomial pairs into homogeneous components (degree, scale, node)."""
    buckets: Dict[int, List[Tuple[float, int]]] = {}
    for c, m in pairs:
        buckets.setdefault(expr_degree(m), []).append((c, m))
    out = []
    for deg, group in sorted(buckets.items()):
        scale, node = lc_expr(group)
        if node is not None:
            out.append((deg, scale, node))
    return out


# ---------------------------------------------------------------------------
# Atoms and terms
# ---------------------------------------------------------------------------
# Atom grammar: ("leaf", token) applies a registered multilinear evaluator;
# ("brL", sub) is (x0, rest...) -> [x0, sub(rest...)].


@dataclass(frozen=True)
class Leaf:
    evaluator: Callable
    arity: int
    alternating: bool


def _canonical_term(atom: tuple, args: Tuple[int, ...], leaves: Dict[int, Leaf]):
    """Sort the slots of alternating leaves; returns (sign, args) or None if zero."""
    if atom[0] == "leaf":
        leaf = leaves[atom[1]]
        if not leaf.alternating:
            return 1.0, args
        if len(set(args)) != len(args):
            return None
        order = sorted(range(len(args)), key=lambda i: args[i])
        sign = _perm_sign(order)
        return sign, tuple(args[i] for i in order)
    # brL: slot 0 belongs to the bracket, the rest to the inner atom
    inner = _canonical_term(atom[1], args[1:], leaves)
    if inner is None:
        return None
    sign, rest = inner
    return sign, (args[0],) + rest


def _perm_sign(order: Sequence[int]) -> float:
    sign = 1.0
    seen = [False] * len(order)
    for i in range(len(order)):
        if seen[i]:
            continue
        j, clen = i, 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            clen += 1
        if clen % 2 == 0:
            sign = -sign
    return sign


@dataclass
class TermCochain:
    """A polynomial cochain stored as a merged sum of atom/argument terms."""

    arity: int
    m: int
    bracket: Bracket
    terms: List[Tuple[float, tuple, Tuple[int, ...]]]
    leaves: Dict[int, Leaf]
    _plan: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.terms)

    @staticmethod
    def merge(arity, m, bracket, raw_terms, leaves) -> "TermCochain":
        acc: Dict[tuple, float] = {}
        for coeff, atom, args in raw_terms:
            canon = _canonical_term(atom, args, leaves)
            if canon is None:
                continue
            sign, cargs = canon
            key = (atom, cargs)
            acc[key] = acc.get(key, 0.0) + sign * coeff
        merged = [(c, atom, args) for (atom, args), c in acc.items() if c != 0.0]
        merged.sort(key=lambda t: (t[1], t[2]))
        return TermCochain(arity=arity, m=m, bracket=bracket, terms=merged, leaves=leaves)

    def scaled(self, factor: float) -> "TermCochain":
        return TermCochain.merge(
            self.arity, self.m, self.bracket,
            [(factor * c, a, e) for c, a, e in self.terms], self.leaves,
        )

    def plus(self, other: "TermCochain", own: float = 1.0, alt: float = 1.0) -> "TermCochain":
        if other.arity != self.arity:
            raise ValueError("cannot add term cochains of different arity")
        leaves = dict(self.leaves)
        leaves.update(other.leaves)
        raw = [(own * c, a, e) for c, a, e in self.terms]
        raw += [(alt * c, a, e) for c, a, e in other.terms]
        return TermCochain.merge(self.arity, self.m, self.bracket, raw, leaves)

    # -- evaluation -----------------------------------------------------------

    def _build_plan(self):
        needed: set = set()

        def collect(eid):
            if eid in needed:
                return
            needed.add(eid)
            kind, payload, _, _ = _EXPR_NODES[eid]
            if kind == "b":
                collect(payload[0])
                collect(payload[1])
            elif kind == "lc":
                for _, mono in payload:
                    collect(mono)

        for _, _, args in self.terms:
            for eid in args:
                collect(eid)
        order = sorted(needed, key=lambda e: (_EXPR_NODES[e][3], e))
        loc = {eid: i for i, eid in enumerate(order)}

        var_rows = [(loc[e], _EXPR_NODES[e][1]) for e in order if _EXPR_NODES[e][0] == "v"]
        groups: Dict[tuple, List] = {}
        for eid in order:
            kind, payload, _, lvl = _EXPR_NODES[eid]
            if kind == "b":
                groups.setdefault(("b", lvl, 2), []).append(
                    (loc[eid], loc[payload[0]], loc[payload[1]], 0.0, 0.0))
            elif kind == "lc":
                n = len(payload)
                row = [loc[eid]] + [loc[m] for _, m in payload] + [c for c, _ in payload]
                groups.setdefault(("lc", lvl, n), []).append(tuple(row))
        level_plan = []
        for (kind, lvl, n), rows in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0], kv[0][2])):
            if kind == "b":
                mat = np.array([r[:3] for r in rows], dtype=np.int64)
                level_plan.append(("b", mat, None))
            else:
                mat = np.array([r[: 1 + n] for r in rows], dtype=np.int64)
                coef = np.array([r[1 + n:] for r in rows], dtype=np.float64)
                level_plan.append(("lc", mat, coef))

        atom_groups: Dict[tuple, List] = {}
        for coeff, atom, args in self.terms:
            atom_groups.setdefault(atom, []).append((coeff, tuple(loc[a] for a in args)))
        agroups = []
        for atom in sorted(atom_groups):
            rows = atom_groups[atom]
            coeffs = np.array([r[0] for r in rows], dtype=np.float64)
            argmat = np.array([r[1] for r in rows], dtype=np.int64)
            agroups.append((atom, coeffs, argmat))

        fast_br = self.bracket.eval_batch
        if (4 * self.m) ** 2 <= 4096:
            fast_br = _tensorized_evaluator(self.bracket.eval_batch, 2, self.m)
        self._plan = {"E": len(order), "vars": var_rows, "levels": level_plan,
                      "atoms": agroups, "bracket": fast_br}

    def _eval_atom(self, atom: tuple, vals: List[np.ndarray]) -> np.ndarray:
        if atom[0] == "leaf":
            return self.leaves[atom[1]].evaluator(*vals)
        inner = self._eval_atom(atom[1], vals[1:])
        return self._plan["bracket"](vals[0], inner)

    def _eval_chunk(self, args: Sequence[np.ndarray], term_chunk: int) -> np.ndarray:
        plan = self._plan
        B = args[0].shape[0]
        table = np.zeros((plan["E"], B, self.m, 4), dtype=np.float64)
        for row, i in plan["vars"]:
            table[row] = args[i]
        for kind, mat, coef in plan["levels"]:
            if kind == "b":
                table[mat[:, 0]] = plan["bracket"](table[mat[:, 1]], table[mat[:, 2]])
            else:
                table[mat[:, 0]] = np.einsum("gn,gn...->g...", coef, table[mat[:, 1:]])
        out = np.zeros((B, self.m, 4), dtype=np.float64)
        chunk = term_chunk or max(128, int(4e6 // (64 * max(1, B))))
        for atom, coeffs, argmat in plan["atoms"]:
            r = argmat.shape[1]
            for lo in range(0, argmat.shape[0], chunk):
                hi = min(lo + chunk, argmat.shape[0])
                vals = [table[argmat[lo:hi, s]] for s in range(r)]
                av = self._eval_atom(atom, vals)
                out += np.einsum("t,tbmq->bmq", coeffs[lo:hi], av)
        return out

    def evaluate(self, *args: np.ndarray, term_chunk: int = 0) -> np.ndarray:
        if not self._plan:
            self._build_plan()
        B = args[0].shape[0]
        max_b = max(1, int(3e6 // max(1, self._plan["E"])))
        if B <= max_b:
            return self._eval_chunk(args, term_chunk)
        parts = []
        for lo in range(0, B, max_b):
            hi = min(lo + max_b, B)
            parts.append(self._eval_chunk([a[lo:hi] for a in args], term_chunk))
        return np.concatenate(parts, axis=0)

    def to_cochain(self, label: str = "", probe: bool = True) -> Cochain:
        c = Cochain(arity=self.arity, m=self.m, evaluator=self.evaluate,
                    label=label, terms=self)
        if probe and probe_multilinear(c):
            c.kind = "multilinear"
        return c


def _tensor_contractor(W: np.ndarray, arity: int, m: int) -> Callable:
    """Evaluator for a multilinear map given by its coefficient tensor.

    Organized around one dense GEMM: the last two argument slots form an
    outer product that multiplies the matricized tensor, and remaining slots
    contract pairwise.
    """
    dim = 4 * m
    # matricize with the last two input slots in front: (dim^2, dim^(arity-2) * dim)
    perm = (arity - 2, arity - 1) + tuple(range(arity - 2)) + (arity,)
    W2 = np.ascontiguousarray(W.transpose(perm).reshape(dim * dim, -1))

    def tev(*xs):
        flats = [np.ascontiguousarray(x.reshape(x.shape[:-2] + (dim,))) for x in xs]
        lead = np.broadcast_shapes(*(f.shape[:-1] for f in flats))
        flats = [np.broadcast_to(f, lead + (dim,)) for f in flats]
        u = (flats[-2][..., :, None] * flats[-1][..., None, :]).reshape(lead + (dim * dim,))
        cur = u @ W2
        for s in range(arity - 2):
            rest = dim ** (arity - 3 - s) * dim
            cur = cur.reshape(lead + (dim, rest))
            cur = np.einsum("...ir,...i->...r", cur, flats[s])
        return cur.reshape(lead + (m, 4))

    return tev


def lift_multilinear(c: Cochain, bracket: Bracket, alternating: bool | None = None,
                     tensorize: bool = True) -> TermCochain:
    """Wrap a multilinear cochain as a single-term cochain over `bracket`.

    Alternation (full antisymmetry of the leaf) is probed empirically unless
    stated; it only drives term canonicalization, never the math.  Multilinear
    leaves are tensorized (coefficients on the real basis of H^m), replacing
    the closure with a single exact contraction.
    """
    if c.kind != "multilinear":
        raise ValueError("only multilinear cochains can seed the term algebra")
    if alternating is None:
        alternating = _probe_alternating(c)
    ev = c.evaluator
    if tensorize and (4 * c.m) ** c.arity <= 8192:
        ev = _tensorized_evaluator(ev, c.arity, c.m)
    token = id(ev)
    leaves = {token: Leaf(ev, c.arity, alternating)}
    args = tuple(var_expr(i) for i in range(c.arity))
    return TermCochain.merge(c.arity, c.m, bracket, [(1.0, ("leaf", token), args)], leaves)


def _probe_alternating(c: Cochain, seed: int = 321, trials: int = 6, tol: float = 1e-10) -> bool:
    from .quaternion import sample_ball, vec_norm

    if c.arity < 2:
        return False
    for t in range(trials):
        pts = [sample_ball(c.m, 1.0, "sphere", seed, index=t * c.arity + s)
               for s in range(c.arity)]
        base = c(*pts)
        for i in range(c.arity - 1):
            swapped = list(pts)
            swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
            if float(vec_norm(c(*swapped) + base)) > tol * max(1.0, float(vec_norm(base))):
                return False
    return True


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def _rewrite(tc: TermCochain, coeff: float, atom: tuple, args: Tuple[int, ...],
             mapping, out: list, extra_front: Tuple[int, ...] = ()):
    """Apply a variable substitution to one term, splitting per degree."""
    memo: dict = {}
    anti = tc.bracket.antisymmetric
    comps = [_group_pairs(_subst(a, mapping, anti, memo)) for a in args]
    if any(len(c) == 0 for c in comps):
        return
    for combo in itertools.product(*comps):
        scale = coeff
        nodes = []
        for _, s, node in combo:
            scale *= s
            nodes.append(node)
        out.append((scale, atom, extra_front + tuple(nodes)))


def d_terms(tc: TermCochain) -> TermCochain:
    """Coboundary in the term algebra (same formula as cochain.ce_differential)."""
    k = tc.arity
    anti = tc.bracket.antisymmetric
    out: list = []
    for coeff, atom, args in tc.terms:
        for i in range(k + 1):
            mapping = {j: ((1.0, var_expr(j + (1 if j >= i else 0))),) for j in range(k)}
            _rewrite(tc, ((-1.0) ** i) * coeff, ("brL", atom), args, mapping, out,
                     extra_front=(var_expr(i),))
        for i in range(k + 1):
            for j in range(i + 1, k + 1):
                s, mono = br_mono(var_expr(i), var_expr(j), anti)
                if mono is None:
                    continue
                remaining = [t for t in range(k + 1) if t != i and t != j]
                mapping = {0: ((s, mono),)}
                for t, r in enumerate(remaining):
                    mapping[1 + t] = ((1.0, var_expr(r)),)
                _rewrite(tc, ((-1.0) ** (i + j)) * coeff, atom, args, mapping, out)
    return TermCochain.merge(k + 1, tc.m, tc.bracket, out, dict(tc.leaves))


def T_terms(tc: TermCochain) -> TermCochain:
    """Radial homotopy in the term algebra; the t-integral is exact per term."""
    k = tc.arity
    if k < 2:
        raise ValueError("T_terms requires arity >= 2")
    fold = tuple((1.0, var_expr(i)) for i in range(k - 1))
    mapping = {k - 1: fold}
    out: list = []
    for coeff, atom, args in tc.terms:
        memo: dict = {}
        anti = tc.bracket.antisymmetric
        comps = [_group_pairs(_subst(a, mapping, anti, memo)) for a in args]
        if any(len(c) == 0 for c in comps):
            continue
        for combo in itertools.product(*comps):
            scale = coeff
            nodes = []
            D = 0
            for deg, s, node in combo:
                scale *= s
                D += deg
                nodes.append(node)
            out.append((scale / (k + D), atom, tuple(nodes)))
    return TermCochain.merge(k - 1, tc.m, tc.bracket, out, dict(tc.leaves))


def homotopy_defect_terms(tc: TermCochain) -> TermCochain:
    """N := dT + Td, so that the homotopy defect is M = N - Id on arity 3."""
    if tc.arity != 3:
        raise ValueError("homotopy_defect_terms expects arity 3")
    dT = d_terms(T_terms(tc))
    Td = T_terms(d_terms(tc))
    return dT.plus(Td)


def _n_powers(J: TermCochain, top: int, cache: dict) -> List[TermCochain]:
    if "N" not in cache:
        cache["N"] = [J]
    chain = cache["N"]
    while len(chain) <= top:
        chain.append(homotopy_defect_terms(chain[-1]))
    return chain


def neumann_sum_terms(J: TermCochain, n: int, cache: dict | None = None) -> TermCochain:
    """S_n(J) = sum_{k<=n} (-M)^k J, written in powers of N = M + Id:

        S_n = sum_{j=0}^n (-1)^j C(n+1, j+1) N^j J

    (hockey-stick identity), which shares the N^j J across orders.
    """
    cache = cache if cache is not None else {}
    powers = _n_powers(J, n, cache)
    out = powers[0].scaled(float(math.comb(n + 1, 1)))
    for j in range(1, n + 1):
        out = out.plus(powers[j], alt=((-1.0) ** j) * float(math.comb(n + 1, j + 1)))
    return out


def m_power_terms(J: TermCochain, k: int, cache: dict | None = None) -> TermCochain:
    """M^k J = sum_j C(k,j) (-1)^(k-j) N^j J (binomial in N = M + Id)."""
    cache = cache if cache is not None else {}
    powers = _n_powers(J, k, cache)
    out = powers[0].scaled(float(math.comb(k, 0)) * ((-1.0) ** k))
    for j in range(1, k + 1):
        out = out.plus(powers[j], alt=float(math.comb(k, j)) * ((-1.0) ** (k - j)))
    return out
