"""Cochains on X = H^m: localized norms, the coboundary d, the radial homotopy T.

A k-cochain is a deterministic map X^k -> X.  Evaluators are batched: each
argument is an array of shape (B, m, 4) and the result has the same shape, so
sampling-based estimators and composed operators run at numpy speed.

Operator compositions built here (d, T, defect operators, Neumann sums) stay
exact: images of multilinear cochains under T are evaluated in closed form,
and general polynomial images use Gauss-Legendre quadrature with enough nodes
to integrate the (polynomial in t) integrand exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .quaternion import qmul, sample_ball, vec_norm

__all__ = [
    "Cochain",
    "Bracket",
    "NormEstimate",
    "EstimatorBudget",
    "RadialTraceDivergence",
    "zero_cochain",
    "localized_norm",
    "ce_differential",
    "radial_homotopy",
    "jacobiator",
    "cyclic_nested",
    "antisymmetry_defect",
    "quadratic_remainder",
    "radial_trace",
    "probe_multilinear",
    "probe_antisymmetric",
    "probe_right_linear",
]

DEFAULT_TOL = 1e-10
GAUSS_NODES = 16  # exact for polynomial t-integrands up to degree 31


class RadialTraceDivergence(RuntimeError):
    """Raised when the t->0 radial limit fails the convergence test."""


@dataclass
class Cochain:
    """A k-cochain with a batched evaluator.

    kind is "multilinear" or "polynomial-general"; multilinearity of composed
    cochains is always detected by random probes, never assumed.  `terms` is
    an optional exact term-algebra backing (see quatlie.terms) used by the
    heavy operator compositions.
    """

    arity: int
    m: int
    evaluator: Callable[..., np.ndarray]
    kind: str = "polynomial-general"
    label: str = ""
    terms: Optional[object] = None

    def eval_batch(self, *args: np.ndarray) -> np.ndarray:
        if len(args) != self.arity:
            raise ValueError(f"{self.label or 'cochain'} has arity {self.arity}, got {len(args)} arguments")
        return self.evaluator(*args)

    def __call__(self, *args: np.ndarray) -> np.ndarray:
        """Single-point evaluation on (m, 4) arrays."""
        batched = [np.asarray(a, dtype=np.float64)[None, ...] for a in args]
        return self.eval_batch(*batched)[0]

    def ratio_at(self, witness: Sequence[np.ndarray], eps: float, variant: str = "plain") -> float:
        """Normalized ratio at a given argument tuple (recomputes an estimate's value)."""
        norms = [float(vec_norm(w)) for w in witness]
        if any(n == 0.0 for n in norms):
            return 0.0
        val = float(vec_norm(self(*witness)))
        ratio = val / math.prod(norms)
        if variant == "weighted_radial":
            ratio *= max(norms) / eps
        return ratio


@dataclass
class Bracket:
    """A 2-cochain together with its structural flags."""

    cochain: Cochain
    right_H_linear: bool = False
    antisymmetric: bool = False
    label: str = ""

    @property
    def m(self) -> int:
        return self.cochain.m

    def eval_batch(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.cochain.evaluator(x, y)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.cochain(x, y)


def zero_cochain(arity: int, m: int) -> Cochain:
    def ev(*args):
        return np.zeros_like(args[0])

    return Cochain(arity=arity, m=m, evaluator=ev, kind="multilinear", label="zero")


# ---------------------------------------------------------------------------
# Localized operator-norm estimation
# ---------------------------------------------------------------------------

@dataclass
class EstimatorBudget:
    samples: int = 400
    refine_iterations: int = 24


@dataclass
class NormEstimate:
    """Sampled lower bound of a localized operator norm.

    `value` is the ratio achieved at `argmax_witness` and can be recomputed
    from it; bound tests built on these estimates are one-sided (an estimate
    exceeding a claimed upper bound refutes the claim, a smaller one is merely
    consistent).
    """

    value: float
    samples_used: int
    refine_iterations: int
    argmax_witness: tuple
    norm_variant: str
    eps: float

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "samples_used": self.samples_used,
            "refine_iterations": self.refine_iterations,
            "norm_variant": self.norm_variant,
            "eps": self.eps,
        }


def _ratios(c: Cochain, args: Sequence[np.ndarray], eps: float, variant: str,
            denominator: Callable | None = None) -> np.ndarray:
    norms = np.stack([vec_norm(a) for a in args], axis=0)
    denom = denominator(norms) if denominator is not None else np.prod(norms, axis=0)
    vals = vec_norm(c.eval_batch(*args))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, vals / denom, 0.0)
    if variant == "weighted_radial":
        ratio = ratio * (np.max(norms, axis=0) / eps)
    return ratio


def localized_norm(
    c: Cochain,
    eps: float,
    budget: EstimatorBudget | None = None,
    variant: str = "plain",
    seed: int = 0,
    denominator: Callable | None = None,
) -> NormEstimate:
    """Estimate sup ||c(x_1..x_k)|| / prod ||x_i|| over the punctured eps-ball.

    Boundary-biased Monte Carlo (even sample indices on the eps-sphere, odd
    ones interior with radius ~ eps*u^(1/4m)) followed by greedy coordinatewise
    hill climbing from the best sample, with each argument projected back to
    its own starting radius and the step halved when no move improves.

    `denominator` replaces the default prod ||x_i|| normalization (used for the
    cubic defect-constant variant); it receives the (k, B) stack of argument
    norms.
    """
    if eps <= 0:
        raise ValueError(f"localized_norm requires eps > 0, got {eps}")
    budget = budget or EstimatorBudget()
    if budget.samples < 1:
        raise ValueError("localized_norm requires a positive sample budget")
    if variant not in ("plain", "weighted_radial"):
        raise ValueError(f"unknown norm variant {variant!r}")
    k, m = c.arity, c.m

    args = []
    for slot in range(k):
        draws = [
            sample_ball(m, eps, "sphere" if i % 2 == 0 else "interior",
                        seed, index=i * k + slot)
            for i in range(budget.samples)
        ]
        args.append(np.stack(draws, axis=0))
    ratio = _ratios(c, args, eps, variant, denominator)
    best = int(np.argmax(ratio))
    best_ratio = float(ratio[best])
    witness = [a[best].copy() for a in args]

    # Greedy best-coordinate ascent; radii held fixed so the denominator is stable.
    radii = [float(vec_norm(w)) for w in witness]
    step = 0.25
    iters = 0
    while iters < budget.refine_iterations and step > 1e-7:
        iters += 1
        cands = [[] for _ in range(k)]
        for slot in range(k):
            base = witness[slot]
            for coord in range(4 * m):
                for sgn in (1.0, -1.0):
                    pert = base.copy().reshape(-1)
                    pert[coord] += sgn * step * eps
                    pert = pert.reshape(m, 4)
                    nrm = float(vec_norm(pert))
                    if nrm > 0:
                        pert = pert * (radii[slot] / nrm)
                    cands[slot].append(pert)
        n_per_slot = len(cands[0])
        batches = []
        for slot in range(k):
            stacked = []
            for move_slot in range(k):
                if move_slot == slot:
                    stacked.append(np.stack(cands[slot], axis=0))
                else:
                    stacked.append(np.broadcast_to(witness[move_slot], (n_per_slot, m, 4)))
            batches.append(stacked)
        all_args = [np.concatenate([batches[s][a] for s in range(k)], axis=0) for a in range(k)]
        cand_ratio = _ratios(c, all_args, eps, variant, denominator)
        top = int(np.argmax(cand_ratio))
        if float(cand_ratio[top]) > best_ratio * (1 + 1e-12):
            best_ratio = float(cand_ratio[top])
            slot, idx = divmod(top, n_per_slot)
            witness[slot] = cands[slot][idx]
        else:
            step *= 0.5

    return NormEstimate(
        value=best_ratio,
        samples_used=budget.samples,
        refine_iterations=iters,
        argmax_witness=tuple(witness),
        norm_variant=variant,
        eps=eps,
    )


# ---------------------------------------------------------------------------
# Structure probes
# ---------------------------------------------------------------------------

def _probe_points(m: int, seed: int, count: int, eps: float = 1.0):
    return [sample_ball(m, eps, "sphere", seed, index=i) for i in range(count)]


def probe_multilinear(c: Cochain, seed: int = 1234, trials: int = 8, tol: float = 1e-10) -> bool:
    """Spot-check real linearity in every slot on random triples."""
    k, m = c.arity, c.m
    pts = _probe_points(m, seed, (2 * k + k * k) * trials + 4 * k)
    idx = 0
    for _ in range(trials):
        base = [pts[idx + i] for i in range(k)]
        idx += k
        for slot in range(k):
            u, v = pts[idx], pts[idx + 1]
            idx += 2
            a, b = 0.7319, -1.4127
            args_lin = list(base)
            args_lin[slot] = a * u + b * v
            lhs = c(*args_lin)
            args_u = list(base)
            args_u[slot] = u
            args_v = list(base)
            args_v[slot] = v
            rhs = a * c(*args_u) + b * c(*args_v)
            scale = max(1.0, float(vec_norm(lhs)), float(vec_norm(rhs)))
            if float(vec_norm(lhs - rhs)) > tol * scale:
                return False
    return True


def probe_antisymmetric(ev2: Callable, m: int, seed: int = 99, trials: int = 64,
                        tol: float = 1e-10) -> bool:
    pts = _probe_points(m, seed, 2 * trials)
    x = np.stack(pts[:trials], axis=0)
    y = np.stack(pts[trials:], axis=0)
    defect = vec_norm(ev2(x, y) + ev2(y, x))
    return bool(np.all(defect <= tol * vec_norm(x) * vec_norm(y) + tol))


def probe_right_linear(ev2: Callable, m: int, seed: int = 77, trials: int = 64,
                       tol: float = 1e-10) -> bool:
    """Check B(x, y q) == B(x, y) q on random samples."""
    pts = _probe_points(m, seed, 2 * trials)
    qs = [sample_ball(1, 1.0, "interior", seed + 1, index=i)[0] for i in range(trials)]
    x = np.stack(pts[:trials], axis=0)
    y = np.stack(pts[trials:], axis=0)
    q = np.stack(qs, axis=0)
    yq = qmul(y, q[:, None, :])
    lhs = ev2(x, yq)
    rhs = qmul(ev2(x, y), q[:, None, :])
    qa = np.sqrt(np.sum(q * q, axis=-1))
    return bool(np.all(vec_norm(lhs - rhs) <= tol * vec_norm(x) * vec_norm(y) * qa + tol))


# ---------------------------------------------------------------------------
# Chevalley-Eilenberg differential
# ---------------------------------------------------------------------------

def ce_differential(bracket: Bracket, omega: Cochain, probe: bool = True) -> Cochain:
    """Coboundary of a k-cochain:

        (d w)(x_0..x_k) = sum_i (-1)^i [x_i, w(.. x_i-hat ..)]
                        + sum_{i<j} (-1)^{i+j} w([x_i,x_j], .. x_i-hat .. x_j-hat ..)
    """
    k = omega.arity
    if k < 1:
        raise ValueError("ce_differential requires arity >= 1")
    bev = bracket.eval_batch
    oev = omega.evaluator

    def ev(*xs):
        out = np.zeros_like(xs[0])
        for i in range(k + 1):
            rest = xs[:i] + xs[i + 1:]
            out += ((-1.0) ** i) * bev(xs[i], oev(*rest))
        for i in range(k + 1):
            for j in range(i + 1, k + 1):
                rest = tuple(xs[t] for t in range(k + 1) if t != i and t != j)
                out += ((-1.0) ** (i + j)) * oev(bev(xs[i], xs[j]), *rest)
        return out

    d = Cochain(arity=k + 1, m=omega.m, evaluator=ev, label=f"d({omega.label})")
    if probe and omega.kind == "multilinear" and probe_multilinear(d):
        d.kind = "multilinear"
    return d


# ---------------------------------------------------------------------------
# Radial homotopy
# ---------------------------------------------------------------------------

def _gauss01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def radial_homotopy(theta: Cochain, n_nodes: int = GAUSS_NODES,
                    force_quadrature: bool = False, allow_arity_4: bool = False) -> Cochain:
    """(T Theta)(x_1..x_{k-1}) = int_0^1 t^{k-1} Theta(t x_1,..,t x_{k-1}, t*sum) dt.

    For multilinear Theta the integrand is t^(2k-1) times a constant, so the
    closed form Theta(x_1,..,sum)/(2k) is used; otherwise Gauss-Legendre with
    n_nodes (exact for the polynomial integrands produced by d/T compositions).
    Arity 4 inputs arise only inside the homotopy-defect operator and must be
    requested explicitly.
    """
    k = theta.arity
    if k != 3 and not (allow_arity_4 and k == 4):
        raise ValueError(f"radial_homotopy expects an arity-3 cochain, got arity {k}")
    tev = theta.evaluator

    if theta.kind == "multilinear" and not force_quadrature:
        def ev(*xs):
            total = xs[0].copy()
            for x in xs[1:]:
                total = total + x
            return tev(*xs, total) / (2.0 * k)
    else:
        nodes, weights = _gauss01(n_nodes)

        def ev(*xs):
            total = xs[0].copy()
            for x in xs[1:]:
                total = total + x
            full = xs + (total,)
            B = xs[0].shape[0]
            # stack the t-scaled copies along the batch axis: one evaluator call
            scaled = [
                np.concatenate([t * a for t in nodes], axis=0) for a in full
            ]
            vals = tev(*scaled).reshape(n_nodes, B, *xs[0].shape[1:])
            wt = weights * nodes ** (k - 1)
            return np.tensordot(wt, vals, axes=(0, 0))

    out = Cochain(arity=k - 1, m=theta.m, evaluator=ev, label=f"T({theta.label})")
    if probe_multilinear(out):
        out.kind = "multilinear"
    return out


# ---------------------------------------------------------------------------
# Defect cochains
# ---------------------------------------------------------------------------

def cyclic_nested(ev2: Callable, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """sum_cyc ev2(x, ev2(y, z)) -- the Jacobiator pattern.

    The three inner and three outer applications are fused into two batched
    calls, which matters when ev2 wraps a large composed correction.
    """
    B = x.shape[0]
    left = np.concatenate([y, z, x], axis=0)
    right = np.concatenate([z, x, y], axis=0)
    inner = ev2(left, right)
    outer = ev2(np.concatenate([x, y, z], axis=0), inner)
    return outer[:B] + outer[B:2 * B] + outer[2 * B:]


def jacobiator(bracket: Bracket) -> Cochain:
    """Jac(x,y,z) = [x,[y,z]] + [y,[z,x]] + [z,[x,y]] (the Jacobi defect)."""
    bev = bracket.eval_batch

    def ev(x, y, z):
        return cyclic_nested(bev, x, y, z)

    c = Cochain(arity=3, m=bracket.m, evaluator=ev, kind="multilinear",
                label=f"Jac({bracket.label})")
    return c


def antisymmetry_defect(bracket: Bracket) -> Cochain:
    """phi(x,y) = [x,y] + [y,x]; symmetric in (x, y)."""
    bev = bracket.eval_batch

    def ev(x, y):
        return bev(x, y) + bev(y, x)

    return Cochain(arity=2, m=bracket.m, evaluator=ev, kind="multilinear",
                   label=f"phi({bracket.label})")


def quadratic_remainder(phi: Cochain, bracket: Bracket) -> Cochain:
    """Quadratic remainder of a bilinear correction:

        Q(Phi)(x,y,z) = -(Phi(x,Phi(y,z)) + cyc) + ([Phi(x,y),z] + cyc)
    """
    if phi.arity != 2:
        raise ValueError("quadratic_remainder expects an arity-2 cochain")
    pev = phi.evaluator
    bev = bracket.eval_batch

    def ev(x, y, z):
        nested = cyclic_nested(pev, x, y, z)
        outer = bev(pev(x, y), z) + bev(pev(y, z), x) + bev(pev(z, x), y)
        return outer - nested

    return Cochain(arity=3, m=phi.m, evaluator=ev, label=f"Q({phi.label})")


# ---------------------------------------------------------------------------
# Radial trace (the t->0 boundary term)
# ---------------------------------------------------------------------------

def radial_trace(theta: Cochain, t_sequence: Sequence[float] | None = None,
                 tol: float = 1e-6) -> Cochain:
    """Evaluator of lim_{t->0} t^2 Theta(tx, ty, t(x+y)).

    Values along t_sequence are Aitken-extrapolated (three-point Richardson);
    the evaluation raises RadialTraceDivergence when the last two extrapolants
    disagree by more than `tol`, or when the raw values fail to decay at all
    (a scaling-degree <= -2 cochain, outside the representable class).
    """
    if theta.arity != 3:
        raise ValueError("radial_trace expects an arity-3 cochain")
    if t_sequence is None:
        t_sequence = [0.5 ** i for i in range(1, 9)]
    ts = list(t_sequence)
    if len(ts) < 4 or any(t2 >= t1 for t1, t2 in zip(ts, ts[1:])) or ts[-1] <= 0:
        raise ValueError("t_sequence must have >= 4 strictly decreasing positive entries")
    tev = theta.evaluator

    def aitken(v0, v1, v2):
        d1, d2 = v1 - v0, v2 - v1
        dd = d2 - d1
        safe = np.abs(dd) > 1e-300
        corr = np.where(safe, np.divide(d2 * d2, dd, where=safe), 0.0)
        return v2 - corr

    def ev(x, y, z):
        vals = []
        for t in ts:
            vals.append((t ** 2) * tev(t * x, t * y, t * (x + y)))
        ext_last = aitken(vals[-3], vals[-2], vals[-1])
        ext_prev = aitken(vals[-4], vals[-3], vals[-2])
        scale = max(1.0, float(np.max(np.abs(vals[0]))))
        if float(np.max(np.abs(ext_last - ext_prev))) > tol * scale:
            raise RadialTraceDivergence("radial trace: extrapolants do not stabilize")
        head = float(np.max(np.abs(vals[0])))
        tail = float(np.max(np.abs(vals[-1])))
        if head > tol and tail > 0.5 * head:
            raise RadialTraceDivergence("radial trace: values do not decay as t -> 0")
        return ext_last

    return Cochain(arity=3, m=theta.m, evaluator=ev, label=f"Pi({theta.label})")
