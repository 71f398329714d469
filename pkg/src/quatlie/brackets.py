"""Bracket families used across the workbench.

commutator:  [x, y]_i = x_i y_i - y_i x_i componentwise; an exact Lie bracket
             (antisymmetric, Jacobi) used as the degeneration reference.
gamma:       the deformed bracket on H^2,
             [(a,b),(c,d)] = (ad - bc) + gamma*(conj(a)c - conj(b)d),
             R-bilinear and right H-linear in the second slot.  Its value is a
             single quaternion, re-embedded as (r, 0) to keep X x X -> X.
"""

from __future__ import annotations

import numpy as np

from .cochain import Bracket, Cochain
from .quaternion import qconj, qmul

__all__ = ["commutator_bracket", "gamma_bracket", "make_bracket", "symmetric_product_bracket"]


def commutator_bracket(m: int = 1) -> Bracket:
    def ev(x, y):
        return qmul(x, y) - qmul(y, x)

    c = Cochain(arity=2, m=m, evaluator=ev, kind="multilinear", label="commutator")
    return Bracket(cochain=c, right_H_linear=False, antisymmetric=True, label="commutator")


def gamma_bracket(gamma: float) -> Bracket:
    """The gamma-deformed bracket on X = H^2; non-Lie for generic inputs."""
    g = float(gamma)

    def ev(x, y):
        a, b = x[..., 0, :], x[..., 1, :]
        c, d = y[..., 0, :], y[..., 1, :]
        r = qmul(a, d) - qmul(b, c) + g * (qmul(qconj(a), c) - qmul(qconj(b), d))
        out = np.zeros_like(x)
        out[..., 0, :] = r
        return out

    c = Cochain(arity=2, m=2, evaluator=ev, kind="multilinear", label=f"gamma({g})")
    return Bracket(cochain=c, right_H_linear=True, antisymmetric=False, label=f"gamma({g})")


def symmetric_product_bracket(m: int = 1) -> Bracket:
    """x o y = (xy + yx)/2 componentwise; fully symmetric test bracket."""

    def ev(x, y):
        return 0.5 * (qmul(x, y) + qmul(y, x))

    c = Cochain(arity=2, m=m, evaluator=ev, kind="multilinear", label="symmetric")
    return Bracket(cochain=c, right_H_linear=False, antisymmetric=False, label="symmetric")


def make_bracket(family: str, gamma: float = 0.0, m: int = 1) -> Bracket:
    if family == "commutator":
        return commutator_bracket(m)
    if family == "gamma":
        return gamma_bracket(gamma)
    if family == "symmetric":
        return symmetric_product_bracket(m)
    raise ValueError(f"unknown bracket family {family!r}")
