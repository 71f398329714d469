"""Structural constants (A, C1, C2) and the admissible-radius arithmetic.

A bounds the bracket, C1 the antisymmetry defect phi (in two conventions:
2*C1*|x||y| bilinear and C1*|x||y|(|x|+|y|) cubic), and C2 the Jacobi defect
psi via 6*C2*|x||y||z|.  All values are sampled lower bounds produced by the
localized-norm estimator, reproducible from (bracket, eps0, budget, seed).

The admissible radius combines three branches,

    eps_star = min( 24/(5A),  sqrt(48/(5*C1)),  eps0 )        (standard)
    eps_star = min( 12/(5A),  sqrt(24/(5*C1)),  eps0 )        (refined)

with inactive branches mapped to +inf when a constant vanishes.  The defect
operator bound curve (6A/5)*eps + (12C1/5)*eps^2 is evaluated alongside the
coarser 4*eps*(A+C1) variant; the report also carries the two term-wise
sufficient conditions (< 1/4 each) from which the branch values derive.  Note
the branch arithmetic and the direct bound evaluation are deliberately both
reported: at eps_star the quadratic bound generally exceeds 1/2, so which
quantity certifies the Neumann inversion is left to the caller's judgment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cochain import (Bracket, EstimatorBudget, antisymmetry_defect, jacobiator,
                      localized_norm)

__all__ = ["ConstantEstimates", "ThresholdReport", "estimate_constants",
           "compute_eps_star", "m_bound_curve"]


@dataclass
class ConstantEstimates:
    A: float
    C1_bilinear: float
    C1_cubic: float
    C2: float
    eps0: float
    samples: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "A": self.A,
            "C1_bilinear": self.C1_bilinear,
            "C1_cubic": self.C1_cubic,
            "C2": self.C2,
            "eps0": self.eps0,
            "samples": self.samples,
            "seed": self.seed,
        }


@dataclass
class ThresholdReport:
    eps_star: float
    branch_A: float
    branch_C1: float
    branch_eps0: float
    variant: str
    A: float
    C1: float

    def m_bound_at(self, eps: float) -> float:
        return (6.0 * self.A / 5.0) * eps + (12.0 * self.C1 / 5.0) * eps * eps

    def as_dict(self) -> dict:
        return {
            "eps_star": self.eps_star,
            "branch_A": self.branch_A,
            "branch_C1": self.branch_C1,
            "branch_eps0": self.branch_eps0,
            "variant": self.variant,
        }


def estimate_constants(bracket: Bracket, eps0: float,
                       budget: EstimatorBudget | None = None,
                       seed: int = 0) -> ConstantEstimates:
    """Sample the bilinear bound and both defect constants on B(0, eps0)."""
    if eps0 <= 0:
        raise ValueError(f"estimate_constants requires eps0 > 0, got {eps0}")
    budget = budget or EstimatorBudget()
    a_est = localized_norm(bracket.cochain, eps0, budget, seed=seed)
    phi = antisymmetry_defect(bracket)
    phi_est = localized_norm(phi, eps0, budget, seed=seed + 1)
    cubic_est = localized_norm(
        phi, eps0, budget, seed=seed + 2,
        denominator=lambda norms: np.prod(norms, axis=0) * np.sum(norms, axis=0),
    )
    psi = jacobiator(bracket)
    psi_est = localized_norm(psi, eps0, budget, seed=seed + 3)
    return ConstantEstimates(
        A=a_est.value,
        C1_bilinear=0.5 * phi_est.value,
        C1_cubic=cubic_est.value,
        C2=psi_est.value / 6.0,
        eps0=eps0,
        samples=budget.samples,
        seed=seed,
    )


def compute_eps_star(A: float, C1: float, eps0: float,
                     variant: str = "standard") -> ThresholdReport:
    """Admissible radius; a vanishing constant deactivates its branch (+inf)."""
    if A < 0 or C1 < 0:
        raise ValueError("constants must be nonnegative")
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    if variant == "standard":
        ca, cc = 24.0, 48.0
    elif variant == "refined":
        ca, cc = 12.0, 24.0
    else:
        raise ValueError(f"unknown threshold variant {variant!r}")
    branch_a = ca / (5.0 * A) if A > 0 else math.inf
    branch_c1 = math.sqrt(cc / (5.0 * C1)) if C1 > 0 else math.inf
    return ThresholdReport(
        eps_star=min(branch_a, branch_c1, eps0),
        branch_A=branch_a,
        branch_C1=branch_c1,
        branch_eps0=eps0,
        variant=variant,
        A=A,
        C1=C1,
    )


def m_bound_curve(A: float, C1: float, eps_grid) -> list[dict]:
    """Evaluate both defect-operator bound formulas on a grid of radii.

    Each row carries the quadratic bound (6A/5)e + (12C1/5)e^2, the coarse
    alternative 4e(A+C1), whether each has crossed 1/2 for the first time,
    and the two term-wise sufficient conditions the threshold branches encode.
    """
    rows = []
    crossed_quad = crossed_coarse = False
    for eps in eps_grid:
        if eps <= 0:
            raise ValueError("eps grid values must be positive")
        linear_term = (6.0 * A / 5.0) * eps
        quad_term = (12.0 * C1 / 5.0) * eps * eps
        quad = linear_term + quad_term
        coarse = 4.0 * eps * (A + C1)
        row = {
            "eps": eps,
            "bound_quadratic": quad,
            "bound_coarse": coarse,
            "first_crossing_quadratic": bool(quad >= 0.5 and not crossed_quad),
            "first_crossing_coarse": bool(coarse >= 0.5 and not crossed_coarse),
            "linear_term_below_quarter": bool(linear_term < 0.25),
            "quadratic_term_below_quarter": bool(quad_term < 0.25),
        }
        crossed_quad = crossed_quad or quad >= 0.5
        crossed_coarse = crossed_coarse or coarse >= 0.5
        rows.append(row)
    return rows
