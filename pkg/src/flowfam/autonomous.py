"""Time-translation invariance and the one-parameter reduction.

A family that only depends on the difference of its two times collapses to
a single map G with G_alpha = F_{alpha, 0}; composing G with itself walks
the family along the diagonal, and the group law G_alpha(G_beta(a)) =
G_{alpha+beta}(a) replaces the two-parameter composition rule.  Detection
is sampled: shift every (tau, rho, a) sample by each plan time and compare.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DomainViolation, FlowFamily, as_state, inf_norm
from .verify import ConditionReport, SamplePlan, _Accumulator, _triples, default_plan

__all__ = [
    "OneParamGroup",
    "NotAutonomous",
    "check_time_shift",
    "detect_autonomous",
    "to_group",
    "check_group_law",
    "family_from_group",
]


class NotAutonomous(Exception):
    """The family failed (or never passed) the time-shift check."""


@dataclass(frozen=True)
class OneParamGroup:
    """One-parameter family of maps G_alpha with G_0 the identity.

    g(alpha, a) returns the moved state or raises DomainViolation;
    domain_query(alpha, a) answers membership without evaluating side
    effects.  tol_hint carries the accuracy of a numerically-backed group.
    """

    n: int
    g: Callable = field(repr=False)
    domain_query: Callable = field(repr=False)
    tol_hint: float = 0.0

    def evaluate(self, alpha: float, a) -> np.ndarray:
        arr = as_state(a, self.n)
        if not math.isfinite(alpha):
            raise ValueError("group parameter must be finite")
        return as_state(self.g(float(alpha), arr), self.n)

    def in_domain(self, alpha: float, a) -> bool:
        arr = as_state(a, self.n)
        try:
            return bool(self.domain_query(float(alpha), arr))
        except DomainViolation:
            return False


def _autonomy_tol(fam: FlowFamily) -> float:
    # closed forms are compared at full precision; numeric families carry
    # integration error on both sides of the shift
    return 1e-9 if fam.tol_hint == 0.0 else 50.0 * fam.tol_hint


def check_time_shift(fam: FlowFamily, plan: SamplePlan, tol: float | None = None) -> ConditionReport:
    """Residual of F_{tau+c, rho+c}(a) = F_{tau, rho}(a) over plan shifts c."""
    tol = _autonomy_tol(fam) if tol is None else tol
    acc = _Accumulator()
    for tau, rho, a in _triples(plan):
        try:
            base = fam.evaluate(tau, rho, a)
        except DomainViolation:
            acc.skip()
            continue
        for c in plan.time_grid:
            try:
                shifted = fam.evaluate(tau + c, rho + c, a)
            except DomainViolation:
                acc.skip()
                continue
            acc.record(
                inf_norm(shifted - base),
                {"tau": tau, "rho": rho, "shift": c, "a": list(map(float, a))},
            )
    return acc.report("time_shift", tol)


def detect_autonomous(fam: FlowFamily, plan: SamplePlan | None = None, tol: float | None = None) -> bool:
    plan = plan or default_plan(fam.n)
    return check_time_shift(fam, plan, tol).passed


def to_group(fam: FlowFamily, plan: SamplePlan | None = None, tol: float | None = None) -> OneParamGroup:
    """Collapse an autonomous family to G_alpha = F_{alpha, 0}.

    Runs the time-shift check first and refuses families that fail it;
    pass a tailored plan when the default grid sits outside the family's
    useful range.
    """
    plan = plan or default_plan(fam.n)
    report = check_time_shift(fam, plan, tol)
    if not report.passed:
        raise NotAutonomous(
            f"time-shift residual {report.max_residual:.3g} exceeds {report.tolerance:.3g} "
            f"at {report.worst_case}"
        )

    def g(alpha: float, a: np.ndarray) -> np.ndarray:
        return fam.evaluate(alpha, 0.0, a)

    def domain_query(alpha: float, a: np.ndarray) -> bool:
        return fam.in_domain(alpha, 0.0, a)

    return OneParamGroup(n=fam.n, g=g, domain_query=domain_query, tol_hint=fam.tol_hint)


def check_group_law(group: OneParamGroup, plan: SamplePlan, tol: float = 1e-9) -> ConditionReport:
    """Residual of G_alpha(G_beta(a)) = G_{alpha+beta}(a) over guarded triples.

    The guard requires both legs of the composition; a sample whose legs
    exist while the direct map is undefined scores an infinite residual,
    matching the two-parameter composition check.
    """
    acc = _Accumulator()
    note = None
    for alpha, beta, a in _triples(plan):
        try:
            inner = group.evaluate(beta, a)
            outer = group.evaluate(alpha, inner)
        except DomainViolation:
            acc.skip()
            continue
        witness = {"alpha": alpha, "beta": beta, "a": list(map(float, a))}
        try:
            direct = group.evaluate(alpha + beta, a)
        except DomainViolation:
            acc.record(math.inf, witness)
            note = "legs of the composition exist but the direct map is undefined"
            continue
        acc.record(inf_norm(outer - direct), witness)
    return acc.report("group_law", tol, note=note)


def family_from_group(group: OneParamGroup) -> FlowFamily:
    """Spread a one-parameter group back out as F_{tau, sigma} = G_{tau-sigma}."""

    def evaluator(tau: float, sigma: float, a: np.ndarray) -> np.ndarray:
        return group.g(tau - sigma, a)

    def domain_query(tau: float, sigma: float, a: np.ndarray) -> bool:
        return group.domain_query(tau - sigma, a)

    return FlowFamily(
        n=group.n,
        kind="group_backed",
        evaluator=evaluator,
        domain_query=domain_query,
        tol_hint=group.tol_hint,
    )
