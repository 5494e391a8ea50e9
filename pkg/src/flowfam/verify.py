"""Sampled verification of the flow-family conditions.

A family that genuinely comes from an ODE satisfies, wherever defined:

  identity          F_{ss}(a) = a
  inverse           F_{rs}(F_{sr}(a)) = a
  cocycle           F_{ts}(F_{sr}(a)) = F_{tr}(a) under the domain guard
  domain_inclusion  (r,s,a) in K implies (s,s,a) in K
  interval          {t : (t,r,a) in K} has no gaps
  openness          K is open (probed along coordinate axes)

These quantify over continua, so the checks sample: a deterministic grid
(the plan's time and state grids) plus seeded random draws.  Identical
(plan, family) pairs produce bit-identical reports; each check builds its
own generator from the plan seed, so report content does not depend on
which checks run or in what order.

The cocycle guard evaluates the two legs first and treats a failure of
either as a skip, never letting a DomainViolation escape; when both legs
succeed but the direct map is undefined, that is itself a violation of the
condition and is reported with an infinite residual.  Bijectivity is
certified through the inverse check (injectivity plus surjectivity at the
sampled points); surjectivity onto an analytically-specified codomain is
not separately sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterator

import numpy as np

from .core import DomainViolation, FlowFamily, inf_norm

__all__ = [
    "SamplePlan",
    "SuiteTolerances",
    "ConditionReport",
    "VerificationReport",
    "default_plan",
    "check_identity",
    "check_inverse",
    "check_cocycle",
    "check_domain_inclusion",
    "check_interval",
    "check_openness",
    "run_suite",
    "CONDITION_NAMES",
]

CONDITION_NAMES = (
    "identity",
    "inverse",
    "cocycle",
    "domain_inclusion",
    "interval",
    "openness",
)


@dataclass(frozen=True)
class SamplePlan:
    """Deterministic grids plus a seeded budget of random samples."""

    time_grid: tuple[float, ...]
    state_grid: tuple[tuple[float, ...], ...]
    random_count: int = 25
    seed: int = 12345

    def __post_init__(self):
        if len(self.time_grid) == 0 or len(self.state_grid) == 0:
            raise ValueError("time_grid and state_grid must be nonempty")
        times = tuple(float(t) for t in self.time_grid)
        if any(not math.isfinite(t) for t in times):
            raise ValueError("time_grid entries must be finite")
        if list(times) != sorted(times):
            raise ValueError("time_grid must be sorted")
        object.__setattr__(self, "time_grid", times)
        states = tuple(tuple(float(c) for c in s) for s in self.state_grid)
        widths = {len(s) for s in states}
        if len(widths) != 1:
            raise ValueError("state_grid entries must share one dimension")
        object.__setattr__(self, "state_grid", states)
        if self.random_count < 0:
            raise ValueError("random_count must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def n(self) -> int:
        return len(self.state_grid[0])

    def _rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def random_times(self, rng, count: int) -> np.ndarray:
        lo, hi = self.time_grid[0], self.time_grid[-1]
        return rng.uniform(lo, hi, size=count)

    def random_states(self, rng, count: int) -> np.ndarray:
        box = np.asarray(self.state_grid, dtype=float)
        return rng.uniform(box.min(axis=0), box.max(axis=0), size=(count, self.n))


def default_plan(n: int, random_count: int = 25, seed: int = 12345) -> SamplePlan:
    """Stock plan used by the command-line tool; sensible for n <= 3."""
    times = (-1.0, -0.5, 0.0, 0.5, 1.0, 1.5)
    if n == 1:
        states = ((-1.0,), (-0.5,), (0.0,), (0.25,), (0.5,))
    else:
        states = tuple(product((-1.0, 0.0, 1.0), repeat=n))
    return SamplePlan(times, states, random_count=random_count, seed=seed)


@dataclass(frozen=True)
class SuiteTolerances:
    """Residual thresholds; the set-based checks count violations against 0."""

    identity: float = 1e-9
    inverse: float = 1e-9
    cocycle: float = 1e-9
    openness_delta: float = 1e-4


@dataclass(frozen=True)
class ConditionReport:
    condition_name: str
    samples_checked: int
    samples_skipped: int
    max_residual: float
    worst_case: dict | None
    tolerance: float
    passed: bool
    note: str | None = None


@dataclass(frozen=True)
class VerificationReport:
    conditions: tuple[ConditionReport, ...]
    passed: bool

    def by_name(self, name: str) -> ConditionReport:
        for rep in self.conditions:
            if rep.condition_name == name:
                return rep
        raise KeyError(name)


class _Accumulator:
    """Residual max-tracker with stable worst-case selection."""

    def __init__(self):
        self.checked = 0
        self.skipped = 0
        self.max_residual = -math.inf
        self.worst = None

    def skip(self):
        self.skipped += 1

    def record(self, residual: float, witness: dict):
        self.checked += 1
        if residual > self.max_residual:
            self.max_residual = residual
            self.worst = witness

    def report(self, name: str, tol: float, note: str | None = None, force_fail: bool = False):
        max_res = self.max_residual if self.checked else 0.0
        passed = (not force_fail) and max_res <= tol
        return ConditionReport(
            condition_name=name,
            samples_checked=self.checked,
            samples_skipped=self.skipped,
            max_residual=max_res,
            worst_case=self.worst,
            tolerance=tol,
            passed=passed,
            note=note,
        )


def _pairs(plan: SamplePlan) -> Iterator[tuple[float, np.ndarray]]:
    """(time, state) samples: grid product, then the random batch."""
    for t in plan.time_grid:
        for s in plan.state_grid:
            yield t, np.asarray(s, dtype=float)
    rng = plan._rng()
    times = plan.random_times(rng, plan.random_count)
    states = plan.random_states(rng, plan.random_count)
    for t, s in zip(times, states):
        yield float(t), s


def _triples(plan: SamplePlan) -> Iterator[tuple[float, float, np.ndarray]]:
    for t1 in plan.time_grid:
        for t2 in plan.time_grid:
            for s in plan.state_grid:
                yield t1, t2, np.asarray(s, dtype=float)
    rng = plan._rng()
    t1s = plan.random_times(rng, plan.random_count)
    t2s = plan.random_times(rng, plan.random_count)
    states = plan.random_states(rng, plan.random_count)
    for t1, t2, s in zip(t1s, t2s, states):
        yield float(t1), float(t2), s


def _quadruples(plan: SamplePlan) -> Iterator[tuple[float, float, float, np.ndarray]]:
    for t1 in plan.time_grid:
        for t2 in plan.time_grid:
            for t3 in plan.time_grid:
                for s in plan.state_grid:
                    yield t1, t2, t3, np.asarray(s, dtype=float)
    rng = plan._rng()
    t1s = plan.random_times(rng, plan.random_count)
    t2s = plan.random_times(rng, plan.random_count)
    t3s = plan.random_times(rng, plan.random_count)
    states = plan.random_states(rng, plan.random_count)
    for t1, t2, t3, s in zip(t1s, t2s, t3s, states):
        yield float(t1), float(t2), float(t3), s


def check_identity(fam: FlowFamily, plan: SamplePlan, tol: float = 1e-9) -> ConditionReport:
    """F_{ss}(a) must return a wherever the diagonal triple is in the domain."""
    acc = _Accumulator()
    for sigma, a in _pairs(plan):
        try:
            out = fam.evaluate(sigma, sigma, a)
        except DomainViolation:
            acc.skip()
            continue
        acc.record(inf_norm(out - a), {"sigma": sigma, "a": list(a)})
    return acc.report("identity", tol)


def check_inverse(fam: FlowFamily, plan: SamplePlan, tol: float = 1e-9) -> ConditionReport:
    """Composing F_{sr} with F_{rs} must restore the state when both legs exist."""
    acc = _Accumulator()
    for rho, sigma, a in _triples(plan):
        try:
            mid = fam.evaluate(sigma, rho, a)
        except DomainViolation:
            acc.skip()
            continue
        try:
            back = fam.evaluate(rho, sigma, mid)
        except DomainViolation:
            acc.skip()
            continue
        acc.record(inf_norm(back - a), {"rho": rho, "sigma": sigma, "a": list(a)})
    return acc.report("inverse", tol)


def check_cocycle(fam: FlowFamily, plan: SamplePlan, tol: float = 1e-9) -> ConditionReport:
    """Two-hop versus direct transport under the exact domain guard.

    Guard: (sigma, rho, a) in K and (tau, sigma, F_{sigma rho}(a)) in K.
    A guarded sample whose direct map F_{tau rho}(a) is undefined violates
    the condition and scores an infinite residual.
    """
    acc = _Accumulator()
    note = None
    for tau, sigma, rho, a in _quadruples(plan):
        try:
            hop = fam.evaluate(sigma, rho, a)
        except DomainViolation:
            acc.skip()
            continue
        try:
            two_leg = fam.evaluate(tau, sigma, hop)
        except DomainViolation:
            acc.skip()
            continue
        witness = {"tau": tau, "sigma": sigma, "rho": rho, "a": list(a)}
        try:
            direct = fam.evaluate(tau, rho, a)
        except DomainViolation:
            acc.record(math.inf, witness)
            note = "guard held but the direct map was undefined"
            continue
        acc.record(inf_norm(two_leg - direct), witness)
    return acc.report("cocycle", tol, note=note)


def check_domain_inclusion(fam: FlowFamily, plan: SamplePlan) -> ConditionReport:
    """Membership of (rho, sigma, a) must imply membership of (sigma, sigma, a).

    The residual is the violation count over the applicable samples.
    """
    checked = skipped = violations = 0
    worst = None
    for rho, sigma, a in _triples(plan):
        if not fam.in_domain(rho, sigma, a):
            skipped += 1
            continue
        checked += 1
        if not fam.in_domain(sigma, sigma, a):
            violations += 1
            if worst is None:
                worst = {"rho": rho, "sigma": sigma, "a": list(a)}
    return ConditionReport(
        condition_name="domain_inclusion",
        samples_checked=checked,
        samples_skipped=skipped,
        max_residual=float(violations),
        worst_case=worst,
        tolerance=0.0,
        passed=violations == 0,
    )


def check_interval(fam: FlowFamily, plan: SamplePlan) -> ConditionReport:
    """The in-domain times over the grid must form one contiguous block per (rho, a).

    Each (rho, a) anchor scans the sorted time grid; a false between the
    first and last true is a gap.  The residual counts gaps over all anchors.
    """
    checked = violations = 0
    worst = None
    rng = plan._rng()
    anchors = [
        (rho, np.asarray(s, dtype=float)) for rho in plan.time_grid for s in plan.state_grid
    ]
    anchors += [
        (float(t), s)
        for t, s in zip(
            plan.random_times(rng, plan.random_count),
            plan.random_states(rng, plan.random_count),
        )
    ]
    for rho, a in anchors:
        checked += 1
        flags = [fam.in_domain(tau, rho, a) for tau in plan.time_grid]
        inside = [i for i, f in enumerate(flags) if f]
        if not inside:
            continue  # nothing defined at this anchor; vacuously contiguous
        for i in range(inside[0], inside[-1] + 1):
            if not flags[i]:
                violations += 1
                if worst is None:
                    worst = {"rho": rho, "a": list(a), "tau": plan.time_grid[i]}
    return ConditionReport(
        condition_name="interval",
        samples_checked=checked,
        samples_skipped=0,
        max_residual=float(violations),
        worst_case=worst,
        tolerance=0.0,
        passed=violations == 0,
    )


def check_openness(fam: FlowFamily, plan: SamplePlan, delta: float = 1e-4) -> ConditionReport:
    """Axis-probe openness of the domain set K.

    An in-domain sample whose 2(n+2) axis perturbations at distance delta
    all stay in-domain counts as strictly interior; its delta/2 probes must
    then be in-domain too, and each failed half-probe counts as a violation.
    Samples with any delta probe outside sit within delta of a boundary and
    are skipped.  An empty K over the whole plan fails outright.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    checked = skipped = violations = 0
    worst = None
    nonempty = False
    for tau, sigma, a in _triples(plan):
        if not fam.in_domain(tau, sigma, a):
            skipped += 1
            continue
        nonempty = True
        if not all(fam.in_domain(*p) for p in _axis_probes(tau, sigma, a, delta)):
            skipped += 1  # within delta of a boundary
            continue
        checked += 1
        bad = sum(
            0 if fam.in_domain(*p) else 1 for p in _axis_probes(tau, sigma, a, delta / 2.0)
        )
        if bad:
            violations += bad
            if worst is None:
                worst = {"tau": tau, "sigma": sigma, "a": list(a)}
    if not nonempty:
        return ConditionReport(
            condition_name="openness",
            samples_checked=0,
            samples_skipped=skipped,
            max_residual=math.inf,
            worst_case=None,
            tolerance=0.0,
            passed=False,
            note="K empty over plan",
        )
    return ConditionReport(
        condition_name="openness",
        samples_checked=checked,
        samples_skipped=skipped,
        max_residual=float(violations),
        worst_case=worst,
        tolerance=0.0,
        passed=violations == 0,
    )


def _axis_probes(tau: float, sigma: float, a: np.ndarray, eps: float):
    yield tau + eps, sigma, a
    yield tau - eps, sigma, a
    yield tau, sigma + eps, a
    yield tau, sigma - eps, a
    for k in range(a.shape[0]):
        for sign in (eps, -eps):
            shifted = a.copy()
            shifted[k] += sign
            yield tau, sigma, shifted


def run_suite(
    fam: FlowFamily,
    plan: SamplePlan,
    tolerances: SuiteTolerances | None = None,
) -> VerificationReport:
    """All six checks in canonical order; overall pass is their conjunction."""
    tols = tolerances or SuiteTolerances()
    reports = (
        check_identity(fam, plan, tols.identity),
        check_inverse(fam, plan, tols.inverse),
        check_cocycle(fam, plan, tols.cocycle),
        check_domain_inclusion(fam, plan),
        check_interval(fam, plan),
        check_openness(fam, plan, tols.openness_delta),
    )
    return VerificationReport(conditions=reports, passed=all(r.passed for r in reports))
