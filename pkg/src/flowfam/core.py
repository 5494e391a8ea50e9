"""Shared domain types: states, vector fields, and two-parameter flow families.

A flow family F assigns to parameter pairs (tau, sigma) a partial map on
states, F_{tau sigma}(a), read as "the state at time tau of the solution
passing through a at time sigma".  Families arrive from four sources
(closed-form expressions, numerical integration, one-parameter groups,
affine decompositions) but expose one contract: ``evaluate`` and
``in_domain`` over triples (tau, sigma, a), agreeing with each other
pointwise.  Everything is immutable after construction, so values can be
shared across threads without locks.

Tolerance convention used package-wide: componentwise
``|err_i| <= atol + rtol*|ref_i|`` with defaults ``atol = rtol = 1e-9``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import expr as ex

__all__ = [
    "DomainViolation",
    "as_state",
    "inf_norm",
    "state_close",
    "DomainSpec",
    "VectorField",
    "FlowFamily",
    "closed_form_family",
    "EscapeInterval",
    "CompleteSolution",
    "solution_value",
    "ESCAPE_KINDS",
    "DEFAULT_ATOL",
    "DEFAULT_RTOL",
]

DEFAULT_ATOL = 1e-9
DEFAULT_RTOL = 1e-9

# endpoint classifications for escape intervals
ESCAPE_KINDS = ("blow_up", "left_domain", "window_limit", "unbounded", "step_underflow")


class DomainViolation(Exception):
    """Evaluation attempted outside a family's domain.

    kind: ``out_of_domain`` (triple not in the domain set K) or
    ``dimension_mismatch`` (state of the wrong length).
    """

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def as_state(values, n: int | None = None) -> np.ndarray:
    """Coerce to an immutable float64 state vector, checking finiteness."""
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    if n is not None and arr.shape != (n,):
        raise ValueError(f"state has length {arr.shape[0]}, expected {n}")
    if arr.size == 0:
        raise ValueError("state must have at least one component")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state components must be finite")
    arr.flags.writeable = False
    return arr


def inf_norm(v) -> float:
    return float(np.max(np.abs(np.asarray(v, dtype=float))))


def state_close(a, b, atol: float = DEFAULT_ATOL, rtol: float = DEFAULT_RTOL) -> bool:
    """Componentwise |a-b| <= atol + rtol*|a|, the package-wide comparison."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        return False
    return bool(np.all(np.abs(a - b) <= atol + rtol * np.abs(a)))


# ---------------------------------------------------------------------------
# Vector fields and their domains

@dataclass(frozen=True)
class DomainSpec:
    """Open subset of (t, x) space where a vector field is defined.

    Membership = t inside the open time_box AND space_predicate > 0 (when a
    predicate is present).  Strict inequalities keep the set open by
    construction.  blowup_radius is not part of membership; it is the
    threshold past which integration declares a blow-up.
    """

    n: int
    time_box: tuple[float, float] = (-math.inf, math.inf)
    space_predicate: ex.Expression | None = None
    blowup_radius: float = 1e6

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        lo, hi = self.time_box
        if not lo < hi:
            raise ValueError("time_box must be a non-empty open interval")
        if not self.blowup_radius > 0:
            raise ValueError("blowup_radius must be positive")
        if isinstance(self.space_predicate, str):
            object.__setattr__(self, "space_predicate", ex.parse(self.space_predicate))
        if self.space_predicate is not None:
            ex.validate(self.space_predicate, self.n)

    def contains(self, t: float, x) -> bool:
        """Total membership test; evaluation failures count as outside."""
        lo, hi = self.time_box
        if not (lo < t < hi) or not math.isfinite(t):
            return False
        if self.space_predicate is None:
            return True
        try:
            return ex.evaluate_expr(self.space_predicate, t, x) > 0.0
        except ex.EvalError:
            return False


def _as_expression(e) -> ex.Expression:
    return ex.parse(e) if isinstance(e, str) else e


@dataclass(frozen=True)
class VectorField:
    """Right-hand side f(t, x) of an n-dimensional first-order ODE."""

    n: int
    domain: DomainSpec
    rhs: tuple[ex.Expression, ...]

    def __post_init__(self):
        if len(self.rhs) != self.n:
            raise ValueError(f"need {self.n} rhs components, got {len(self.rhs)}")
        if self.domain.n != self.n:
            raise ValueError("domain dimension does not match field dimension")
        for component in self.rhs:
            ex.validate(component, self.n)

    @classmethod
    def from_strings(cls, components: Sequence[str], domain: DomainSpec) -> "VectorField":
        return cls(domain.n, domain, tuple(ex.parse(c) for c in components))

    def __call__(self, t: float, x) -> np.ndarray:
        return np.array([ex.evaluate_expr(c, t, x) for c in self.rhs], dtype=float)


# ---------------------------------------------------------------------------
# Flow families

@dataclass(frozen=True)
class FlowFamily:
    """Two-parameter family of partial maps on states.

    evaluator(tau, sigma, a) returns the mapped state or raises
    DomainViolation(out_of_domain); domain_query(tau, sigma, a) is the
    matching membership test.  The two must agree: membership true iff
    evaluation succeeds.  tol_hint records the intrinsic accuracy of the
    evaluator (0 means exact up to rounding), which downstream checks use
    to widen their tolerances for integration-backed families.
    """

    n: int
    kind: str  # closed_form | numeric | group_backed | affine_backed
    evaluator: Callable[[float, float, np.ndarray], np.ndarray]
    domain_query: Callable[[float, float, np.ndarray], bool]
    tol_hint: float = 0.0

    def __post_init__(self):
        if self.kind not in ("closed_form", "numeric", "group_backed", "affine_backed"):
            raise ValueError(f"unknown family kind '{self.kind}'")
        if self.n < 1:
            raise ValueError("dimension must be >= 1")

    def _coerce(self, a) -> np.ndarray:
        arr = np.asarray(a, dtype=float).reshape(-1)
        if arr.shape != (self.n,):
            raise DomainViolation(
                "dimension_mismatch",
                f"state has length {arr.shape[0]}, family dimension is {self.n}",
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("state components must be finite")
        return arr

    def evaluate(self, tau: float, sigma: float, a) -> np.ndarray:
        """F_{tau sigma}(a); raises DomainViolation outside the domain set."""
        arr = self._coerce(a)
        if not (math.isfinite(tau) and math.isfinite(sigma)):
            raise ValueError("parameters tau, sigma must be finite")
        return as_state(self.evaluator(float(tau), float(sigma), arr), self.n)

    def in_domain(self, tau: float, sigma: float, a) -> bool:
        """Total membership test for the triple (tau, sigma, a)."""
        arr = self._coerce(a)  # dimension errors are caller bugs, let them out
        if not (math.isfinite(tau) and math.isfinite(sigma)):
            return False
        try:
            return bool(self.domain_query(float(tau), float(sigma), arr))
        except DomainViolation:
            return False


def closed_form_family(
    n: int,
    components: Sequence,
    predicate=None,
    time_box: tuple[float, float] | None = None,
    kind: str = "closed_form",
    tol_hint: float = 0.0,
) -> FlowFamily:
    """Build a family from explicit component expressions over (tau, sigma, a).

    Membership requires tau and sigma inside the open time_box (when given),
    predicate > 0 (when given), and every component to evaluate to a finite
    value; evaluation and membership therefore agree by construction.
    """
    comps = tuple(_as_expression(c) for c in components)
    if len(comps) != n:
        raise ValueError(f"need {n} components, got {len(comps)}")
    for c in comps:
        ex.validate_family(c, n)
    pred = _as_expression(predicate) if predicate is not None else None
    if pred is not None:
        ex.validate_family(pred, n)

    def evaluator(tau: float, sigma: float, a: np.ndarray) -> np.ndarray:
        if time_box is not None:
            lo, hi = time_box
            if not (lo < tau < hi and lo < sigma < hi):
                raise DomainViolation("out_of_domain", "parameter outside the family time box")
        try:
            if pred is not None and not ex.evaluate_family(pred, tau, sigma, a) > 0.0:
                raise DomainViolation(
                    "out_of_domain", f"domain predicate not positive at ({tau}, {sigma}, {a})"
                )
            return np.array([ex.evaluate_family(c, tau, sigma, a) for c in comps], dtype=float)
        except ex.EvalError as err:
            raise DomainViolation("out_of_domain", f"evaluation failed: {err}") from None

    def domain_query(tau: float, sigma: float, a: np.ndarray) -> bool:
        try:
            evaluator(tau, sigma, a)
            return True
        except DomainViolation:
            return False

    return FlowFamily(n=n, kind=kind, evaluator=evaluator, domain_query=domain_query, tol_hint=tol_hint)


# ---------------------------------------------------------------------------
# Complete solutions and their escape intervals

@dataclass(frozen=True)
class EscapeInterval:
    """Open interval of times on which a complete solution lives.

    Endpoint kinds say why the solution stops there: blow_up (norm ran past
    the radius), left_domain (crossed the boundary of the field's domain),
    window_limit (hit the edge of the configured integration window),
    unbounded (endpoint at infinity), step_underflow (step control collapsed
    before classifying the obstruction).
    """

    lower: float
    upper: float
    lower_kind: str
    upper_kind: str

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("escape interval must satisfy lower < upper")
        for k in (self.lower_kind, self.upper_kind):
            if k not in ESCAPE_KINDS:
                raise ValueError(f"unknown escape kind '{k}'")
        if math.isinf(self.lower) and self.lower_kind != "unbounded":
            raise ValueError("infinite lower endpoint must have kind 'unbounded'")
        if math.isinf(self.upper) and self.upper_kind != "unbounded":
            raise ValueError("infinite upper endpoint must have kind 'unbounded'")

    def contains(self, tau: float) -> bool:
        return self.lower < tau < self.upper


@dataclass(frozen=True)
class CompleteSolution:
    """Solution through state ``a`` at time ``rho``, maximal on ``interval``."""

    rho: float
    a: np.ndarray
    interval: EscapeInterval

    def __post_init__(self):
        object.__setattr__(self, "a", as_state(self.a))
        if not self.interval.contains(self.rho):
            raise ValueError("initial time must lie inside the escape interval")


def solution_value(sol: CompleteSolution, fam: FlowFamily, tau: float) -> np.ndarray:
    """Value of the solution at time tau, via the family map out of (rho, a)."""
    if not sol.interval.contains(tau):
        raise DomainViolation(
            "out_of_domain",
            f"time {tau} outside the solution interval ({sol.interval.lower}, {sol.interval.upper})",
        )
    return fam.evaluate(tau, sol.rho, sol.a)
