"""Adaptive Runge-Kutta integration of vector fields into numeric flow families.

The driver is an embedded Dormand-Prince 5(4) pair with the standard
coefficients and mixed-tolerance step control: a step is accepted when the
scaled error norm max_i |e_i| / (abs_tol + rel_tol*max(|y_i|,|y'_i|)) is at
most 1, and the next step is h * clip(0.9 * err^(-1/5), 0.2, 5).  The last
stage is the slope at the accepted point (FSAL), so each accepted step
costs six fresh rhs evaluations.

Integration stops early when the trajectory escapes: norm past the blow-up
radius, domain predicate failing, or the step size collapsing below h_min.
Escape times are bracketed by bisection over the last accepted step, with
candidate points obtained by re-integration from the last good state, and
reported as the bracket midpoint (bracket width 5e-7, comfortably inside
the 1e-6 contract).  Escapes surface as EscapeEvent exceptions; a numeric
FlowFamily translates them into domain membership.

All entry points are pure given immutable inputs; every call owns its
scratch arrays, so families built here can be evaluated concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .core import (
    CompleteSolution,
    DomainViolation,
    EscapeInterval,
    FlowFamily,
    VectorField,
    as_state,
    inf_norm,
)

__all__ = [
    "IntegratorConfig",
    "EscapeEvent",
    "dopri5_step",
    "advance",
    "numeric_family",
    "escape_interval",
    "complete_solution",
]

# Dormand-Prince 5(4) tableau.  _A rows are the stage coupling coefficients,
# row i giving the weights of k_0..k_{i-1}; the 7th stage point coincides
# with the 5th-order solution (FSAL).  _E = b5 - b4 yields the embedded
# error estimate.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

_SAFETY = 0.9
_FACTOR_MIN = 0.2
_FACTOR_MAX = 5.0
_BRACKET_WIDTH = 5e-7  # escape-time bracket, half the 1e-6 contract


@dataclass(frozen=True)
class IntegratorConfig:
    """Step-control and escape-detection knobs for the adaptive integrator."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-12
    blowup_radius: float = 1e6
    window: tuple[float, float] = (-50.0, 50.0)
    max_steps: int = 10**6

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.h_min < self.h_init:
            raise ValueError("need 0 < h_min < h_init")
        if not self.blowup_radius > 0:
            raise ValueError("blowup_radius must be positive")
        lo, hi = self.window
        if not lo < hi:
            raise ValueError("window must be a nonempty interval")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


class EscapeEvent(Exception):
    """The trajectory left its maximal interval inside the window.

    kind: blow_up | left_domain | window_limit | step_underflow; time is
    where it happened (bracket midpoint when refinement ran).
    """

    def __init__(self, kind: str, time: float, message: str = ""):
        super().__init__(message or f"{kind} at t={time}")
        self.kind = kind
        self.time = time


def dopri5_step(f, t: float, y: np.ndarray, h: float, k1: np.ndarray | None = None):
    """One Dormand-Prince step of size h from (t, y).

    Returns (y5, err, k_last): the 5th-order solution, the embedded error
    estimate (difference of the 5th- and 4th-order solutions, an O(h^5)
    quantity), and the slope at (t+h, y5) for reuse as the next k1.
    """
    k = np.empty((7, y.shape[0]))
    k[0] = f(t, y) if k1 is None else k1
    for i in range(1, 6):
        k[i] = f(t + _C[i] * h, y + h * (_A[i] @ k[:i]))
    y5 = y + h * (_A[6] @ k[:6])
    k[6] = f(t + h, y5)
    return y5, h * (_E @ k), k[6]


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, cfg: IntegratorConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale))


def _classify(t: float, y: np.ndarray, field: VectorField, radius: float) -> str | None:
    """Escape kind at an accepted point, or None when the point is fine."""
    if inf_norm(y) > radius:
        return "blow_up"
    if not field.domain.contains(t, y):
        return "left_domain"
    return None


def _integrate(
    field: VectorField,
    rho: float,
    a: np.ndarray,
    tau: float,
    cfg: IntegratorConfig,
    refine: bool,
) -> np.ndarray:
    """Drive (rho, a) to time tau; raises EscapeEvent when the solution quits first."""
    if tau == rho:
        return a.copy()
    radius = min(field.domain.blowup_radius, cfg.blowup_radius)
    direction = 1.0 if tau > rho else -1.0
    t, y = rho, a.copy()
    h = direction * min(cfg.h_init, abs(tau - rho))
    k1 = field(t, y)  # (rho, a) in the domain, so this must succeed
    steps = 0
    while True:
        steps += 1
        if steps > cfg.max_steps:
            raise RuntimeError(f"integration exceeded {cfg.max_steps} steps at t={t}")
        last = abs(h) >= abs(tau - t)
        if last:
            h = tau - t
        try:
            y_new, err_vec, k_last = dopri5_step(field, t, y, h, k1)
            stage_ok = bool(
                np.all(np.isfinite(y_new)) and np.all(np.isfinite(err_vec))
            )
        except ex.EvalError:
            stage_ok = False
        if not stage_ok:
            # rhs not evaluable (or overflowed) somewhere inside the step;
            # shrink and retry until the step cannot shrink further
            h *= 0.5
            if abs(h) < cfg.h_min:
                raise EscapeEvent("step_underflow", t)
            continue
        err = _error_norm(err_vec, y, y_new, cfg)
        factor = _FACTOR_MAX if err == 0.0 else min(
            _FACTOR_MAX, max(_FACTOR_MIN, _SAFETY * err ** -0.2)
        )
        if err <= 1.0:
            t_new = tau if last else t + h
            kind = _classify(t_new, y_new, field, radius)
            if kind is not None:
                if refine:
                    t_star, kind = _refine_escape(field, t, y, t_new, cfg, kind, radius)
                    raise EscapeEvent(kind, t_star)
                raise EscapeEvent(kind, t_new)
            if last:
                return y_new
            t, y, k1 = t_new, y_new, k_last
            h *= factor
            if abs(h) < cfg.h_min:  # keep crawling; only a failed step underflows
                h = math.copysign(cfg.h_min, h)
        else:
            h *= factor
            if abs(h) < cfg.h_min:
                raise EscapeEvent("step_underflow", t)


def _refine_escape(
    field: VectorField,
    t_good: float,
    y_good: np.ndarray,
    t_bad: float,
    cfg: IntegratorConfig,
    kind: str,
    radius: float,
) -> tuple[float, str]:
    """Bisect the last accepted step down to a 5e-7 bracket around the escape.

    Candidate midpoints are reached by re-integrating from the good end, so
    each probe is as accurate as a normal advance; a probe that escapes on
    the way tightens the bad end instead.
    """
    while abs(t_bad - t_good) > _BRACKET_WIDTH:
        mid = 0.5 * (t_good + t_bad)
        try:
            y_mid = _integrate(field, t_good, y_good, mid, cfg, refine=False)
        except EscapeEvent as ev:
            t_bad, kind = ev.time, ev.kind
            continue
        bad_kind = _classify(mid, y_mid, field, radius)
        if bad_kind is None:
            t_good, y_good = mid, y_mid
        else:
            t_bad, kind = mid, bad_kind
    return 0.5 * (t_good + t_bad), kind


def advance(
    field: VectorField,
    rho: float,
    a,
    tau: float,
    cfg: IntegratorConfig | None = None,
    refine_escape: bool = True,
) -> np.ndarray:
    """State at time tau of the solution through (rho, a); backward when tau < rho.

    Raises EscapeEvent when the solution quits before reaching tau, with the
    escape time bracketed to width <= 1e-6 (bisection over the last accepted
    step).  Zero-length requests return a unchanged.
    """
    cfg = cfg or IntegratorConfig()
    arr = as_state(a, field.n)
    lo, hi = cfg.window
    if not (lo <= rho <= hi and lo <= tau <= hi):
        raise ValueError(f"times must lie in the window [{lo}, {hi}]")
    if not field.domain.contains(rho, arr):
        raise ValueError(f"initial condition ({rho}, {arr}) outside the field domain")
    return as_state(_integrate(field, rho, arr, tau, cfg, refine=refine_escape), field.n)


def numeric_family(field: VectorField, cfg: IntegratorConfig | None = None) -> FlowFamily:
    """Flow family realized by integrating the field on demand.

    Membership of (tau, sigma, a) holds when both parameters sit in the
    window, (sigma, a) is in the field's domain, and integration from sigma
    to tau completes without escaping.  Escape refinement is skipped here
    since only the yes/no answer matters, which keeps repeated evaluation
    near the boundary cheap.  tol_hint advertises rel_tol so downstream
    checks can widen comparisons accordingly.
    """
    cfg = cfg or IntegratorConfig()
    lo, hi = cfg.window

    def evaluator(tau: float, sigma: float, a: np.ndarray) -> np.ndarray:
        if not (lo <= tau <= hi and lo <= sigma <= hi):
            raise DomainViolation("out_of_domain", "parameter outside the integration window")
        if not field.domain.contains(sigma, a):
            raise DomainViolation("out_of_domain", f"({sigma}, {a}) outside the field domain")
        if tau == sigma:
            return a.copy()
        try:
            return _integrate(field, sigma, a, tau, cfg, refine=False)
        except EscapeEvent as ev:
            raise DomainViolation(
                "out_of_domain", f"trajectory escapes at t={ev.time} ({ev.kind})"
            ) from None

    def domain_query(tau: float, sigma: float, a: np.ndarray) -> bool:
        try:
            evaluator(tau, sigma, a)
            return True
        except DomainViolation:
            return False

    return FlowFamily(
        n=field.n,
        kind="numeric",
        evaluator=evaluator,
        domain_query=domain_query,
        tol_hint=cfg.rel_tol,
    )


def escape_interval(
    field: VectorField, rho: float, a, cfg: IntegratorConfig | None = None
) -> EscapeInterval:
    """Maximal open interval around rho on which the solution through (rho, a) lives.

    Integrates toward each window edge; reaching the edge is reported as
    window_limit (possibly-unbounded directions are never claimed finite),
    anything else carries the refined escape time and its kind.
    """
    cfg = cfg or IntegratorConfig()
    arr = as_state(a, field.n)
    lo, hi = cfg.window
    if not lo <= rho <= hi:
        raise ValueError(f"rho must lie in the window [{lo}, {hi}]")
    if not field.domain.contains(rho, arr):
        raise ValueError(f"initial condition ({rho}, {arr}) outside the field domain")

    def one_side(edge: float) -> tuple[float, str]:
        if edge == rho:
            return edge, "window_limit"
        try:
            _integrate(field, rho, arr, edge, cfg, refine=True)
            return edge, "window_limit"
        except EscapeEvent as ev:
            return ev.time, ev.kind

    lower, lower_kind = one_side(lo)
    upper, upper_kind = one_side(hi)
    return EscapeInterval(lower, upper, lower_kind, upper_kind)


def complete_solution(
    field: VectorField, rho: float, a, cfg: IntegratorConfig | None = None
) -> CompleteSolution:
    """Bundle (rho, a) with its escape interval."""
    return CompleteSolution(rho, as_state(a, field.n), escape_interval(field, rho, a, cfg))
