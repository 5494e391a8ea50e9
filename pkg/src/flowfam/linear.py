"""Affine families: Sincov decomposition and the mollifier construction.

An affine family factors through a per-time change of coordinates,

    F_{tau, sigma}(a) = W_tau (W_sigma^{-1} a + h_tau - h_sigma),

with the gauge fixed so W at the base time is the identity and h vanishes
there; W is then the fundamental (Wronski) matrix of the generating linear
field and tau -> W_tau h_tau its particular solution.  For affine
one-parameter groups, averaging the group over a small parameter window
(composite Simpson) yields an invertible mollifier H_eps, and composing a
window average around alpha with H_eps^{-1} reproduces G_alpha up to
quadrature error; the construction smooths a merely-continuous group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .core import DomainViolation, FlowFamily, as_state, inf_norm
from .verify import ConditionReport, SamplePlan, _Accumulator

__all__ = [
    "AffineMap",
    "SincovDecomposition",
    "Mollifier",
    "NotAffine",
    "NotAffineField",
    "SingularWronskian",
    "NotInvertible",
    "check_affine",
    "detect_affine",
    "sincov_decompose",
    "family_from_decomposition",
    "wronski_consistency",
    "mollify",
    "smooth_apply",
]

# scale-invariant rank threshold: smallest singular value must clear this
# fraction of the largest
_SV_RATIO = 1e-12

_MIX_WEIGHTS = (-1.0, 0.5, 2.0)


class NotAffine(Exception):
    """The family or group is not affine in the state."""


class NotAffineField(Exception):
    """The vector field is not affine in the state."""


class SingularWronskian(Exception):
    """A Wronski matrix failed the rank test."""


class NotInvertible(Exception):
    """The mollifier average is singular; try a smaller window."""


@dataclass(frozen=True)
class AffineMap:
    """The map a -> A a + b on R^n."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        if b.shape != (A.shape[0],):
            raise ValueError("offset length must match the matrix")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("affine map entries must be finite")
        A.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls(np.eye(n), np.zeros(n))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def __call__(self, a) -> np.ndarray:
        return self.A @ as_state(a, self.n) + self.b

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.A, compute_uv=False)

    @property
    def is_invertible(self) -> bool:
        sv = self.singular_values()
        return bool(sv[-1] > _SV_RATIO * sv[0])

    def inverse(self) -> "AffineMap":
        if not self.is_invertible:
            sv = self.singular_values()
            raise NotInvertible(f"smallest singular value {sv[-1]:.3g} of {sv[0]:.3g}")
        A_inv = np.linalg.inv(self.A)
        return AffineMap(A_inv, -A_inv @ self.b)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self after other: a -> self(other(a))."""
        return AffineMap(self.A @ other.A, self.A @ other.b + self.b)


# --- affinity detection ----------------------------------------------------


def _affinity_tol(fam: FlowFamily) -> float:
    return 1e-9 if fam.tol_hint == 0.0 else 50.0 * fam.tol_hint


def check_affine(fam: FlowFamily, plan: SamplePlan, tol: float | None = None) -> ConditionReport:
    """Residual of F(la + (1-l)b) = l F(a) + (1-l) F(b) over sampled mixes."""
    tol = _affinity_tol(fam) if tol is None else tol
    acc = _Accumulator()

    def probe(tau, sigma, a, b):
        for lam in _MIX_WEIGHTS:
            mix = lam * a + (1.0 - lam) * b
            try:
                left = fam.evaluate(tau, sigma, mix)
                right = lam * fam.evaluate(tau, sigma, a) + (1.0 - lam) * fam.evaluate(tau, sigma, b)
            except DomainViolation:
                acc.skip()
                continue
            acc.record(
                inf_norm(left - right),
                {
                    "tau": tau,
                    "sigma": sigma,
                    "lambda": lam,
                    "a": list(map(float, a)),
                    "b": list(map(float, b)),
                },
            )

    states = [np.asarray(s, dtype=float) for s in plan.state_grid]
    for tau in plan.time_grid:
        for sigma in plan.time_grid:
            for a, b in product(states, states):
                if np.array_equal(a, b):
                    continue
                probe(tau, sigma, a, b)
    rng = plan._rng()
    taus = plan.random_times(rng, plan.random_count)
    sigmas = plan.random_times(rng, plan.random_count)
    a_draw = plan.random_states(rng, plan.random_count)
    b_draw = plan.random_states(rng, plan.random_count)
    for tau, sigma, a, b in zip(taus, sigmas, a_draw, b_draw):
        probe(float(tau), float(sigma), a, b)
    return acc.report("affinity", tol)


def detect_affine(fam: FlowFamily, plan: SamplePlan, tol: float | None = None) -> bool:
    return check_affine(fam, plan, tol).passed


# --- Sincov decomposition ---------------------------------------------------


@dataclass(frozen=True)
class SincovDecomposition:
    """Per-time Wronski matrices and offsets, gauge-fixed at tau0.

    W has shape (len(grid), n, n) and h shape (len(grid), n); every W slice
    must pass the rank test.  particular(i) returns W_i h_i, the value of
    the particular solution at grid[i].
    """

    tau0: float
    grid: tuple[float, ...]
    W: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = tuple(float(t) for t in self.grid)
        if len(grid) == 0:
            raise ValueError("grid must be nonempty")
        if any(not math.isfinite(t) for t in grid) or not math.isfinite(self.tau0):
            raise ValueError("times must be finite")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid times must be strictly increasing")
        W = np.array(self.W, dtype=float)
        h = np.array(self.h, dtype=float)
        if W.ndim != 3 or W.shape[0] != len(grid) or W.shape[1] != W.shape[2]:
            raise ValueError(f"W must be (len(grid), n, n), got {W.shape}")
        if h.shape != (len(grid), W.shape[1]):
            raise ValueError(f"h must be (len(grid), n), got {h.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(h))):
            raise ValueError("decomposition entries must be finite")
        for i, mat in enumerate(W):
            sv = np.linalg.svd(mat, compute_uv=False)
            if not sv[-1] > _SV_RATIO * sv[0]:
                raise SingularWronskian(
                    f"W at grid time {grid[i]} has singular-value ratio {sv[-1] / sv[0] if sv[0] else 0.0:.3g}"
                )
        W.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.W.shape[1]

    def particular(self, i: int) -> np.ndarray:
        return self.W[i] @ self.h[i]


def sincov_decompose(
    fam: FlowFamily,
    tau0: float,
    grid,
    check: bool = True,
    tol: float | None = None,
) -> SincovDecomposition:
    """Probe an affine family into Wronski matrices plus offsets.

    W_tau's columns are F_{tau,tau0}(e_k) - F_{tau,tau0}(0) and the
    particular value p(tau) = F_{tau,tau0}(0) gives h_tau = W_tau^{-1}
    p(tau).  check=True first samples the affinity condition on the grid
    and refuses non-affine families.
    """
    grid = tuple(sorted(float(t) for t in grid))
    n = fam.n
    if check:
        basis = [np.zeros(n)] + [e for e in np.eye(n)] + [-e for e in np.eye(n)]
        plan = SamplePlan(
            tuple(sorted(set(grid) | {float(tau0)})),
            tuple(tuple(map(float, s)) for s in basis),
            random_count=0,
        )
        rep = check_affine(fam, plan, tol)
        if not rep.passed:
            raise NotAffine(
                f"affinity residual {rep.max_residual:.3g} exceeds {rep.tolerance:.3g} "
                f"at {rep.worst_case}"
            )
    basis_vectors = np.eye(n)
    W = np.empty((len(grid), n, n))
    h = np.empty((len(grid), n))
    for i, tau in enumerate(grid):
        origin = fam.evaluate(tau, tau0, np.zeros(n))
        for k in range(n):
            W[i, :, k] = fam.evaluate(tau, tau0, basis_vectors[k]) - origin
        sv = np.linalg.svd(W[i], compute_uv=False)
        if not sv[-1] > _SV_RATIO * sv[0]:
            raise SingularWronskian(
                f"W at grid time {tau} has singular-value ratio "
                f"{sv[-1] / sv[0] if sv[0] else 0.0:.3g}"
            )
        h[i] = np.linalg.solve(W[i], origin)
    return SincovDecomposition(tau0=float(tau0), grid=grid, W=W, h=h)


def _interp_stack(grid: np.ndarray, stack: np.ndarray, t: float) -> np.ndarray:
    if len(grid) == 1:
        return stack[0]
    i = int(np.searchsorted(grid, t)) - 1
    i = min(max(i, 0), len(grid) - 2)
    lo, hi = grid[i], grid[i + 1]
    w = (t - lo) / (hi - lo)
    return (1.0 - w) * stack[i] + w * stack[i + 1]


def family_from_decomposition(dec: SincovDecomposition, enforce_time_span: bool = True) -> FlowFamily:
    """Evaluate W_tau(W_sigma^{-1} a + h_tau - h_sigma), interpolating W and h.

    Linear entrywise interpolation between grid times; times outside the
    grid span are out of domain unless enforce_time_span=False, which
    extrapolates from the end cells instead.  The diagonal short-circuits
    to the identity so F_{tt}(a) = a exactly.
    """
    grid = np.asarray(dec.grid, dtype=float)
    lo, hi = grid[0], grid[-1]

    def resolve(t: float) -> tuple[np.ndarray, np.ndarray]:
        return _interp_stack(grid, dec.W, t), _interp_stack(grid, dec.h, t)

    def evaluator(tau: float, sigma: float, a: np.ndarray) -> np.ndarray:
        if enforce_time_span and not (lo <= tau <= hi and lo <= sigma <= hi):
            raise DomainViolation("out_of_domain", "time outside the decomposition grid span")
        if tau == sigma:
            return a.copy()
        W_tau, h_tau = resolve(tau)
        W_sigma, h_sigma = resolve(sigma)
        sv = np.linalg.svd(W_sigma, compute_uv=False)
        if not sv[-1] > _SV_RATIO * sv[0]:
            raise DomainViolation(
                "out_of_domain", f"interpolated Wronski matrix singular at time {sigma}"
            )
        return W_tau @ (np.linalg.solve(W_sigma, a) + h_tau - h_sigma)

    def domain_query(tau: float, sigma: float, a: np.ndarray) -> bool:
        try:
            evaluator(tau, sigma, a)
        except DomainViolation:
            return False
        return True

    return FlowFamily(
        n=dec.n,
        kind="affine_backed",
        evaluator=evaluator,
        domain_query=domain_query,
        tol_hint=0.0,
    )


# --- consistency with a generating field ------------------------------------


def _affine_field_parts(fld, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Extract (A, c) with f(tau, x) = A x + c by basis probes; verify affinity."""
    n = fld.n
    try:
        c = np.asarray(fld(tau, np.zeros(n)), dtype=float)
        A = np.empty((n, n))
        for k in range(n):
            A[:, k] = np.asarray(fld(tau, np.eye(n)[k]), dtype=float) - c
        for k in range(n):
            for lam in (-1.0, 2.0):
                got = np.asarray(fld(tau, lam * np.eye(n)[k]), dtype=float)
                want = lam * A[:, k] + c
                scale = 1.0 + float(np.max(np.abs(want)))
                if inf_norm(got - want) > 1e-9 * scale:
                    raise NotAffineField(
                        f"field is not affine in the state at time {tau} "
                        f"(residual {inf_norm(got - want):.3g})"
                    )
    except (ArithmeticError, DomainViolation) as err:
        raise NotAffineField(f"could not probe the field at time {tau}: {err}") from None
    return A, c


def wronski_consistency(dec: SincovDecomposition, fld, tol: float = 1e-3) -> ConditionReport:
    """Central-difference check of dW/dtau = A W and d(Wh)/dtau = A(Wh) + c.

    Differentiates the decomposition's grid data at interior grid times and
    compares against the affine field's matrix and offset there.  Needs at
    least three grid times.
    """
    if len(dec.grid) < 3:
        raise ValueError("need at least three grid times for central differences")
    acc = _Accumulator()
    grid = np.asarray(dec.grid, dtype=float)
    p = np.array([dec.particular(i) for i in range(len(grid))])
    for i in range(1, len(grid) - 1):
        span = grid[i + 1] - grid[i - 1]
        A, c = _affine_field_parts(fld, float(grid[i]))
        dW = (dec.W[i + 1] - dec.W[i - 1]) / span
        dp = (p[i + 1] - p[i - 1]) / span
        res_matrix = float(np.max(np.abs(dW - A @ dec.W[i])))
        res_particular = float(np.max(np.abs(dp - (A @ p[i] + c))))
        acc.record(res_matrix, {"time": float(grid[i]), "part": "matrix"})
        acc.record(res_particular, {"time": float(grid[i]), "part": "particular"})
    return acc.report("wronski_consistency", tol)


# --- mollifier ---------------------------------------------------------------


@dataclass(frozen=True)
class Mollifier:
    """Window average H_eps of an affine group, with its quadrature budget.

    error_bound is the composite-Simpson constant (2 eps)^5 / (180 panels^4)
    at unit derivative scale; multiply by the fourth-derivative scale of the
    group's entries for an absolute bound.
    """

    eps: float
    H: AffineMap
    panels: int
    error_bound: float = 0.0


def _group_affine(group, beta: float) -> AffineMap:
    b = group.evaluate(beta, np.zeros(group.n))
    A = np.empty((group.n, group.n))
    for k in range(group.n):
        A[:, k] = group.evaluate(beta, np.eye(group.n)[k]) - b
    return AffineMap(A, b)


def _check_group_affine(group, beta: float, tol: float = 1e-9):
    mapped = _group_affine(group, beta)
    for k in range(group.n):
        for lam in (-1.0, 2.0):
            probe = lam * np.eye(group.n)[k]
            want = mapped(probe)
            got = group.evaluate(beta, probe)
            if inf_norm(got - want) > tol * (1.0 + inf_norm(want)):
                raise NotAffine(
                    f"group is not affine at parameter {beta} "
                    f"(residual {inf_norm(got - want):.3g})"
                )


def _simpson_average(sample, lo: float, hi: float, panels: int):
    if panels < 2 or panels % 2 != 0:
        raise ValueError("panel count must be even and at least 2")
    xs = np.linspace(lo, hi, panels + 1)
    weights = np.ones(panels + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    total = None
    for w, x in zip(weights, xs):
        val = w * np.asarray(sample(float(x)), dtype=float)
        total = val if total is None else total + val
    step = (hi - lo) / panels
    return total * (step / 3.0) / (hi - lo)


def mollify(group, eps: float, panels: int = 256) -> Mollifier:
    """Average an affine group over [-eps, eps] into an invertible map."""
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError("window half-width must be positive and finite")
    for beta in (-eps, 0.0, eps):
        _check_group_affine(group, beta)
    A = _simpson_average(lambda b: _group_affine(group, b).A, -eps, eps, panels)
    b = _simpson_average(lambda b: _group_affine(group, b).b, -eps, eps, panels)
    H = AffineMap(A, b)
    # the average of maps that include the identity lives at unit scale, so
    # anchor the rank floor there: a uniformly tiny H (e.g. a full-turn
    # rotation average) is useless even though its singular values are equal
    sv = H.singular_values()
    if not sv[-1] > _SV_RATIO * max(sv[0], 1.0):
        raise NotInvertible(
            f"window average is singular (smallest singular value {sv[-1]:.3g}); "
            "shrink the window"
        )
    bound = (2.0 * eps) ** 5 / (180.0 * panels**4)
    return Mollifier(eps=float(eps), H=H, panels=int(panels), error_bound=float(bound))


def smooth_apply(group, m: Mollifier, alpha: float) -> AffineMap:
    """Window average around alpha composed with H_eps^{-1}.

    For a continuous affine group this reproduces G_alpha up to quadrature
    error, but it is defined for any group the window can average, which is
    what lets a merely-continuous group be smoothed.
    """
    for beta in (alpha - m.eps, alpha, alpha + m.eps):
        _check_group_affine(group, beta)
    A = _simpson_average(lambda g: _group_affine(group, g).A, alpha - m.eps, alpha + m.eps, m.panels)
    b = _simpson_average(lambda g: _group_affine(group, g).b, alpha - m.eps, alpha + m.eps, m.panels)
    window = AffineMap(A, b)
    return window.compose(m.H.inverse())
