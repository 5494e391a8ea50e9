"""Adaptive integrator: oracle agreement, escapes, step control."""

import math

import numpy as np
import pytest

from flowfam.core import DomainSpec, DomainViolation, VectorField
from flowfam.integrate import (
    EscapeEvent,
    IntegratorConfig,
    advance,
    complete_solution,
    dopri5_step,
    escape_interval,
    numeric_family,
)

CFG = IntegratorConfig()


@pytest.fixture(scope="module")
def riccati_field():
    return VectorField.from_strings(["x1^2"], DomainSpec(1))


@pytest.fixture(scope="module")
def affine_field():
    return VectorField.from_strings(["x1 + 1"], DomainSpec(1))


def riccati_closed(tau, sigma, a):
    return a / (1.0 + (sigma - tau) * a)


# --- config -----------------------------------------------------------------

def test_config_defaults():
    assert CFG.rel_tol == 1e-10
    assert CFG.abs_tol == 1e-12
    assert CFG.h_init == 1e-3
    assert CFG.h_min == 1e-12
    assert CFG.blowup_radius == 1e6
    assert CFG.window == (-50.0, 50.0)
    assert CFG.max_steps == 10**6


@pytest.mark.parametrize(
    "kwargs",
    [
        {"rel_tol": 0.0},
        {"abs_tol": -1e-9},
        {"h_min": 1e-2},            # h_min must stay below h_init
        {"h_init": 0.0},
        {"blowup_radius": 0.0},
        {"window": (3.0, 3.0)},
        {"max_steps": 0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        IntegratorConfig(**kwargs)


# --- one-step order behavior -------------------------------------------------

@pytest.mark.parametrize("t,a,h", [(0.0, 0.5, 0.1), (0.5, -1.0, 0.2), (-1.0, 0.25, 0.1)])
def test_embedded_error_is_order_five(riccati_field, t, a, h):
    # the embedded estimate scales like h^5, so halving h divides it by ~32
    y = np.array([a])
    _, e_full, _ = dopri5_step(riccati_field, t, y, h)
    _, e_half, _ = dopri5_step(riccati_field, t, y, h / 2)
    ratio = abs(e_full[0]) / abs(e_half[0])
    assert 24.0 <= ratio <= 40.0


def test_fsal_slope_reusable(riccati_field):
    y = np.array([0.5])
    y1, _, k_last = dopri5_step(riccati_field, 0.0, y, 0.1)
    assert np.allclose(k_last, riccati_field(0.1, y1))


# --- advance ------------------------------------------------------------------

def test_advance_riccati_oracle(riccati_field):
    got = advance(riccati_field, 0.0, [0.5], 1.0, CFG)
    assert abs(got[0] - 1.0) <= 1e-8


def test_advance_zero_length_exact(riccati_field):
    got = advance(riccati_field, 0.0, [0.5], 0.0, CFG)
    assert got[0] == 0.5


def test_advance_backward(riccati_field):
    got = advance(riccati_field, 1.0, [1.0], 0.0, CFG)
    assert abs(got[0] - riccati_closed(0.0, 1.0, 1.0)) <= 1e-8


def test_advance_blow_up(riccati_field):
    # solution 0.5/(1 - 0.5 t) crosses the 1e6 radius just below t = 2
    with pytest.raises(EscapeEvent) as exc:
        advance(riccati_field, 0.0, [0.5], 3.0, CFG)
    assert exc.value.kind == "blow_up"
    assert abs(exc.value.time - 2.0) <= 1e-3


def test_advance_unrefined_escape(riccati_field):
    with pytest.raises(EscapeEvent) as exc:
        advance(riccati_field, 0.0, [0.5], 3.0, CFG, refine_escape=False)
    # without bisection the reported time is the first flagged point
    assert exc.value.kind == "blow_up"
    assert 1.99 <= exc.value.time <= 2.01


def test_advance_preconditions(riccati_field):
    with pytest.raises(ValueError):
        advance(riccati_field, 0.0, [0.5], 99.0, CFG)  # target beyond window
    boxed = VectorField.from_strings(["x1"], DomainSpec(1, time_box=(-1.0, 1.0)))
    with pytest.raises(ValueError):
        advance(boxed, 5.0, [0.5], 6.0, CFG)  # start outside the field domain


def test_monotone_escape(riccati_field):
    times = []
    for tau in (2.5, 3.0, 49.0):
        with pytest.raises(EscapeEvent) as exc:
            advance(riccati_field, 0.0, [0.5], tau, CFG)
        times.append(exc.value.time)
    assert max(times) - min(times) <= 1e-6


def test_two_sided_consistency(riccati_field):
    # forward then backward lands within 10x of the integrator tolerance
    for rho, a, tau in [(0.0, 0.5, 1.5), (0.0, -1.0, 1.5), (0.5, 0.25, -1.0)]:
        mid = advance(riccati_field, rho, [a], tau, CFG)
        back = advance(riccati_field, tau, mid, rho, CFG)
        assert abs(back[0] - a) <= 10.0 * (CFG.abs_tol + CFG.rel_tol * abs(a))


def test_halving_tolerances_reduces_error(riccati_field):
    def worst(cfg):
        out = 0.0
        for tau in (-1.0, 0.5, 1.5):
            for sigma in (-1.0, 0.0, 1.0):
                for a in (-1.0, -0.5, 0.25, 0.5):
                    if (tau - sigma) * a < 0.9:
                        got = advance(riccati_field, sigma, [a], tau, cfg)[0]
                        out = max(out, abs(got - riccati_closed(tau, sigma, a)))
        return out

    loose = worst(IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10))
    tight = worst(IntegratorConfig(rel_tol=5e-9, abs_tol=5e-11))
    assert tight < loose


def test_left_domain_time_box():
    boxed = VectorField.from_strings(["x1"], DomainSpec(1, time_box=(-2.0, 2.0)))
    with pytest.raises(EscapeEvent) as exc:
        advance(boxed, 0.0, [1.0], 5.0, IntegratorConfig(window=(-50.0, 50.0)))
    assert exc.value.kind == "left_domain"
    assert abs(exc.value.time - 2.0) <= 1e-3


def test_left_domain_space_predicate():
    # region |x| < 2; the riccati push through (0, 0.5) reaches x = 2 at t = 1.5
    field = VectorField.from_strings(["x1^2"], DomainSpec(1, space_predicate="4 - x1^2"))
    with pytest.raises(EscapeEvent) as exc:
        advance(field, 0.0, [0.5], 3.0, CFG)
    assert exc.value.kind == "left_domain"
    assert abs(exc.value.time - 1.5) <= 1e-3


def test_step_underflow():
    # rhs undefined past t = 2; the step collapses against that wall
    field = VectorField.from_strings(["sqrt(2 - t)"], DomainSpec(1))
    with pytest.raises(EscapeEvent) as exc:
        advance(field, 0.0, [0.0], 3.0, CFG)
    assert exc.value.kind == "step_underflow"
    assert abs(exc.value.time - 2.0) <= 1e-3


def test_max_steps_exhaustion(riccati_field):
    field = VectorField.from_strings(["x1"], DomainSpec(1))
    with pytest.raises(RuntimeError):
        advance(field, 0.0, [1.0], 40.0, IntegratorConfig(max_steps=10))


# --- numeric_family ------------------------------------------------------------

def test_numeric_family_oracle(riccati_field):
    fam = numeric_family(riccati_field, CFG)
    assert abs(fam.evaluate(1.0, 0.0, [0.5])[0] - 1.0) <= 1e-8
    for tau in (-1.0, 0.0, 1.5):
        for sigma in (-0.5, 0.5):
            for a in (-1.0, 0.25, 0.5):
                if (tau - sigma) * a < 0.9:
                    got = fam.evaluate(tau, sigma, [a])[0]
                    assert abs(got - riccati_closed(tau, sigma, a)) <= 1e-8


def test_numeric_family_diagonal(riccati_field):
    fam = numeric_family(riccati_field, CFG)
    for sigma, a in [(0.3, -2.0), (-1.0, 0.7), (0.0, 0.0)]:
        assert abs(fam.evaluate(sigma, sigma, [a])[0] - a) <= 1e-12


def test_numeric_family_affine_oracle(affine_field):
    fam = numeric_family(affine_field, CFG)
    got = fam.evaluate(math.log(2.0), 0.0, [0.0])
    assert abs(got[0] - 1.0) <= 1e-8


def test_numeric_family_membership(riccati_field):
    fam = numeric_family(riccati_field, CFG)
    assert fam.kind == "numeric"
    assert fam.tol_hint == CFG.rel_tol
    assert fam.in_domain(1.0, 0.0, [0.5])
    assert not fam.in_domain(3.0, 0.0, [0.5])  # escapes at 2
    with pytest.raises(DomainViolation) as exc:
        fam.evaluate(3.0, 0.0, [0.5])
    assert exc.value.kind == "out_of_domain"
    assert not fam.in_domain(99.0, 0.0, [0.5])  # outside the window


def test_numeric_family_dimension_mismatch(riccati_field):
    fam = numeric_family(riccati_field, CFG)
    with pytest.raises(DomainViolation) as exc:
        fam.evaluate(1.0, 0.0, [0.5, 0.5])
    assert exc.value.kind == "dimension_mismatch"


def test_numeric_family_two_dimensional():
    rotation = VectorField.from_strings(["-x2", "x1"], DomainSpec(2))
    fam = numeric_family(rotation, CFG)
    got = fam.evaluate(math.pi / 2.0, 0.0, [1.0, 0.0])
    assert np.max(np.abs(got - np.array([0.0, 1.0]))) <= 1e-8


# --- escape_interval -------------------------------------------------------------

def test_escape_interval_riccati(riccati_field):
    j = escape_interval(riccati_field, 0.0, [0.5], CFG)
    assert j.lower == -50.0 and j.lower_kind == "window_limit"
    assert j.upper_kind == "blow_up"
    assert abs(j.upper - 2.0) <= 1e-3


def test_escape_interval_fixed_point(riccati_field):
    j = escape_interval(riccati_field, 0.0, [0.0], CFG)
    assert (j.lower, j.upper) == (-50.0, 50.0)
    assert j.lower_kind == j.upper_kind == "window_limit"


def test_escape_interval_affine(affine_field):
    # forward solution 2 e^t - 1 crosses the 1e6 radius at ln(500000.5) ~= 13.12,
    # well inside the window, so the upper end reports a blow-up; backward the
    # solution decays to -1 and runs out the window edge
    j = escape_interval(affine_field, 0.0, [1.0], CFG)
    assert j.lower == -50.0 and j.lower_kind == "window_limit"
    assert j.upper_kind == "blow_up"
    assert abs(j.upper - math.log(500000.5)) <= 1e-3


def test_escape_interval_left_domain():
    field = VectorField.from_strings(["x1^2"], DomainSpec(1, space_predicate="4 - x1^2"))
    j = escape_interval(field, 0.0, [0.5], CFG)
    assert j.upper_kind == "left_domain"
    assert abs(j.upper - 1.5) <= 1e-3
    assert j.lower == -50.0 and j.lower_kind == "window_limit"


def test_complete_solution_bundle(riccati_field):
    sol = complete_solution(riccati_field, 0.0, [0.5], CFG)
    assert sol.rho == 0.0
    assert sol.interval.contains(1.9)
    assert not sol.interval.contains(2.1)
