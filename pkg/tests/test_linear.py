"""Affine machinery: Sincov decomposition, Wronski checks, mollifier."""

import math

import numpy as np
import pytest

from flowfam.autonomous import OneParamGroup, to_group
from flowfam.core import DomainSpec, DomainViolation, VectorField, closed_form_family
from flowfam.linear import (
    AffineMap,
    Mollifier,
    NotAffine,
    NotAffineField,
    NotInvertible,
    SincovDecomposition,
    SingularWronskian,
    check_affine,
    detect_affine,
    family_from_decomposition,
    mollify,
    sincov_decompose,
    smooth_apply,
    wronski_consistency,
)
from flowfam.verify import SamplePlan, default_plan


def affine_family():
    # flow of x' = x + 1
    return closed_form_family(1, ["exp(tau - sigma)*(a1 + 1) - 1"])


def riccati_family():
    return closed_form_family(
        1, ["a1/(1 + (sigma - tau)*a1)"], predicate="1 - (tau - sigma)*a1"
    )


def rotation_family():
    return closed_form_family(
        2,
        [
            "cos(tau - sigma)*a1 - sin(tau - sigma)*a2",
            "sin(tau - sigma)*a1 + cos(tau - sigma)*a2",
        ],
    )


# --- AffineMap -------------------------------------------------------------


def test_affine_map_apply_and_compose():
    m = AffineMap([[2.0, 0.0], [0.0, 3.0]], [1.0, -1.0])
    assert np.allclose(m([1.0, 1.0]), [3.0, 2.0])
    both = m.compose(AffineMap.identity(2))
    assert np.allclose(both.A, m.A) and np.allclose(both.b, m.b)
    chained = AffineMap([[0.0, -1.0], [1.0, 0.0]], [0.0, 0.0]).compose(m)
    assert np.allclose(chained([1.0, 1.0]), [-2.0, 3.0])


def test_affine_map_inverse_round_trip():
    m = AffineMap([[2.0, 1.0], [0.0, 1.0]], [0.5, -0.25])
    inv = m.inverse()
    for a in ([0.0, 0.0], [1.0, -2.0], [0.3, 0.7]):
        assert np.allclose(inv(m(a)), a, atol=1e-12)


def test_affine_map_singular_refuses_inverse():
    flat = AffineMap([[1.0, 1.0], [1.0, 1.0]], [0.0, 0.0])
    assert not flat.is_invertible
    with pytest.raises(NotInvertible):
        flat.inverse()


def test_affine_map_validation():
    with pytest.raises(ValueError):
        AffineMap([[1.0, 2.0]], [0.0])
    with pytest.raises(ValueError):
        AffineMap([[1.0]], [0.0, 0.0])
    with pytest.raises(ValueError):
        AffineMap([[math.nan]], [0.0])


def test_affine_map_entries_frozen():
    m = AffineMap([[1.0]], [0.0])
    with pytest.raises(ValueError):
        m.A[0, 0] = 5.0


# --- affinity detection ----------------------------------------------------


def test_detect_affine_on_affine_family():
    assert detect_affine(affine_family(), default_plan(1))


def test_detect_affine_on_identity():
    assert detect_affine(closed_form_family(1, ["a1"]), default_plan(1))


def test_detect_affine_rejects_riccati():
    assert not detect_affine(riccati_family(), default_plan(1))


def test_check_affine_witness_structure():
    rep = check_affine(riccati_family(), default_plan(1))
    assert rep.condition_name == "affinity"
    assert not rep.passed
    assert set(rep.worst_case) == {"tau", "sigma", "lambda", "a", "b"}
    assert rep.samples_skipped > 0  # mixes that left the hyperbola domain


# --- Sincov decomposition --------------------------------------------------


def test_decompose_scalar_affine_oracle():
    grid = (0.0, 0.25, 0.5, math.log(2.0), 1.0)
    dec = sincov_decompose(affine_family(), 0.0, grid)
    i = dec.grid.index(math.log(2.0))
    assert abs(dec.W[i][0, 0] - 2.0) <= 1e-12
    assert abs(dec.particular(i)[0] - 1.0) <= 1e-12
    assert abs(dec.h[i][0] - 0.5) <= 1e-12


def test_decompose_gauge_row_is_identity():
    dec = sincov_decompose(affine_family(), 0.0, (0.0, 0.5, 1.0))
    assert np.allclose(dec.W[0], np.eye(1), atol=1e-15)
    assert np.allclose(dec.h[0], 0.0, atol=1e-15)


def test_decompose_rotation_quarter_turn():
    dec = sincov_decompose(rotation_family(), 0.0, (0.0, math.pi / 4, math.pi / 2))
    assert np.allclose(dec.W[2], [[0.0, -1.0], [1.0, 0.0]], atol=1e-12)
    assert np.allclose(dec.h[2], 0.0, atol=1e-12)


def test_decompose_refuses_nonaffine():
    with pytest.raises(NotAffine):
        sincov_decompose(riccati_family(), 0.0, (0.0, 0.5))


def test_decompose_flags_singular_wronskian():
    # affine, but the linear part collapses at tau = 1
    degenerate = closed_form_family(1, ["(1 - tau)/(1 - sigma)*a1"], time_box=(-2.0, 1.5))
    with pytest.raises(SingularWronskian):
        sincov_decompose(degenerate, 0.0, (0.0, 0.5, 1.0))


def test_decomposition_validates_fields():
    eye = np.eye(1)[None, :, :]
    with pytest.raises(ValueError):
        SincovDecomposition(0.0, (), np.empty((0, 1, 1)), np.empty((0, 1)))
    with pytest.raises(ValueError):
        SincovDecomposition(0.0, (1.0, 0.0), np.repeat(eye, 2, axis=0), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        SincovDecomposition(0.0, (0.0,), np.empty((2, 1, 1)), np.zeros((2, 1)))
    with pytest.raises(SingularWronskian):
        SincovDecomposition(0.0, (0.0,), np.zeros((1, 1, 1)), np.zeros((1, 1)))


# --- reconstruction from a decomposition ------------------------------------


def test_family_from_decomposition_round_trip_on_grid():
    fam = affine_family()
    grid = (0.0, 0.25, 0.5, 1.0)
    rebuilt = family_from_decomposition(sincov_decompose(fam, 0.0, grid))
    assert rebuilt.kind == "affine_backed"
    worst = max(
        abs(rebuilt.evaluate(t, s, [a])[0] - fam.evaluate(t, s, [a])[0])
        for t in grid
        for s in grid
        for a in (-1.0, 0.0, 0.5)
    )
    assert worst <= 1e-12


def test_gauge_invariance_of_reconstruction():
    fam = affine_family()
    grid = (0.0, 0.5, 1.0)
    f0 = family_from_decomposition(sincov_decompose(fam, 0.0, grid))
    f1 = family_from_decomposition(sincov_decompose(fam, 1.0, grid))
    worst = max(
        abs(f0.evaluate(t, s, [a])[0] - f1.evaluate(t, s, [a])[0])
        for t in grid
        for s in grid
        for a in (-0.5, 0.0, 1.0)
    )
    assert worst <= 1e-10


def test_affine_backed_diagonal_exact():
    rebuilt = family_from_decomposition(sincov_decompose(affine_family(), 0.0, (0.0, 1.0)))
    for t in (0.0, 0.37, 1.0):
        assert rebuilt.evaluate(t, t, [0.3])[0] == 0.3


def test_affine_backed_cocycle_exact_between_grid_times():
    rebuilt = family_from_decomposition(
        sincov_decompose(affine_family(), 0.0, (0.0, 0.25, 0.5, 0.75, 1.0))
    )
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        tau, sigma, rho = rng.uniform(0.0, 1.0, 3)
        a = np.array([rng.uniform(-1.0, 1.0)])
        hop = rebuilt.evaluate(sigma, rho, a)
        worst = max(
            worst,
            abs(rebuilt.evaluate(tau, sigma, hop)[0] - rebuilt.evaluate(tau, rho, a)[0]),
        )
    assert worst <= 1e-10


def test_time_span_enforced_by_default():
    rebuilt = family_from_decomposition(sincov_decompose(affine_family(), 0.0, (0.0, 1.0)))
    with pytest.raises(DomainViolation):
        rebuilt.evaluate(1.5, 0.0, [0.1])
    assert not rebuilt.in_domain(-0.1, 0.0, [0.1])
    relaxed = family_from_decomposition(
        sincov_decompose(affine_family(), 0.0, (0.0, 1.0)), enforce_time_span=False
    )
    assert np.isfinite(relaxed.evaluate(1.5, 0.0, [0.1])[0])


def test_interpolated_wronskian_can_degenerate():
    # I and -I average to the zero matrix halfway between grid times
    dec = SincovDecomposition(
        0.0,
        (0.0, 1.0),
        np.stack([np.eye(2), -np.eye(2)]),
        np.zeros((2, 2)),
    )
    rebuilt = family_from_decomposition(dec)
    with pytest.raises(DomainViolation):
        rebuilt.evaluate(0.0, 0.5, [1.0, 0.0])
    assert not rebuilt.in_domain(0.0, 0.5, [1.0, 0.0])


# --- Wronski consistency ----------------------------------------------------


def test_wronski_consistency_scalar_affine():
    fld = VectorField.from_strings(["x1 + 1"], DomainSpec(1))
    grid = tuple(np.arange(0.0, 1.0 + 1e-12, 1e-2))
    dec = sincov_decompose(affine_family(), 0.0, grid, check=False)
    rep = wronski_consistency(dec, fld, tol=1e-3)
    assert rep.passed
    assert rep.condition_name == "wronski_consistency"


def test_wronski_consistency_rotation():
    fld = VectorField.from_strings(["-x2", "x1"], DomainSpec(2))
    grid = tuple(np.arange(0.0, 1.0 + 1e-12, 1e-2))
    dec = sincov_decompose(rotation_family(), 0.0, grid, check=False)
    assert wronski_consistency(dec, fld, tol=1e-3).passed


def test_wronski_consistency_zero_field_exact():
    fld = VectorField.from_strings(["0"], DomainSpec(1))
    dec = sincov_decompose(closed_form_family(1, ["a1"]), 0.0, (0.0, 0.5, 1.0), check=False)
    rep = wronski_consistency(dec, fld, tol=1e-12)
    assert rep.passed
    assert rep.max_residual == 0.0


def test_wronski_consistency_rejects_nonaffine_field():
    fld = VectorField.from_strings(["x1^2"], DomainSpec(1))
    dec = sincov_decompose(affine_family(), 0.0, (0.0, 0.5, 1.0), check=False)
    with pytest.raises(NotAffineField):
        wronski_consistency(dec, fld, tol=1e-3)


def test_wronski_consistency_needs_interior_points():
    dec = sincov_decompose(affine_family(), 0.0, (0.0, 1.0), check=False)
    fld = VectorField.from_strings(["x1 + 1"], DomainSpec(1))
    with pytest.raises(ValueError):
        wronski_consistency(dec, fld, tol=1e-3)


def test_wronski_consistency_catches_wrong_field():
    fld = VectorField.from_strings(["2*x1 + 1"], DomainSpec(1))
    grid = tuple(np.arange(0.0, 1.0 + 1e-12, 1e-2))
    dec = sincov_decompose(affine_family(), 0.0, grid, check=False)
    assert not wronski_consistency(dec, fld, tol=1e-3).passed


# --- mollifier ---------------------------------------------------------------


def test_mollify_rotation_half_pi():
    m = mollify(to_group(rotation_family()), math.pi / 2)
    assert np.max(np.abs(m.H.A - (2.0 / math.pi) * np.eye(2))) <= 1e-10
    assert np.max(np.abs(m.H.b)) <= 1e-12


def test_mollify_identity_group_is_identity():
    group = OneParamGroup(n=1, g=lambda alpha, a: a.copy(), domain_query=lambda alpha, a: True)
    m = mollify(group, 0.3)
    assert np.allclose(m.H.A, np.eye(1), atol=1e-15)
    assert np.allclose(m.H.b, 0.0, atol=1e-15)


def test_mollify_translation_group_cancels():
    v = np.array([1.0, -2.0])
    group = OneParamGroup(n=2, g=lambda alpha, a: a + alpha * v, domain_query=lambda alpha, a: True)
    m = mollify(group, 0.5)
    assert np.allclose(m.H.A, np.eye(2), atol=1e-15)
    assert np.max(np.abs(m.H.b)) <= 1e-15  # odd integrand cancels node by node


def test_mollify_reports_singular_average():
    with pytest.raises(NotInvertible):
        mollify(to_group(rotation_family()), math.pi)


def test_mollify_rejects_nonaffine_group():
    with pytest.raises(NotAffine):
        mollify(to_group(riccati_family()), 0.25)


def test_mollify_parameter_validation():
    group = OneParamGroup(n=1, g=lambda alpha, a: a.copy(), domain_query=lambda alpha, a: True)
    with pytest.raises(ValueError):
        mollify(group, 0.0)
    with pytest.raises(ValueError):
        mollify(group, 0.25, panels=3)


def test_mollifier_limit_monotone():
    group = to_group(closed_form_family(1, ["exp(tau - sigma)*a1"]))
    gaps = []
    for eps in (0.4, 0.2, 0.1, 0.05):
        m = mollify(group, eps)
        gaps.append(max(abs(m.H.A[0, 0] - 1.0), abs(m.H.b[0])))
    assert all(x > y for x, y in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 1e-3


def test_mollifier_error_bound_scales():
    group = OneParamGroup(n=1, g=lambda alpha, a: a.copy(), domain_query=lambda alpha, a: True)
    wide = mollify(group, 0.4, panels=64)
    narrow = mollify(group, 0.2, panels=64)
    fine = mollify(group, 0.4, panels=128)
    assert wide.error_bound == pytest.approx(32.0 * narrow.error_bound)
    assert wide.error_bound == pytest.approx(16.0 * fine.error_bound)


# --- smoothing ---------------------------------------------------------------


def test_smooth_apply_rotation():
    group = to_group(rotation_family())
    m = mollify(group, math.pi / 4)
    got = smooth_apply(group, m, 0.3)
    want = np.array([[math.cos(0.3), -math.sin(0.3)], [math.sin(0.3), math.cos(0.3)]])
    assert np.max(np.abs(got.A - want)) <= 1e-8
    assert np.max(np.abs(got.b)) <= 1e-8


def test_smooth_apply_at_zero_is_identity():
    group = to_group(rotation_family())
    m = mollify(group, 0.25)
    got = smooth_apply(group, m, 0.0)
    assert np.max(np.abs(got.A - np.eye(2))) <= 1e-10
    assert np.max(np.abs(got.b)) <= 1e-10


def test_smooth_apply_scalar_exponential():
    group = to_group(closed_form_family(1, ["exp(tau - sigma)*a1"]))
    got = smooth_apply(group, mollify(group, 0.5), 1.0)
    assert abs(got.A[0, 0] - math.e) <= 1e-8
    assert abs(got.b[0]) <= 1e-8


def test_smoothing_identity_sweep():
    rot = to_group(rotation_family())
    exp_group = to_group(closed_form_family(1, ["exp(tau - sigma)*a1"]))
    m_rot = mollify(rot, 0.25)
    m_exp = mollify(exp_group, 0.25)
    for alpha in (-1.0, -0.3, 0.0, 0.3, 1.0):
        got = smooth_apply(rot, m_rot, alpha)
        want = np.array(
            [[math.cos(alpha), -math.sin(alpha)], [math.sin(alpha), math.cos(alpha)]]
        )
        assert np.max(np.abs(got.A - want)) <= 1e-8
        assert np.max(np.abs(got.b)) <= 1e-8
        got1 = smooth_apply(exp_group, m_exp, alpha)
        assert abs(got1.A[0, 0] - math.exp(alpha)) <= 1e-8
        assert abs(got1.b[0]) <= 1e-8


def test_affine_of_affine_group_with_offset():
    # translation-with-scaling group: G_alpha(a) = e^alpha a + (e^alpha - 1)
    group = to_group(affine_family())
    got = smooth_apply(group, mollify(group, 0.25), 0.7)
    assert abs(got.A[0, 0] - math.exp(0.7)) <= 1e-8
    assert abs(got.b[0] - (math.exp(0.7) - 1.0)) <= 1e-8
