import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stratretract.errors import DomainError, InvalidActionError, UncoveredPointError
from stratretract.scenarios import d3_action
from stratretract.smoothcore import (
    BumpSpec,
    Dual,
    FlowOptions,
    ScalarField,
    VectorField,
    bump,
    euler_field,
    extend_by_constant,
    flow,
    group_average,
    lie_derivative,
    partition_of_unity,
    smooth_step,
    zero_field,
)
from stratretract.strata import GroupAction

SPEC = BumpSpec(1 / 3, 2 / 3)


# -- bump ---------------------------------------------------------------------


@pytest.mark.parametrize("t,want", [(0.2, 1.0), (0.8, 0.0), (0.5, 0.5)])
def test_bump_examples(t, want):
    assert bump(SPEC, t) == pytest.approx(want, abs=1e-15)


def test_bump_plateaus_and_monotone():
    assert bump(SPEC, SPEC.a) == 1.0
    assert bump(SPEC, SPEC.b) == 0.0
    grid = np.linspace(0, 1, 1000)
    vals = [bump(SPEC, t) for t in grid]
    assert all(x >= y for x, y in zip(vals, vals[1:]))
    inner = [bump(SPEC, t) for t in np.linspace(SPEC.a + 0.05, SPEC.b - 0.05, 50)]
    assert all(x > y for x, y in zip(inner, inner[1:]))


@pytest.mark.parametrize("t0", [1 / 3, 2 / 3])
def test_bump_flat_at_plateau_edges(t0):
    h = 1e-3
    d1 = (bump(SPEC, t0 + h) - bump(SPEC, t0 - h)) / (2 * h)
    d2 = (bump(SPEC, t0 + h) - 2 * bump(SPEC, t0) + bump(SPEC, t0 - h)) / h**2
    assert abs(d1) <= 1e-6 and abs(d2) <= 1e-6


def test_bump_rejects_negative_and_bad_spec():
    with pytest.raises(DomainError):
        bump(SPEC, -0.1)
    with pytest.raises(Exception):
        BumpSpec(1.0, 0.5)


def test_smooth_step_plateaus():
    assert smooth_step(0.0) == 0.0 and smooth_step(0.1) == 0.0
    assert smooth_step(0.9) == 1.0 and smooth_step(1.0) == 1.0
    assert smooth_step(0.5) == pytest.approx(0.5)


# -- Lie derivative -----------------------------------------------------------

E2 = euler_field(2)


def test_lie_derivative_examples():
    x1 = ScalarField(lambda p: p[0], dual=True)
    sq = ScalarField(lambda p: p[0] * p[0] + p[1] * p[1], dual=True)
    assert lie_derivative(E2, x1, [3.0, 0.0]) == pytest.approx(3.0)
    assert lie_derivative(E2, sq, [1.0, 1.0]) == pytest.approx(4.0)
    assert lie_derivative(zero_field(2), sq, [0.3, -2.0]) == 0.0


def test_lie_derivative_opaque_matches_dual():
    f_dual = ScalarField(lambda p: p[0] * p[1] + p[1] ** 3, dual=True)
    f_fd = ScalarField(lambda p: float(p[0] * p[1] + p[1] ** 3))
    p = [0.4, -1.2]
    assert lie_derivative(E2, f_fd, p) == pytest.approx(lie_derivative(E2, f_dual, p), rel=1e-7)


def test_euler_homogeneity_of_square_norm():
    rng = np.random.default_rng(0)
    rho = ScalarField(lambda p: float(np.dot(p, p)))
    e3 = euler_field(3)
    for p in rng.normal(size=(100, 3)):
        assert lie_derivative(e3, rho, p) == pytest.approx(2 * np.dot(p, p), rel=1e-9)


def test_lie_derivative_domain_error():
    f = ScalarField(lambda p: p[0], domain=lambda p: p[0] > 0)
    with pytest.raises(DomainError):
        lie_derivative(E2, f, [-1.0, 0.0])


def test_dual_numbers_chain_rule():
    from stratretract.smoothcore import atan2

    x = Dual(0.7, 1.0)
    y = (x * x + 1) / x
    assert y.val == pytest.approx(0.7 + 1 / 0.7)
    assert y.der == pytest.approx(1 - 1 / 0.49)
    a = atan2(Dual(1.0, 1.0), Dual(1.0, 0.0))
    assert a.der == pytest.approx(0.5)


def test_jacobian_agrees_with_finite_differences():
    def fn(p):
        return np.array([p[0] * p[1], math.sin(p[0]) + p[1] ** 2])

    field = VectorField(fn)
    p = np.array([0.3, 1.1])
    J = field.jacobian(p)
    want = np.array([[p[1], p[0]], [math.cos(p[0]), 2 * p[1]]])
    assert np.allclose(J, want, rtol=1e-5, atol=1e-8)


# -- flow ---------------------------------------------------------------------


def test_flow_linear_field():
    out = flow(E2, [1.0, 2.0], math.log(0.5))
    assert np.allclose(out, [0.5, 1.0], atol=1e-9)


def test_flow_zero_time_is_identity():
    p = np.array([1.0, 0.0])
    assert np.array_equal(flow(E2, p, 0.0), p)


def test_flow_rotation_oracle():
    rot = VectorField(lambda p: np.array([p[1], -p[0]]))
    out = flow(rot, [1.0, 0.0], math.pi / 2)
    assert np.allclose(out, [0.0, -1.0], atol=1e-7)


@given(
    st.floats(-1.0, 1.0),
    st.floats(-1.0, 1.0),
    st.floats(-1.0, 1.0),
    st.floats(-1.0, 1.0),
)
def test_flow_semigroup(x, y, s, t):
    field = VectorField(lambda p: np.array([p[1], -p[0] + 0.3 * math.sin(p[0])]))
    p = np.array([x, y])
    a = flow(field, flow(field, p, s), t)
    b = flow(field, p, s + t)
    assert np.linalg.norm(a - b) <= 1e-6 * (1 + np.linalg.norm(p))


def test_flow_step_limit():
    from stratretract.errors import NonConvergenceError

    with pytest.raises(NonConvergenceError):
        flow(VectorField(lambda p: np.array([math.cos(50 * p[0]), 1.0])), [0.0, 0.0], 50.0, FlowOptions(max_steps=5))


def test_flow_options_validated():
    with pytest.raises(Exception):
        FlowOptions(rel_tol=-1.0)
    with pytest.raises(Exception):
        FlowOptions(tau_min=1.0)


# -- partition of unity -------------------------------------------------------


def test_partition_single_ball():
    (phi,) = partition_of_unity([(np.zeros(2), 1.0)])
    assert phi([0.0, 0.0]) == 1.0


def test_partition_identical_balls():
    phis = partition_of_unity([(np.zeros(2), 1.0), (np.zeros(2), 1.0)])
    assert [f([0.2, 0.1]) for f in phis] == [0.5, 0.5]


def test_partition_overlapping_balls():
    phis = partition_of_unity([(np.zeros(2), 1.0), (np.array([1.0, 0.0]), 1.0)])
    w = [f([0.9, 0.0]) for f in phis]
    assert sum(w) == pytest.approx(1.0, abs=1e-12)
    assert 0 < w[0] < 1


def test_partition_support_and_uncovered():
    phis = partition_of_unity([(np.zeros(2), 1.0), (np.array([1.0, 0.0]), 1.0)])
    assert phis[0]([1.5, 0.0]) == 0.0
    with pytest.raises(UncoveredPointError):
        phis[0]([5.0, 5.0])


@given(st.floats(-0.6, 1.6), st.floats(-0.5, 0.5))
def test_partition_sums_to_one(x, y):
    phis = partition_of_unity([(np.zeros(2), 1.0), (np.array([1.0, 0.0]), 1.0)])
    assert sum(f([x, y]) for f in phis) == pytest.approx(1.0, abs=1e-12)


# -- constant extension -------------------------------------------------------


def test_extend_constant_case():
    f = ScalarField(lambda p: 3.0)
    g = extend_by_constant(f, 3.0, lambda p: np.dot(p, p) <= 1)
    assert g([0.1, 0.1]) == 3.0 and g([5.0, 0.0]) == 3.0


def test_extend_bump_by_zero():
    f = ScalarField(lambda p: bump(SPEC, float(np.dot(p, p))))
    g = extend_by_constant(f, 0.0, lambda p: np.dot(p, p) <= 2 / 3)
    assert g([math.sqrt(0.9), 0.0]) == 0.0
    assert g([0.0, 0.0]) == 1.0


# -- group averaging ----------------------------------------------------------


def test_average_odd_field_under_minus_identity():
    act = GroupAction("finite", (-np.eye(2),))
    avg = group_average(VectorField(lambda p: np.array([1.0, 0.0])), act)
    assert np.allclose(avg([0.3, 0.2]), 0.0)


def test_average_fixes_invariant_field():
    avg = group_average(E2, d3_action())
    p = np.array([0.3, -0.8])
    assert np.allclose(avg(p), E2(p), atol=1e-14)


def test_average_constant_field_d3_vanishes():
    act = GroupAction("finite", tuple(g for g in d3_action().elements() if np.linalg.det(g) > 0))
    avg = group_average(VectorField(lambda p: np.array([1.0, 0.0])), act)
    assert np.linalg.norm(avg([0.4, 0.1])) <= 1e-12


def test_average_is_equivariant():
    act = d3_action()
    field = VectorField(lambda p: np.array([p[0] ** 2, p[0] * p[1] + 1.0]))
    avg = group_average(field, act)
    rng = np.random.default_rng(1)
    for p in rng.normal(size=(100, 2)):
        for g in act.generators:
            assert np.linalg.norm(g @ avg(p) - avg(g @ p)) <= 1e-9


def test_circle_average_equivariant():
    act = GroupAction("circle", weights=(1, -1))
    avg = group_average(VectorField(lambda p: np.array([p[0], 0.0, 0.0, p[1]])), act)
    p = np.array([0.3, 0.1, -0.5, 0.7])
    for g in act.test_matrices():
        assert np.linalg.norm(g @ avg(p) - avg(g @ p)) <= 1e-9


def test_non_orthogonal_action_rejected():
    with pytest.raises(InvalidActionError):
        GroupAction("finite", (np.array([[2.0, 0.0], [0.0, 1.0]]),))
