import numpy as np
import pytest

from stratretract.errors import ConfigError, DomainError, InvalidActionError
from stratretract.scenarios import SCENARIOS, custom_scenario, d3_action, get_scenario
from stratretract.strata import (
    ConicalChart,
    GroupAction,
    Stratum,
    StratifiedScenario,
    chart_conicality_check,
    order_check,
    orbit_type,
)

NAMES = list(SCENARIOS)


@pytest.mark.parametrize("name", NAMES)
def test_order_check_builtin(name):
    rep = order_check(get_scenario(name))
    assert rep.passed, rep.failures()


def test_order_check_missing_edge_fails():
    s = get_scenario("FLAG3")
    broken = s.with_order(s.order - {("X0", "X1")})
    rep = order_check(broken)
    bad = [e.name for e in rep.failures()]
    assert "frontier X0<X1" in bad


def test_order_check_single_stratum_vacuous():
    s = get_scenario("FLAG3")
    single = StratifiedScenario("one", 3, (s.stratum("X2"),), frozenset())
    assert order_check(single).passed


def test_order_check_non_transitive():
    s = get_scenario("FLAG3")
    rep = order_check(s.with_order({("X0", "X1"), ("X1", "X2")}))
    assert not rep.passed


@pytest.mark.parametrize("name", NAMES)
def test_sampler_outputs_on_stratum(name):
    s = get_scenario(name)
    rng = np.random.default_rng(5)
    for t in s.strata:
        for p in t.sample(rng, 30):
            assert t.residual_norm(p) <= 1e-12
            assert not t.exclude(p)


@pytest.mark.parametrize("name", NAMES)
def test_conicality_all_charts(name):
    s = get_scenario(name)
    rng = np.random.default_rng(11)
    for t in s.strata:
        for chart in t.charts(rng, 3):
            rep = chart_conicality_check(chart, s, samples=30, owner=t.id)
            assert rep.passed, (t.id, rep.failures())


def test_cone_chart_scaling_exact():
    s = get_scenario("CONE2")
    chart = s.stratum("X0").chart_for(np.zeros(3))
    rep = chart_conicality_check(chart, s, samples=40, owner="X0")
    cone = [e for e in rep.entries if e.name == "cone X1"][0]
    assert cone.worst <= 1e-12


def test_flag_chart_on_axis():
    s = get_scenario("FLAG3")
    chart = s.stratum("X1").chart_for(np.array([1.0, 0.0, 0.0]))
    assert chart is not None
    assert chart_conicality_check(chart, s, owner="X1").passed


def _parabola():
    """{0} and the parabola y = x^2 minus 0 in R^2: not conical at 0."""
    origin = Stratum(
        "O", 0, residual=lambda p: np.asarray(p, dtype=float), exclude=lambda p: False,
        sampler=lambda rng, k: np.zeros((k, 2)),
    )
    par = Stratum(
        "P", 1, residual=lambda p: np.array([p[1] - p[0] ** 2]), exclude=lambda p: abs(p[0]) <= 1e-12,
        sampler=lambda rng, k: np.array([[x, x * x] for x in rng.uniform(0.2, 1.0, k)]),
    )
    s = StratifiedScenario("PARABOLA", 2, (origin, par), frozenset({("O", "P")}))
    chart = ConicalChart(center=np.zeros(2), theta=lambda p: np.array(p, dtype=float),
                         theta_inv=lambda c: np.array(c, dtype=float), split_k=0)
    return s, chart


def test_parabola_chart_not_conical():
    s, chart = _parabola()
    rep = chart_conicality_check(chart, s, samples=20, owner="O")
    assert not rep.passed
    assert [e.name for e in rep.failures()] == ["cone P"]


def test_parabola_explicit_points():
    s, chart = _parabola()
    pts = {"P": np.array([[0.5, 0.25], [-0.3, 0.09]])}
    rep = chart_conicality_check(chart, s, owner="O", points=pts)
    assert not rep.passed


# -- orbit types --------------------------------------------------------------


def test_orbit_type_d3_origin_full():
    o = orbit_type(d3_action(), [0.0, 0.0])
    assert o.label == "full" and o.order == 6


def test_orbit_type_d3_mirror():
    o = orbit_type(d3_action(), [1.0, 0.0])
    assert o.label == "reflection" and o.order == 2


def test_orbit_type_d3_mirrors_conjugate():
    a = orbit_type(d3_action(), [1.0, 0.0])
    ang = 2 * np.pi / 3
    b = orbit_type(d3_action(), [np.cos(ang), np.sin(ang)])
    assert a.key == b.key


def test_orbit_type_circle():
    act = GroupAction("circle", weights=(1, -1))
    assert orbit_type(act, [1.0, 0.0, 1.0, 0.0]).label == "trivial"
    assert orbit_type(act, [0.0, 0.0, 0.0, 0.0]).label == "full"
    assert orbit_type(GroupAction("circle", weights=(2, 4)), [1.0, 0, 1.0, 0]).label == "Z2"


def test_orbit_type_rejects_nonfinite():
    with pytest.raises(DomainError):
        orbit_type(d3_action(), [np.nan, 0.0])


@pytest.mark.parametrize("name", ["MOMZERO", "D3RED", "CRIT11"])
def test_orbit_type_constant_on_strata(name):
    s = get_scenario(name)
    rng = np.random.default_rng(2)
    for t in s.strata:
        keys = {orbit_type(s.action, p).key for p in t.sample(rng, 100)}
        assert len(keys) == 1, (t.id, keys)


@pytest.mark.parametrize("name", ["MOMZERO", "D3RED", "CRIT11"])
def test_residuals_group_invariant(name):
    s = get_scenario(name)
    rng = np.random.default_rng(3)
    for t in s.strata:
        for p in t.sample(rng, 30):
            for g in s.action.test_matrices():
                assert t.residual_norm(g @ p) <= 1e-9


def test_d3_group_order():
    assert len(d3_action().elements()) == 6


def test_group_order_cap():
    rot = np.array([[np.cos(0.1), -np.sin(0.1)], [np.sin(0.1), np.cos(0.1)]])
    with pytest.raises(InvalidActionError):
        GroupAction("finite", (rot,)).elements()


def test_custom_scenarios():
    s = custom_scenario({"family": "linear_flag", "n": 4, "dims": [0, 2, 3]})
    assert [t.dim for t in s.strata] == [0, 2, 3]
    assert order_check(s).passed
    with pytest.raises(ConfigError):
        custom_scenario({"family": "nope"})
    with pytest.raises(ConfigError):
        get_scenario("X")
