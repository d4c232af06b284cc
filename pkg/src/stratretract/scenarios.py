"""Built-in scenario library with explicit conical charts.

Every family supplies charts that are already adapted to the lower strata
(the tangential coordinates of a chart of ``Y`` are constant along the
fibers of every lower stratum), so the chart-induced Euler fields are
tangential and pre-commuting before any cut-off.

* ``linear_flag`` / FLAG3: ``R^{d_0} < R^{d_1} \\ R^{d_0} < ...`` in R^n.
* CONE2: the apex and the double cone ``x^2 + y^2 = z^2`` in R^3.
* ``momentum`` / MOMZERO / CRIT11: the zero level of the weighted circle
  moment map ``1/2 (a |z1|^2 - b |z2|^2)`` on C^2.
* D3RED: the orbit-type strata of the dihedral group of order 6 on R^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .smoothcore import ScalarField, atan2, cos, sin, sqrt, value_of
from .strata import ConicalChart, GroupAction, Stratum, StratifiedScenario
from .tubular import DistanceSpec, TubularRecipe, chart_model

TWO_PI = 2 * math.pi


def _wrap(a):
    """Reduce an angle to (-pi, pi]; works on dual numbers."""
    return a - TWO_PI * round(value_of(a) / TWO_PI)


def _residual_fields(res: Callable, count: int, dual: bool = True) -> tuple:
    return tuple(ScalarField(lambda p, i=i: res(p)[i], dual=dual) for i in range(count))


def _norm(v):
    return sqrt(sum(c * c for c in v))


def _obj_concat(*parts):
    out = []
    for part in parts:
        out.extend(list(part))
    if any(not isinstance(x, (float, int, np.floating)) for x in out):
        return np.array(out, dtype=object)
    return np.array(out, dtype=float)


def _radial_chart(n: int, k: int = 0, cones: Optional[dict] = None) -> ConicalChart:
    return ConicalChart(
        center=np.zeros(n),
        theta=lambda p: np.array(p, copy=True),
        theta_inv=lambda c: np.array(c, copy=True),
        split_k=k,
        cone_membership=cones or {},
        dual=True,
    )


# ---------------------------------------------------------------------------
# Linear flags
# ---------------------------------------------------------------------------


def linear_flag(n: int = 3, dims: tuple = (0, 1, 2), kappa: float = 1.0, delta0: float = 3.0, name: str = "FLAG3") -> StratifiedScenario:
    """Strata ``X_j = R^{d_j} \\ R^{d_{j-1}}`` (``X_0 = R^{d_0}``) of ``R^{d_top}``.

    Chart of ``X_j`` (coordinates ``u | w | y`` split at ``d_{j-1}, d_j``):
    ``(u, w sqrt(|w|^2 + |y|^2) / |w|, y)``.  It keeps ``u`` and
    ``|w|^2 + |y|^2`` along fibers, which are exactly the lower-strata data.
    Cut-off scale ``delta_j = kappa |w'|^2`` shrinks the tube toward the lower strata.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 1 or any(b <= a for a, b in zip(dims, dims[1:])) or dims[-1] > n or dims[0] < 0:
        raise ConfigError(f"linear_flag needs increasing dims <= n, got {dims} in R^{n}")
    if not (0 < kappa < 1.5):
        raise ConfigError("kappa must lie in (0, 1.5) so the cut tube stays in the chart")
    ids = [f"X{j}" for j in range(len(dims))]
    strata = []
    recipes = {}
    schedule = {}

    def in_block(p, lo, hi):
        return float(np.linalg.norm(np.asarray(p[lo:hi], dtype=float)))

    for j, d in enumerate(dims):
        lo = dims[j - 1] if j > 0 else 0

        def residual(p, d=d):
            return p[d:]

        if j == 0:
            def exclude(p):
                return False

            def sampler(rng, k, d=d):
                out = np.zeros((k, n))
                if d:
                    out[:, :d] = rng.uniform(-1.0, 1.0, (k, d))
                return out

            cones = {}
            for i in range(1, len(dims)):
                def cone(y, i=i):
                    y = np.asarray(y, dtype=float)
                    tail = y[dims[i] - dims[0] :]
                    block = y[dims[i - 1] - dims[0] : dims[i] - dims[0]]
                    return not np.any(tail) and bool(np.any(block))

                cones[ids[i]] = cone
            chart = _radial_chart(n, dims[0], cones)
            chart_for = lambda p, c=chart: c  # noqa: E731
            delta = float(delta0)
            schedule[ids[j]] = f"W = {{|y|^2 < {2 * delta / 3:g}}} around R^{d}"
        else:
            def exclude(p, lo=lo, d=d):
                return in_block(p, lo, d) <= 1e-12

            def sampler(rng, k, lo=lo, d=d):
                out = np.zeros((k, n))
                if lo:
                    out[:, :lo] = rng.uniform(-1.0, 1.0, (k, lo))
                w = rng.normal(size=(k, d - lo))
                w /= np.linalg.norm(w, axis=1, keepdims=True)
                w *= rng.uniform(0.1, 1.5, (k, 1))
                out[:, lo:d] = w
                return out

            def theta(p, lo=lo, d=d):
                u, w, y = p[:lo], p[lo:d], p[d:]
                nw = _norm(w)
                scale = sqrt(nw * nw + sum(c * c for c in y)) / nw
                return _obj_concat(u, [c * scale for c in w], y)

            def theta_inv(c, lo=lo, d=d):
                u, w, y = c[:lo], c[lo:d], c[d:]
                nw = _norm(w)
                scale = sqrt(nw * nw - sum(e * e for e in y)) / nw
                return _obj_concat(u, [e * scale for e in w], y)

            def image_domain(c, lo=lo, d=d):
                return float(np.dot(c[d:], c[d:])) < float(np.dot(c[lo:d], c[lo:d]))

            def domain(p, lo=lo, d=d):
                return in_block(p, lo, d) > 1e-12

            cones = {}
            for i in range(j + 1, len(dims)):
                def cone(y, i=i, d=d):
                    y = np.asarray(y, dtype=float)
                    tail = y[dims[i] - d :]
                    block = y[dims[i - 1] - d : dims[i] - d]
                    return not np.any(tail) and bool(np.any(block))

                cones[ids[i]] = cone
            chart = ConicalChart(
                center=np.eye(n)[lo],
                theta=theta,
                theta_inv=theta_inv,
                split_k=d,
                cone_membership=cones,
                domain=domain,
                image_domain=image_domain,
                dual=True,
            )

            def chart_for(p, c=chart):
                return c if c.domain(p) else None

            def delta(q, lo=lo, d=d):
                return kappa * float(np.dot(q[lo:d], q[lo:d]))

            schedule[ids[j]] = f"W = {{|y|^2 < {2 * kappa / 3:g} (|w|^2 + |y|^2)}} around X{j}"
        stratum = Stratum(
            id=ids[j],
            dim=d,
            residual=residual,
            exclude=exclude,
            sampler=sampler,
            chart_for=chart_for,
            normal_functions=_residual_fields(residual, n - d),
        )
        strata.append(stratum)
        recipes[ids[j]] = TubularRecipe(chart_model(stratum, chart_for), delta, schedule[ids[j]])
    order = frozenset((ids[i], ids[j]) for i in range(len(dims)) for j in range(i + 1, len(dims)))
    return StratifiedScenario(
        name=name,
        n=n,
        strata=tuple(strata),
        order=order,
        schedule=schedule,
        recipes=recipes,
        box=1.6,
        section="sec. 3-5 (flag example)",
        extras={"family": "linear_flag", "dims": dims},
    )


# ---------------------------------------------------------------------------
# Quadratic cone
# ---------------------------------------------------------------------------


def cone2(delta1: float = 0.75, delta0: float = 3.0) -> StratifiedScenario:
    """Apex ``{0}`` and the double cone ``x^2 + y^2 = z^2`` minus the apex.

    Chart of the cone: ``(|p| (x, y) / r, psi - psi_0)`` with polar angle
    ``psi = atan2(r, z)`` and ``psi_0 = pi/4`` (upper) or ``3 pi/4`` (lower).
    """
    if not (0 < delta1 * 2 / 3 < (math.pi / 4) ** 2):
        raise ConfigError("delta1 too large: the cut tube would cross the nappe boundary")

    def res0(p):
        return p

    def res1(p):
        return np.array([p[0] ** 2 + p[1] ** 2 - p[2] ** 2])

    def cone_pred(y):
        y = np.asarray(y, dtype=float)
        return bool(np.any(y)) and abs(y[0] ** 2 + y[1] ** 2 - y[2] ** 2) <= 1e-12 * float(y @ y)

    chart0 = _radial_chart(3, 0, {"X1": cone_pred})
    x0 = Stratum("X0", 0, res0, lambda p: False, lambda rng, k: np.zeros((k, 3)), lambda p: chart0, _residual_fields(res0, 3))

    def make_chart(upper: bool) -> ConicalChart:
        psi0 = math.pi / 4 if upper else 3 * math.pi / 4

        def theta(p):
            r = sqrt(p[0] * p[0] + p[1] * p[1])
            R = sqrt(r * r + p[2] * p[2])
            psi = atan2(r, p[2])
            return _obj_concat([R * p[0] / r, R * p[1] / r], [psi - psi0])

        def theta_inv(c):
            R = sqrt(c[0] * c[0] + c[1] * c[1])
            psi = psi0 + c[2]
            return _obj_concat([c[0] * sin(psi), c[1] * sin(psi)], [R * cos(psi)])

        def domain(p):
            r = math.hypot(p[0], p[1])
            return r > 1e-12 and ((p[2] > 0) if upper else (p[2] < 0))

        def image_domain(c):
            return abs(c[2]) < math.pi / 4 and (c[0] != 0 or c[1] != 0)

        return ConicalChart(np.array([0.0, 1.0, 1.0 if upper else -1.0]), theta, theta_inv, 2, {}, domain, image_domain, True)

    up, down = make_chart(True), make_chart(False)

    def chart_for(p):
        for c in (up, down):
            if c.domain(p):
                return c
        return None

    def sampler1(rng, k):
        R = rng.uniform(0.2, 1.5, k)
        az = rng.uniform(0, TWO_PI, k)
        sgn = rng.choice([-1.0, 1.0], k)
        r = R / math.sqrt(2)
        return np.stack([r * np.cos(az), r * np.sin(az), sgn * r], axis=1)

    x1 = Stratum(
        "X1", 2, res1, lambda p: float(np.linalg.norm(p)) <= 1e-12, sampler1, chart_for, _residual_fields(res1, 1)
    )
    recipes = {
        "X0": TubularRecipe(chart_model(x0, lambda p: chart0), float(delta0), "ball |p|^2 < 2"),
        "X1": TubularRecipe(chart_model(x1, chart_for), float(delta1), "|psi - psi_0| < 0.707"),
    }
    return StratifiedScenario(
        name="CONE2",
        n=3,
        strata=(x0, x1),
        order=frozenset({("X0", "X1")}),
        schedule={k: v.note for k, v in recipes.items()},
        recipes=recipes,
        box=1.6,
        section="sec. 3 (conical fibers)",
        extras={"family": "cone"},
    )


# ---------------------------------------------------------------------------
# Circle moment-map zero level
# ---------------------------------------------------------------------------


def momentum(weights: tuple = (1, -1), delta1: float = 0.75, delta0: float = 3.0, name: str = "MOMZERO", crit: bool = False) -> StratifiedScenario:
    """Zero level ``a |z1|^2 = b |z2|^2`` of the circle moment map on C^2.

    Weights must be ``(a, -b)`` with ``a, b > 0``.  With ``s_1 = sqrt(a)|z1|``,
    ``s_2 = sqrt(b)|z2|`` the chart of the nonzero part is
    ``(R, arg z1 - c1, arg z2 - c2, atan2(s_2, s_1) - pi/4)`` centred at the
    arguments ``c_j`` of the fiber; the radial stratum uses ``rho = a|z1|^2 + b|z2|^2``.
    ``crit=True`` uses the gradient norm of ``|mu|^2`` as the membership
    residual (the CRIT11 scenario).
    """
    a, mb = (int(w) for w in weights)
    if a <= 0 or mb >= 0:
        raise ConfigError("momentum scenario needs weights (a, -b) with a, b > 0")
    b = -mb
    ra, rb = math.sqrt(a), math.sqrt(b)
    action = GroupAction("circle", weights=(a, mb))

    def mu(p):
        return 0.5 * (a * (p[0] * p[0] + p[1] * p[1]) - b * (p[2] * p[2] + p[3] * p[3]))

    def res0(p):
        return p

    if crit:
        def res1(p):
            m = mu(p)
            grad = np.array([a * p[0], a * p[1], -b * p[2], -b * p[3]])
            return np.array([2.0 * abs(m) * float(np.linalg.norm(grad))])
    else:
        def res1(p):
            return np.array([mu(p)])

    gram = np.diag([a, a, b, b]).astype(float)
    cone_pred = lambda y: bool(np.any(y)) and abs(mu(np.asarray(y, dtype=float))) <= 1e-12 * float(np.dot(y, y))  # noqa: E731
    chart0 = _radial_chart(4, 0, {"X1": cone_pred})
    x0 = Stratum("X0", 0, res0, lambda p: False, lambda rng, k: np.zeros((k, 4)), lambda p: chart0, _residual_fields(res0, 4))

    def chart_at(c1: float, c2: float) -> ConicalChart:
        def theta(p):
            s1 = ra * sqrt(p[0] * p[0] + p[1] * p[1])
            s2 = rb * sqrt(p[2] * p[2] + p[3] * p[3])
            R = sqrt(s1 * s1 + s2 * s2)
            return _obj_concat([R, _wrap(atan2(p[1], p[0]) - c1), _wrap(atan2(p[3], p[2]) - c2)], [atan2(s2, s1) - math.pi / 4])

        def theta_inv(c):
            psi = math.pi / 4 + c[3]
            r1 = c[0] * cos(psi) / ra
            r2 = c[0] * sin(psi) / rb
            return _obj_concat([r1 * cos(c1 + c[1]), r1 * sin(c1 + c[1]), r2 * cos(c2 + c[2]), r2 * sin(c2 + c[2])])

        def domain(p):
            return math.hypot(p[0], p[1]) > 1e-12 and math.hypot(p[2], p[3]) > 1e-12

        def image_domain(c):
            return c[0] > 0 and abs(c[3]) < math.pi / 4 and abs(c[1]) < math.pi and abs(c[2]) < math.pi

        return ConicalChart(np.array([math.cos(c1), math.sin(c1), math.cos(c2), math.sin(c2)]) / math.sqrt(2), theta, theta_inv, 3, {}, domain, image_domain, True)

    def chart_for(p):
        p = np.asarray(p, dtype=float)
        if math.hypot(p[0], p[1]) <= 1e-12 or math.hypot(p[2], p[3]) <= 1e-12:
            return None
        return chart_at(math.atan2(p[1], p[0]), math.atan2(p[3], p[2]))

    def sampler1(rng, k):
        R = rng.uniform(0.2, 1.4, k)
        a1 = rng.uniform(0, TWO_PI, k)
        a2 = rng.uniform(0, TWO_PI, k)
        r1 = R / math.sqrt(2) / ra
        r2 = R / math.sqrt(2) / rb
        return np.stack([r1 * np.cos(a1), r1 * np.sin(a1), r2 * np.cos(a2), r2 * np.sin(a2)], axis=1)

    normal = (ScalarField(lambda p: mu(p), dual=True),)
    x1 = Stratum("X1", 3, res1, lambda p: float(np.linalg.norm(p)) <= 1e-12, sampler1, chart_for, normal)
    recipes = {
        "X0": TubularRecipe(chart_model(x0, lambda p: chart0, DistanceSpec(gram)), float(delta0), "ball a|z1|^2 + b|z2|^2 < 2"),
        "X1": TubularRecipe(chart_model(x1, chart_for), float(delta1), "|atan2(s2, s1) - pi/4| < 0.707"),
    }
    return StratifiedScenario(
        name=name,
        n=4,
        strata=(x0, x1),
        order=frozenset({("X0", "X1")}),
        action=action,
        schedule={k: v.note for k, v in recipes.items()},
        recipes=recipes,
        box=1.4,
        section="sec. 7.1 (critical set)" if crit else "sec. 7 (zero level)",
        extras={"family": "momentum", "weights": (a, mb), "crit": crit},
    )


# ---------------------------------------------------------------------------
# Dihedral group of order 6 on R^2
# ---------------------------------------------------------------------------

D3_ROT = np.array([[math.cos(TWO_PI / 3), -math.sin(TWO_PI / 3)], [math.sin(TWO_PI / 3), math.cos(TWO_PI / 3)]])
D3_REF = np.array([[1.0, 0.0], [0.0, -1.0]])


def d3_action() -> GroupAction:
    return GroupAction("finite", generators=(D3_ROT, D3_REF))


def _sigma2(p):
    return p[0] ** 3 - 3 * p[0] * p[1] ** 2


def _mirror(p):
    return p[1] * (3 * p[0] ** 2 - p[1] ** 2)


def d3red(delta1: float = 0.3, delta0: float = 3.0) -> StratifiedScenario:
    """Orbit-type strata of D3 on R^2 (the upstairs model of R^2 / D3).

    ``X1a`` are the mirror rays with ``cos 3 phi = 1``, ``X1b`` those with
    ``cos 3 phi = -1``; ``X2`` is the open complement with a trivial tubular.
    Ray charts use ``(r, phi - phi_0)``.
    """
    if not (0 < delta1 * 2 / 3 < (math.pi / 6) ** 2):
        raise ConfigError("delta1 too large: ray tubes of the two classes would overlap")

    def res0(p):
        return p

    def res1(p):
        return np.array([_mirror(p)])

    def res2(p):
        return np.zeros(1)

    def scale3(p):
        return 1e-12 * (1.0 + float(np.dot(p, p)) ** 1.5)

    chart0 = _radial_chart(
        2,
        0,
        {
            "X1a": lambda y: abs(_mirror(y)) <= scale3(y) and _sigma2(y) > 0,
            "X1b": lambda y: abs(_mirror(y)) <= scale3(y) and _sigma2(y) < 0,
            "X2": lambda y: abs(_mirror(y)) > scale3(y),
        },
    )
    x0 = Stratum("X0", 0, res0, lambda p: False, lambda rng, k: np.zeros((k, 2)), lambda p: chart0, _residual_fields(res0, 2))

    def ray_chart(phi0: float) -> ConicalChart:
        def theta(p):
            r = sqrt(p[0] * p[0] + p[1] * p[1])
            return _obj_concat([r], [_wrap(atan2(p[1], p[0]) - phi0)])

        def theta_inv(c):
            return _obj_concat([c[0] * cos(phi0 + c[1]), c[0] * sin(phi0 + c[1])])

        def domain(p):
            if math.hypot(p[0], p[1]) <= 1e-12:
                return False
            return abs(_wrap(math.atan2(p[1], p[0]) - phi0)) < math.pi / 6

        def image_domain(c):
            return c[0] > 0 and abs(c[1]) < math.pi / 6

        return ConicalChart(np.array([math.cos(phi0), math.sin(phi0)]), theta, theta_inv, 1, {"X2": lambda y: bool(np.any(y))}, domain, image_domain, True)

    def family(offset: float):
        charts = [ray_chart(offset + j * TWO_PI / 3) for j in range(3)]

        def chart_for(p):
            for c in charts:
                if c.domain(p):
                    return c
            return None

        return chart_for

    def ray_sampler(offset):
        def sampler(rng, k):
            r = rng.uniform(0.1, 1.5, k)
            phi = offset + rng.integers(0, 3, k) * TWO_PI / 3
            return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)

        return sampler

    def sampler2(rng, k):
        out = []
        while len(out) < k:
            p = rng.uniform(-1.5, 1.5, 2)
            r = math.hypot(*p)
            if r > 0.05 and abs(math.sin(3 * math.atan2(p[1], p[0]))) > 0.05:
                out.append(p)
        return np.array(out)

    strata = [x0]
    recipes = {"X0": TubularRecipe(chart_model(x0, lambda p: chart0), float(delta0), "ball |p|^2 < 2")}
    for sid, offset, sign in (("X1a", 0.0, 1.0), ("X1b", math.pi / 3, -1.0)):
        chart_for = family(offset)
        st = Stratum(
            sid,
            1,
            res1,
            lambda p, sign=sign: sign * _sigma2(p) <= scale3(p),
            ray_sampler(offset),
            chart_for,
            (ScalarField(_mirror, dual=True),),
        )
        strata.append(st)
        recipes[sid] = TubularRecipe(chart_model(st, chart_for), float(delta1), "|phi - phi_0| < 0.447")
    x2 = Stratum("X2", 2, res2, lambda p: abs(_mirror(p)) <= scale3(p), sampler2)
    strata.append(x2)
    recipes["X2"] = TubularRecipe(None, 1.0, "open stratum: T = X2")
    order = frozenset({("X0", "X1a"), ("X0", "X1b"), ("X0", "X2"), ("X1a", "X2"), ("X1b", "X2")})
    return StratifiedScenario(
        name="D3RED",
        n=2,
        strata=tuple(strata),
        order=order,
        action=d3_action(),
        schedule={k: v.note for k, v in recipes.items()},
        recipes=recipes,
        box=1.5,
        section="sec. 8 (Hilbert map example)",
        extras={"family": "d3"},
    )


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioInfo:
    name: str
    factory: Callable[[], StratifiedScenario]
    ambient_dim: int
    strata: int
    action: str
    section: str


SCENARIOS = {
    "FLAG3": ScenarioInfo("FLAG3", lambda: linear_flag(), 3, 3, "none", "sec. 3-5 (flag example)"),
    "CONE2": ScenarioInfo("CONE2", cone2, 3, 2, "none", "sec. 3 (conical fibers)"),
    "MOMZERO": ScenarioInfo("MOMZERO", lambda: momentum(), 4, 2, "circle (1,-1)", "sec. 7 (zero level)"),
    "D3RED": ScenarioInfo("D3RED", d3red, 2, 4, "D3 (order 6)", "sec. 8 (Hilbert map example)"),
    "CRIT11": ScenarioInfo("CRIT11", lambda: momentum(name="CRIT11", crit=True), 4, 2, "circle (1,-1)", "sec. 7.1 (critical set)"),
}

_CACHE: dict = {}


def get_scenario(name: str) -> StratifiedScenario:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    if name not in _CACHE:
        _CACHE[name] = SCENARIOS[name].factory()
    return _CACHE[name]


CUSTOM_FAMILIES = {
    "linear_flag": lambda **kw: linear_flag(
        n=int(kw.get("n", 3)), dims=tuple(kw.get("dims", (0, 1, 2))), kappa=float(kw.get("kappa", 1.0)), name=str(kw.get("name", "custom"))
    ),
    "momentum": lambda **kw: momentum(
        weights=tuple(kw.get("weights", (1, -1))), name=str(kw.get("name", "custom")), crit=bool(kw.get("crit", False))
    ),
    "cone": lambda **kw: cone2(delta1=float(kw.get("delta", 0.75))),
    "d3": lambda **kw: d3red(delta1=float(kw.get("delta", 0.3))),
}


def custom_scenario(block: dict) -> StratifiedScenario:
    """Scenario from a declarative block ``{"family": ..., <parameters>}``."""
    if not isinstance(block, dict) or "family" not in block:
        raise ConfigError("custom scenario block needs a 'family' key")
    fam = block["family"]
    if fam not in CUSTOM_FAMILIES:
        raise ConfigError(f"unknown custom family {fam!r}; known: {', '.join(CUSTOM_FAMILIES)}")
    params = {k: v for k, v in block.items() if k != "family"}
    try:
        return CUSTOM_FAMILIES[fam](**params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad parameters for family {fam!r}: {exc}") from exc
