"""Euler-like fields, induced tubular neighbourhoods, convenient cut-offs, shrinking.

Two realizations of the tubular structure induced by a cut-off field
``(h o rho) V`` are provided:

* the *ray* route uses that such a flow moves along the fibers of ``V`` with
  scalar speed, ``Psi^t(v) = m^{exp_{h, rho(v)}(t)}(v)``, so multiplication only
  needs the scalar ODE :func:`exp_h_s` and the distance has the closed form
  ``a * exp(int_a^rho dR / (h(R) R))`` above the plateau;
* the *flow* route integrates the ambient vector field with the RK4(5)
  integrator and realizes ``m^0`` by flowing to ``tau_min`` and projecting.

The ray route is exact up to the scalar ODE and is used by the builders; the
flow route is the cross-check and the fallback for fields without a linear
model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import (
    DomainError,
    NotASubmersionError,
    NotConvenientError,
    NonConvergenceError,
    OutsideTubularError,
    PreconditionError,
)
from .smoothcore import (
    DEFAULT_FLOW,
    BumpSpec,
    Dual,
    FlowOptions,
    ScalarField,
    VectorField,
    bump,
    flow,
    integrate_scalar,
)
from .strata import ConicalChart, Stratum

Point = np.ndarray

CUT_SPEC = BumpSpec(1 / 3, 2 / 3)
SCALAR_RTOL = 1e-12
SCALAR_ATOL = 1e-14


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistanceSpec:
    """Quadratic form on fiber coordinates; ``None`` means Euclidean."""

    gram: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.gram is not None:
            g = np.asarray(self.gram, dtype=float)
            if not np.allclose(g, g.T) or np.min(np.linalg.eigvalsh(g)) <= 0:
                raise DomainError("distance form must be symmetric positive definite")

    def __call__(self, y) -> float:
        y = np.asarray(y, dtype=float)
        if self.gram is None:
            return float(y @ y)
        return float(y @ np.asarray(self.gram, dtype=float) @ y)


@dataclass(frozen=True)
class TubularData:
    """Tubular neighbourhood ``(V_X, T_X, m_X^t, rho_X)`` of one stratum.

    ``rho`` returns ``inf`` off the membership set; ``mult(t, v)`` is the
    identity off the membership set for ``t > 0``.
    """

    stratum: Stratum
    field: VectorField
    membership: Callable[[Point], bool]
    mult: Callable[[float, Point], Point]
    project: Callable[[Point], Point]
    rho: ScalarField
    bump_history: tuple = ()


@dataclass(frozen=True)
class LinearModel:
    """Exact fiber scaling of an Euler field, induced by conical charts.

    ``mult`` may raise :class:`DomainError` when the scaled point leaves the
    chart image; ``membership`` is the chart-induced neighbourhood.
    """

    stratum: Stratum
    field: VectorField
    membership: Callable[[Point], bool]
    mult: Callable[[float, Point], Point]
    project: Callable[[Point], Point]
    rho: Callable[[Point], float]


# ---------------------------------------------------------------------------
# Scalar ODE and the shrunk distance
# ---------------------------------------------------------------------------


def exp_h_s(spec: BumpSpec, s: float, t: float, rel_tol: float = SCALAR_RTOL, abs_tol: float = SCALAR_ATOL) -> float:
    """Solution at time ``t`` of ``e' = h(s e^2) e``, ``e(0) = 1``.

    Integrated as ``u = log e`` with ``u' = h(s exp(2u))``; the plateau
    ``s e^2 <= a`` is solved in closed form.
    """
    if s <= 0:
        raise DomainError(f"exp_h_s needs s > 0, got {s}")
    if t == 0:
        return 1.0
    a, b = spec.a, spec.b
    if s >= b:
        return 1.0
    if t < 0 and s <= a:
        return math.exp(t)
    u0 = 0.0
    rest = t
    if t > 0 and s < a:
        t1 = 0.5 * math.log(a / s)
        if t <= t1:
            return math.exp(t)
        u0, rest = t1, t - t1

    def rhs(u: float) -> float:
        r = s * math.exp(2.0 * u)
        return bump(spec, r)

    u = integrate_scalar(rhs, u0, rest, rel_tol, abs_tol)
    return math.exp(u)


def _inv_hr(spec: BumpSpec, r: float) -> float:
    h = bump(spec, r)
    return math.inf if h == 0.0 else 1.0 / (h * r)


def shrunk_distance(spec: BumpSpec, y: float) -> float:
    """New distance as a function of the old one after shrinking by ``h``.

    ``y`` below ``a`` is unchanged; above, ``a exp(int_a^y dR / (h(R) R))``;
    ``inf`` at and beyond ``b``.
    """
    a, b = spec.a, spec.b
    if y <= a:
        return y
    if y >= b or bump(spec, y) < 1e-290:
        return math.inf
    with warnings.catch_warnings():
        # near b the integrand blows up like exp(1/(b - r)); quad then reports
        # roundoff at a relative accuracy still far below the check tolerances
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(lambda r: _inv_hr(spec, r), a, y, epsabs=0.0, epsrel=1e-12, limit=200)
    if val > 700:
        return math.inf
    return a * math.exp(val)


def c_prime(spec: BumpSpec, c: float) -> float:
    """Old distance of the point whose shrunk distance is ``c``.

    ``c' = exp_{h, a/2}(-log t0)^2 * a/2`` with ``t0 = sqrt(a / (2c))``.
    """
    half = spec.a / 2
    t0 = math.sqrt(half / c)
    return exp_h_s(spec, half, -math.log(t0)) ** 2 * half


# ---------------------------------------------------------------------------
# Euler-like criterion and chart-induced fields
# ---------------------------------------------------------------------------


@dataclass
class EulerLikeReport:
    eps: tuple
    residuals: tuple
    ratios: tuple
    bounded: bool

    @property
    def growth(self) -> float:
        mags = [abs(r) for r in self.ratios]
        out = 0.0
        for x, y in zip(mags, mags[1:]):
            out = max(out, y / max(x, RATIO_FLOOR))
        return out


EPS_LADDER = (1e-2, 1e-3, 1e-4)
RATIO_FLOOR = 0.1


def euler_like_residual(
    field: VectorField,
    stratum: Optional[Stratum],
    f: ScalarField,
    q,
    u,
    eps_ladder: Sequence[float] = EPS_LADDER,
) -> EulerLikeReport:
    """Order-2 test: ``(f - L_V f)(q + eps u) / eps^2`` must stay bounded.

    Bounded means no growth by more than 2x between consecutive ladder
    entries, with ratios below ``RATIO_FLOOR`` in magnitude treated as zero.
    """
    q = np.asarray(q, dtype=float)
    u = np.asarray(u, dtype=float)
    if abs(f.eval(q)) > 1e-12:
        raise PreconditionError(f"test function does not vanish at {q}")
    if stratum is not None and stratum.residual_norm(q) > 1e-12:
        raise PreconditionError(f"{q} is not on stratum {stratum.id}")
    res, rat = [], []
    for eps in eps_ladder:
        p = q + eps * u
        r = f.eval(p) - f.directional(p, field.eval(p))
        res.append(r)
        rat.append(r / eps**2)
    bounded = all(abs(y) <= 2.0 * max(abs(x), RATIO_FLOOR) for x, y in zip(rat, rat[1:]))
    return EulerLikeReport(tuple(eps_ladder), tuple(res), tuple(rat), bounded)


def euler_from_chart(chart: ConicalChart) -> VectorField:
    """Pull back of ``sum y_i d/dy_i``: ``D theta^{-1} (0, y)`` at ``theta(p)``."""
    k = chart.split_k

    def fn(p):
        c = np.asarray(chart.theta(p), dtype=float)
        direction = np.concatenate([np.zeros(k), c[k:]])
        if not np.any(direction):
            return np.zeros_like(p, dtype=float)
        if chart.dual:
            seeded = np.array([Dual(a, d) for a, d in zip(c, direction)], dtype=object)
            out = chart.theta_inv(seeded)
            return np.array([o.der if isinstance(o, Dual) else 0.0 for o in out])
        eta = 1e-5
        plus = chart.theta_inv(c + eta * direction)
        minus = chart.theta_inv(c - eta * direction)
        return (np.asarray(plus) - np.asarray(minus)) / (2 * eta)

    def domain(p):
        if not chart.domain(p):
            return False
        return True

    return VectorField(fn, domain)


def chart_model(
    stratum: Stratum,
    chart_for: Callable[[Point], Optional[ConicalChart]],
    distance: DistanceSpec = DistanceSpec(),
) -> LinearModel:
    """Linear model ``m^t = theta^{-1}(x, t y)`` from a family of conical charts.

    ``chart_for(v)`` must return the same chart along each fiber.
    """

    def chart_of(v):
        c = chart_for(v)
        if c is None or not c.domain(v):
            return None
        return c

    def membership(v):
        return chart_of(np.asarray(v, dtype=float)) is not None

    def mult(t, v):
        v = np.asarray(v, dtype=float)
        c = chart_of(v)
        if c is None:
            raise DomainError(f"{v} outside the chart family of {stratum.id}")
        x, y = c.split(v)
        return c.join(x, t * y)

    def project(v):
        return mult(0.0, v)

    def rho(v):
        v = np.asarray(v, dtype=float)
        c = chart_of(v)
        if c is None:
            return math.inf
        return distance(c.split(v)[1])

    def fn(v):
        c = chart_of(v)
        if c is None:
            raise DomainError(f"{v} outside the chart family of {stratum.id}")
        return euler_from_chart(c).fn(v)

    return LinearModel(stratum, VectorField(fn, membership), membership, mult, project, rho)


# ---------------------------------------------------------------------------
# Chart adaptation to a submersion
# ---------------------------------------------------------------------------


def _fd_jac(fun, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(fun(x))
    J = np.empty((f0.size, x.size))
    h = step * (1 + np.linalg.norm(x))
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = h
        J[:, j] = (np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2 * h)
    return J


def adapt_chart_to_submersion(chart: ConicalChart, f: Callable[[Point], np.ndarray], p, max_cond: float = 1e6) -> ConicalChart:
    """Replace ``l`` tangential chart coordinates by the components of ``f``.

    The new inverse solves ``f(theta^{-1}(x', x_rest, y)) = phi`` by Newton's
    method, so the new Euler field is tangent to the level sets of ``f``.
    """
    p = np.asarray(p, dtype=float)
    k = chart.split_k
    c0 = np.asarray(chart.theta(p), dtype=float)
    l = np.atleast_1d(f(p)).size

    def f_of_x(x):
        return np.atleast_1d(f(chart.theta_inv(np.concatenate([x, c0[k:]]))))

    Jx = _fd_jac(f_of_x, c0[:k])
    sv = np.linalg.svd(Jx, compute_uv=False) if k else np.array([])
    if k < l or sv.size < l or sv[l - 1] <= 1e-12 * max(1.0, sv[0]):
        raise NotASubmersionError(f"f restricted to the stratum has rank < {l} at {p}")
    best, best_cond = None, math.inf
    from itertools import combinations

    for cols in combinations(range(k), l):
        cond = np.linalg.cond(Jx[:, cols])
        if cond < best_cond:
            best, best_cond = cols, cond
    if best_cond > max_cond:
        raise NotASubmersionError(f"Jacobian block condition {best_cond:.3g} exceeds {max_cond:g}")
    sel = list(best)
    rest = [j for j in range(k) if j not in sel]
    n = p.size

    def block(c):
        def g(xs):
            cc = c.copy()
            cc[sel] = xs
            return np.atleast_1d(f(chart.theta_inv(cc)))

        return _fd_jac(g, c[sel])

    radius = 0.5
    stencil = np.array(np.meshgrid(*[[-1.0, 0.0, 1.0]] * n)).reshape(n, -1).T
    while radius > 1e-6:
        ok = True
        for off in stencil:
            q = p + radius * off
            if not chart.domain(q):
                ok = False
                break
            if np.linalg.cond(block(np.asarray(chart.theta(q), dtype=float))) > max_cond:
                ok = False
                break
        if ok:
            break
        radius *= 0.5
    else:
        raise NotASubmersionError(f"no ball around {p} keeps the Jacobian invertible")

    def theta(q):
        c = np.asarray(chart.theta(q), dtype=float)
        return np.concatenate([np.atleast_1d(f(q)), c[rest], c[k:]])

    def theta_inv(cn):
        cn = np.asarray(cn, dtype=float)
        phi, xr, y = cn[:l], cn[l:k], cn[k:]
        c = c0.copy()
        c[rest] = xr
        c[k:] = y
        for _ in range(60):
            fx = np.atleast_1d(f(chart.theta_inv(c))) - phi
            if np.max(np.abs(fx)) <= 1e-14 * (1 + np.max(np.abs(phi))):
                return np.asarray(chart.theta_inv(c), dtype=float)
            c[sel] = c[sel] - np.linalg.solve(block(c), fx)
        fx = np.atleast_1d(f(chart.theta_inv(c))) - phi
        if np.max(np.abs(fx)) > 1e-10:
            raise NonConvergenceError("Newton inversion of the adapted chart failed")
        return np.asarray(chart.theta_inv(c), dtype=float)

    def domain(q):
        return chart.domain(q) and float(np.linalg.norm(q - p)) < radius

    return ConicalChart(
        center=p,
        theta=theta,
        theta_inv=theta_inv,
        split_k=k,
        cone_membership=chart.cone_membership,
        domain=domain,
        image_domain=chart.image_domain,
        dual=False,
    )


# ---------------------------------------------------------------------------
# Ray route: reparametrized fiber scaling
# ---------------------------------------------------------------------------


def _ray_tubular(
    stratum: Stratum,
    base,
    spec: BumpSpec,
    scale: Optional[Callable[[Point], float]],
    history: tuple,
) -> TubularData:
    """Tubular of ``h(rho_base / scale) V_base`` from the base fiber scaling."""
    a, b = spec.a, spec.b

    def info(v):
        r = base.rho(v)
        if r == math.inf:
            return None
        if r == 0.0:
            return (0.0, 1.0)
        sc = 1.0 if scale is None else scale(v)
        y = r / sc
        return None if y >= b else (y, sc)

    def membership(v):
        return info(np.asarray(v, dtype=float)) is not None

    def mult(t, v):
        v = np.asarray(v, dtype=float)
        if t == 1:
            return v.copy()
        if t < 0:
            raise DomainError("mult needs t >= 0")
        st = info(v)
        if st is None:
            if t > 0:
                return v.copy()
            raise OutsideTubularError(f"m^0 requested off the tubular of {stratum.id}")
        y, _ = st
        if y == 0.0:
            return v.copy()
        if t == 0:
            return base.project(v)
        return base.mult(exp_h_s(spec, y, math.log(t)), v)

    def project(v):
        v = np.asarray(v, dtype=float)
        if info(v) is None:
            raise OutsideTubularError(f"projection requested off the tubular of {stratum.id}")
        return base.project(v)

    def rho_fn(v):
        st = info(np.asarray(v, dtype=float))
        if st is None:
            return math.inf
        y, sc = st
        return sc * shrunk_distance(spec, y)

    def field_fn(v):
        st = info(v)
        if st is None or st[0] == 0.0:
            return np.zeros_like(v, dtype=float)
        w = bump(spec, st[0])
        if w == 0.0:
            return np.zeros_like(v, dtype=float)
        return w * base.field.eval(v)

    return TubularData(
        stratum=stratum,
        field=VectorField(field_fn),
        membership=membership,
        mult=mult,
        project=project,
        rho=ScalarField(rho_fn),
        bump_history=history,
    )


# ---------------------------------------------------------------------------
# Flow route: ambient integration of the cut-off field
# ---------------------------------------------------------------------------


def _flow_tubular(
    stratum: Stratum,
    field: VectorField,
    rho_raw: Callable[[Point], float],
    project_raw: Callable[[Point], Point],
    base_member: Callable[[Point], bool],
    spec: BumpSpec,
    scale: Optional[Callable[[Point], float]],
    history: tuple,
    opts: FlowOptions,
) -> TubularData:
    a, b = spec.a, spec.b

    def normalized(v):
        if not base_member(v):
            return None
        r = rho_raw(v)
        if r == math.inf:
            return None
        if r == 0.0:
            return 0.0
        y = r / (1.0 if scale is None else scale(v))
        return None if y >= b else y

    def cut_fn(v):
        y = normalized(v)
        if y is None or y == 0.0:
            return np.zeros_like(v, dtype=float)
        w = bump(spec, y)
        return np.zeros_like(v, dtype=float) if w == 0.0 else w * field.fn(v)

    cut = VectorField(cut_fn)

    def membership(v):
        return normalized(np.asarray(v, dtype=float)) is not None

    def settle(v):
        w = flow(cut, v, opts.tau_min, opts, domain=base_member)
        y = normalized(w)
        if y is None or y > a:
            raise NotConvenientError(f"backward flow from {v} did not reach the plateau by tau_min")
        return w

    def project(v):
        v = np.asarray(v, dtype=float)
        if not membership(v):
            raise OutsideTubularError(f"projection requested off the tubular of {stratum.id}")
        if rho_raw(v) == 0.0:
            return v.copy()
        return project_raw(settle(v))

    def mult(t, v):
        v = np.asarray(v, dtype=float)
        if t == 1:
            return v.copy()
        if t < 0:
            raise DomainError("mult needs t >= 0")
        y = normalized(v)
        if y is None:
            if t > 0:
                return v.copy()
            raise OutsideTubularError(f"m^0 requested off the tubular of {stratum.id}")
        if y == 0.0:
            return v.copy()
        if t <= math.exp(opts.tau_min):
            return project(v)
        return flow(cut, v, math.log(t), opts, domain=base_member)

    def rho_fn(v):
        v = np.asarray(v, dtype=float)
        y = normalized(v)
        if y is None:
            return math.inf
        if y == 0.0:
            return 0.0
        if y <= a:
            return rho_raw(v)
        w = settle(v)
        return math.exp(-2.0 * opts.tau_min) * rho_raw(w)

    return TubularData(stratum, cut, membership, mult, project, ScalarField(rho_fn), history)


# ---------------------------------------------------------------------------
# Public constructors
# ---------------------------------------------------------------------------


def make_convenient(
    field: VectorField,
    stratum: Stratum,
    rho_raw: Callable[[Point], float],
    delta,
    spec: BumpSpec = CUT_SPEC,
    *,
    model: Optional[LinearModel] = None,
    project_raw: Optional[Callable[[Point], Point]] = None,
    opts: FlowOptions = DEFAULT_FLOW,
) -> TubularData:
    """Cut ``field`` off by ``h(rho_raw / delta(m^0))`` and build its tubular.

    With a linear ``model`` of ``field`` (exact fiber scaling) the ray route
    is used; otherwise ``project_raw`` is required and the flow route is used.
    ``delta`` is a positive number or a callable evaluated at ``m^0(v)``.
    """
    if callable(delta):
        dfun = delta
    else:
        if float(delta) <= 0:
            raise DomainError("delta must be positive")
        dval = float(delta)
        dfun = lambda q: dval  # noqa: E731
    if model is not None:
        scale = lambda v: dfun(model.project(v))  # noqa: E731
        return _ray_tubular(stratum, model, spec, scale, (spec,))
    if project_raw is None:
        raise PreconditionError("flow route needs project_raw")
    scale = lambda v: dfun(project_raw(v))  # noqa: E731
    return _flow_tubular(stratum, field, rho_raw, project_raw, field.domain, spec, scale, (spec,), opts)


def shrink(tub: TubularData, spec: BumpSpec, *, route: str = "ray", opts: FlowOptions = DEFAULT_FLOW) -> TubularData:
    """Shrinking of ``tub`` by ``h_spec``: new field ``h(rho) V``."""
    history = tub.bump_history + (spec,)
    if route == "ray":
        return _ray_tubular(tub.stratum, tub, spec, None, history)
    if route == "flow":
        return _flow_tubular(
            tub.stratum, tub.field, tub.rho, tub.project, tub.membership, spec, None, history, opts
        )
    raise ValueError(f"unknown route {route!r}")


def linear_tubular(model: LinearModel) -> TubularData:
    """View a complete linear model (e.g. on R^n) as tubular data."""

    def mult(t, v):
        v = np.asarray(v, dtype=float)
        if t == 1:
            return v.copy()
        if not model.membership(v):
            if t > 0:
                return v.copy()
            raise OutsideTubularError("m^0 requested off the tubular")
        return model.mult(t, v)

    return TubularData(
        model.stratum,
        model.field,
        model.membership,
        mult,
        model.project,
        ScalarField(model.rho),
        (),
    )


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


@dataclass
class LevelSetReport:
    pairs: int
    skipped: int
    worst: float

    @property
    def passed(self) -> bool:
        return self.pairs > 0 and self.worst <= 1e-6


def shrink_levelset_check(
    tub: TubularData,
    shrunk: TubularData,
    points: Sequence[Point],
    partners: Optional[Sequence[Point]] = None,
) -> LevelSetReport:
    """Same-fiber points with equal shrunk distance have equal old distance.

    Pair ``i`` is ``(points[i], w)`` with ``w`` the partner rescaled by the
    shrunk multiplication to the same shrunk distance; pairs whose projections
    differ by more than 1e-8, or whose shrunk distance is not finite, are skipped.
    """
    partners = points[1:] + points[:1] if partners is None else partners
    worst, used, skipped = 0.0, 0, 0
    for v, w0 in zip(points, partners):
        v = np.asarray(v, dtype=float)
        w0 = np.asarray(w0, dtype=float)
        if not (shrunk.membership(v) and shrunk.membership(w0)):
            skipped += 1
            continue
        if np.linalg.norm(shrunk.project(v) - shrunk.project(w0)) > 1e-8:
            skipped += 1
            continue
        rv, rw0 = shrunk.rho(v), shrunk.rho(w0)
        # near the cut-off the shrunk distance overflows float64 although the
        # point is still a member; such pairs carry no level-set information
        if rv == 0 or rw0 == 0 or math.isinf(rv) or math.isinf(rw0):
            skipped += 1
            continue
        w = shrunk.mult(math.sqrt(rv / rw0), w0)
        if abs(shrunk.rho(w) - rv) > 1e-10:
            skipped += 1
            continue
        worst = max(worst, abs(tub.rho(v) - tub.rho(w)))
        used += 1
    return LevelSetReport(used, skipped, worst)


@dataclass
class TubularInvariants:
    samples: int
    homogeneity: float
    semigroup: float
    projection: float
    stratum_residual: float
    idempotence: float
    euler_derivative: float


def tubular_invariants(
    tub: TubularData,
    points: Sequence[Point],
    ts: Sequence[float] = (0.25, 0.5, 2.0),
    lie_points: Optional[Sequence[Point]] = None,
) -> TubularInvariants:
    """Worst errors of the tubular-data invariants over member samples.

    ``lie_points`` (inner-plateau samples) feed the ``L_V rho = 2 rho`` check.
    """
    hom = semi = proj = sres = idem = lie = 0.0
    used = 0
    for v in points:
        v = np.asarray(v, dtype=float)
        if not tub.membership(v):
            continue
        used += 1
        r = tub.rho(v)
        for t in ts:
            w = tub.mult(t, v)
            hom = max(hom, abs(tub.rho(w) - t * t * r) / max(t * t * r, 1e-300))
        for s in (0.5, 2.0):
            for t in (0.5, 2.0):
                d = np.linalg.norm(tub.mult(s, tub.mult(t, v)) - tub.mult(s * t, v))
                semi = max(semi, d / (1 + np.linalg.norm(v)))
        q = tub.project(v)
        proj = max(proj, tub.rho(q))
        sres = max(sres, tub.stratum.residual_norm(q))
        for t in (0.5, 2.0):
            idem = max(idem, float(np.linalg.norm(tub.project(tub.mult(t, v)) - q)))
    for v in lie_points or ():
        v = np.asarray(v, dtype=float)
        r = tub.rho(v)
        if r == math.inf or r == 0:
            continue
        rho_field = ScalarField(lambda p: tub.rho(p))
        lv = rho_field.directional(v, tub.field.eval(v))
        lie = max(lie, abs(lv - 2 * r) / (2 * r))
    return TubularInvariants(used, hom, semi, proj, sres, idem, lie)


@dataclass(frozen=True)
class TubularRecipe:
    """Builder input for one stratum.

    ``model`` is the chart-induced linear model (``None`` for an open stratum,
    whose tubular is the stratum itself); ``delta`` is the cut-off scale, a
    number or a function of the projection point.
    """

    model: Optional[LinearModel]
    delta: object = 1.0
    note: str = ""


def trivial_tubular(stratum: Stratum) -> TubularData:
    """Tubular of an open stratum: zero field, identity scaling, ``rho = 0``."""

    def membership(v):
        return stratum.contains(v)

    def mult(t, v):
        v = np.asarray(v, dtype=float)
        if t < 0:
            raise DomainError("mult needs t >= 0")
        return v.copy()

    def project(v):
        v = np.asarray(v, dtype=float)
        if not membership(v):
            raise OutsideTubularError(f"projection requested off {stratum.id}")
        return v.copy()

    def rho(v):
        return 0.0 if membership(v) else math.inf

    return TubularData(stratum, VectorField(lambda v: np.zeros_like(v, dtype=float)), membership, mult, project, ScalarField(rho), ())
