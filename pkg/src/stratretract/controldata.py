"""Control data: builders, conjugation and property verifiers.

``build_tangential`` runs the ascending induction (cut-off Euler fields from
the scenario charts, then shrink every lower tubular by ``h_{1/3,2/3}``);
``build_commutative`` runs the descending induction (conjugate every higher
tubular by the lower one, then shrink the lower one by ``h_{1/4,1/2}``).
The ``verify_*`` functions test the defining properties on samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, Optional, Sequence

import numpy as np

from .errors import BuildError, DomainError, OutsideTubularError, PreconditionError, StratError
from .smoothcore import (
    BumpSpec,
    ScalarField,
    VectorField,
    bump,
    group_average,
    partition_of_unity,
)
from .strata import StratifiedScenario, Stratum
from .tubular import (
    CUT_SPEC,
    TubularData,
    euler_from_chart,
    make_convenient,
    shrink,
    trivial_tubular,
)

Point = np.ndarray

TANGENTIAL_SHRINK = BumpSpec(1 / 3, 2 / 3)
COMMUTATIVE_SHRINK = BumpSpec(1 / 4, 1 / 2)
F_BLEND = BumpSpec(1 / 2, 1.0)
S_GRID = (0.5, 2.0)
T_GRID = (0.0, 0.5, 2.0)
DEFAULT_TOL = 1e-5

VERIFIED, FAILED, INCONCLUSIVE, SKIPPED = "verified", "failed", "inconclusive", "skipped"


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlagStatus:
    status: str
    worst: float = 0.0


@dataclass(frozen=True)
class ControlData:
    """One tubular per stratum plus property flags and build notes."""

    scenario: StratifiedScenario
    tubulars: Dict[str, TubularData]
    flags: Dict[str, FlagStatus] = field(default_factory=dict)
    notes: tuple = ()
    stage: str = "tangential"

    def __post_init__(self):
        ids = {s.id for s in self.scenario.strata}
        if set(self.tubulars) != ids:
            raise BuildError(f"control data must have one tubular per stratum, got {sorted(self.tubulars)}")

    def tub(self, sid: str) -> TubularData:
        return self.tubulars[sid]

    def with_flags(self, **flags: FlagStatus) -> "ControlData":
        merged = dict(self.flags)
        merged.update(flags)
        return replace(self, flags=merged)


@dataclass
class PropertyResult:
    """Worst residual of one property on one pair (or one stratum)."""

    prop: str
    pair: tuple
    worst: float = 0.0
    worst_scaled: float = 0.0
    samples: int = 0
    skipped: int = 0
    status: str = INCONCLUSIVE

    def update(self, residual: float, scale: float = 1.0) -> None:
        self.worst = max(self.worst, residual)
        self.worst_scaled = max(self.worst_scaled, residual / scale)
        self.samples += 1

    def finish(self, tol: float) -> "PropertyResult":
        if self.samples == 0:
            self.status = INCONCLUSIVE
        else:
            self.status = VERIFIED if self.worst_scaled <= tol else FAILED
        return self

    def as_dict(self) -> dict:
        return {
            "property": self.prop,
            "pair": list(self.pair),
            "worst": self.worst,
            "worst_scaled": self.worst_scaled,
            "samples": self.samples,
            "skipped": self.skipped,
            "status": self.status,
        }


@dataclass
class PairReport:
    """Residuals of all properties checked on one pair ``(X, Y)``."""

    pair: tuple
    results: Dict[str, PropertyResult] = field(default_factory=dict)

    def get(self, prop: str) -> PropertyResult:
        if prop not in self.results:
            self.results[prop] = PropertyResult(prop, self.pair)
        return self.results[prop]


@dataclass
class SuiteReport:
    name: str
    tol: float
    results: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def status(self) -> str:
        states = [r.status for r in self.results]
        if not states:
            return INCONCLUSIVE
        if FAILED in states:
            return FAILED
        if INCONCLUSIVE in states:
            return INCONCLUSIVE
        return VERIFIED

    @property
    def worst(self) -> float:
        return max((r.worst_scaled for r in self.results), default=0.0)

    def pair_reports(self) -> list:
        out: Dict[tuple, PairReport] = {}
        for r in self.results:
            out.setdefault(r.pair, PairReport(r.pair)).results[r.prop] = r
        return list(out.values())

    def as_dict(self) -> dict:
        return {
            "suite": self.name,
            "status": self.status,
            "tol": self.tol,
            "worst_scaled": self.worst,
            "results": [r.as_dict() for r in self.results],
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _unit(rng, n):
    g = rng.normal(size=n)
    return g / np.linalg.norm(g)


def near_stratum(s: StratifiedScenario, sid: str, rng: np.random.Generator, k: int, lo: float = -3.0, hi: float = -0.3) -> np.ndarray:
    """Stratum samples pushed off by ``10^U(lo, hi) (1 + |q|)`` in a random direction."""
    qs = s.stratum(sid).sample(rng, k)
    out = np.empty_like(qs)
    for i, q in enumerate(qs):
        eps = 10 ** rng.uniform(lo, hi)
        out[i] = q + eps * (1 + np.linalg.norm(q)) * _unit(rng, s.n)
    return out


def ambient_samples(s: StratifiedScenario, rng: np.random.Generator, k: int) -> np.ndarray:
    """Half uniform in the scenario box, half near randomly chosen strata."""
    ids = [t.id for t in s.strata]
    out = []
    for i in range(k):
        if i % 2 == 0:
            out.append(rng.uniform(-s.box, s.box, s.n))
        else:
            out.append(near_stratum(s, ids[rng.integers(len(ids))], rng, 1)[0])
    return np.array(out)


def overlap_samples(
    cd: ControlData,
    ids: Sequence[str],
    rng: np.random.Generator,
    k: int,
    max_draws: Optional[int] = None,
) -> list:
    """Up to ``k`` points in the intersection of the given tubulars."""
    s = cd.scenario
    max_draws = max_draws or 40 * k
    out, draws = [], 0
    tubs = [cd.tub(i) for i in ids]
    while len(out) < k and draws < max_draws:
        mode = draws % 3
        if mode < 2:
            sid = ids[-1] if mode == 0 else ids[0]
            p = near_stratum(s, sid, rng, 1)[0]
        else:
            p = rng.uniform(-s.box, s.box, s.n)
        draws += 1
        try:
            if all(t.membership(p) for t in tubs):
                out.append(p)
        except StratError:
            continue
    return out


def inner_samples(tub: TubularData, s: StratifiedScenario, rng: np.random.Generator, k: int, rho_max: float = 0.3, max_draws: Optional[int] = None) -> list:
    """Member samples with ``0 < rho < rho_max`` (inner plateau region)."""
    out, draws = [], 0
    max_draws = max_draws or 60 * k
    while len(out) < k and draws < max_draws:
        p = near_stratum(s, tub.stratum.id, rng, 1)[0]
        draws += 1
        if tub.membership(p):
            r = tub.rho(p)
            if 0 < r < rho_max:
                out.append(p)
    return out


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _patch_check(s: StratifiedScenario, sid: str, model, rng) -> tuple[float, int]:
    """Compare the model field with a partition-of-unity patch of local chart fields."""
    st = s.stratum(sid)
    centers = [q for q in st.sample(rng, 3) if st.chart_for(q) is not None]
    if not centers:
        return 0.0, 0
    charts = [st.chart_for(q) for q in centers]
    fields = [euler_from_chart(c) for c in charts]
    covers = [(q, 1.0 + np.linalg.norm(q)) for q in centers]
    weights = partition_of_unity(covers)
    worst, used = 0.0, 0
    for q in centers:
        p = q + 0.02 * _unit(rng, s.n)
        if not model.membership(p):
            continue
        acc = np.zeros(s.n)
        ok = True
        for w, c, f in zip(weights, charts, fields):
            wv = w.eval(p)
            if wv == 0.0:
                continue
            if not c.domain(p):
                ok = False
                break
            acc += wv * f.eval(p)
        if ok:
            worst = max(worst, float(np.linalg.norm(acc - model.field.eval(p))))
            used += 1
    return worst, used


def _average_check(s: StratifiedScenario, sid: str, model, rng) -> tuple[float, int]:
    avg = group_average(model.field, s.action)
    worst, used = 0.0, 0
    for p in near_stratum(s, sid, rng, 6, -2.0, -1.0):
        if not model.membership(p) or not all(model.membership(g @ p) for g in s.action.average_matrices()):
            continue
        worst = max(worst, float(np.linalg.norm(avg.eval(p) - model.field.eval(p))))
        used += 1
    return worst, used


def build_tangential(s: StratifiedScenario, seed: int = 42) -> ControlData:
    """Ascending induction: cut-off chart Euler fields, then shrink lower tubulars."""
    rng = np.random.default_rng(seed)
    tubs: Dict[str, TubularData] = {}
    notes = []
    for st in sorted(s.strata, key=lambda t: (t.dim, t.id)):
        recipe = s.recipes.get(st.id)
        if recipe is None:
            raise BuildError(f"scenario {s.name} has no tubular recipe for stratum {st.id}")
        if recipe.model is None:
            tub = trivial_tubular(st)
            notes.append(f"{st.id}: open stratum, trivial tubular")
        else:
            model = recipe.model
            try:
                worst, used = _patch_check(s, st.id, model, rng)
            except StratError as exc:
                raise BuildError(f"chart patching failed on stratum {st.id}: {exc}") from exc
            notes.append(f"{st.id}: partition-of-unity patch vs chart field, max diff {worst:.2e} on {used} points")
            field_used = model.field
            route_model = model
            if worst > 1e-8:
                raise BuildError(f"local chart fields of {st.id} disagree by {worst:.3g}; patched fields need the flow route")
            if s.action is not None:
                aw, au = _average_check(s, st.id, model, rng)
                notes.append(f"{st.id}: group average vs chart field, max diff {aw:.2e} on {au} points")
                if aw > 1e-9:
                    field_used = group_average(model.field, s.action)
                    route_model = None
                    notes.append(f"{st.id}: averaged field is not the chart field; using the flow route")
            tub = make_convenient(
                field_used,
                st,
                model.rho,
                recipe.delta,
                CUT_SPEC,
                model=route_model,
                project_raw=model.project,
            )
        for lower in list(tubs):
            if s.stratum(lower).dim < st.dim:
                tubs[lower] = shrink(tubs[lower], TANGENTIAL_SHRINK)
        tubs[st.id] = tub
    return ControlData(s, tubs, {}, tuple(notes), "tangential")


def conj_factor(r: float) -> float:
    """``f(r) = sqrt(r)`` on (0, 1/2], 1 on [1, inf), ``h sqrt(r) + (1 - h)`` between."""
    if r >= 1.0:
        return 1.0
    h = bump(F_BLEND, r)
    return h * math.sqrt(r) + (1.0 - h)


def conjugate_tubular(tx: TubularData, ty: TubularData) -> TubularData:
    """Conjugate ``T_Y`` by ``m_X^{f o rho_X}``.

    ``m~_Y^t = m_X^g o m_Y^t o m_X^{1/g}`` and ``rho~_Y = rho_Y o m_X^{1/g}``
    with ``g = f(rho_X(v))``; identical to ``T_Y`` outside ``T_X``.
    """

    def factor(v):
        r = tx.rho(v)
        if r == math.inf:
            return 1.0
        if r == 0.0:
            return None
        return conj_factor(r)

    def pulled(v):
        g = factor(v)
        if g is None:
            return None, None
        return g, (v if g == 1.0 else tx.mult(1.0 / g, v))

    def membership(v):
        v = np.asarray(v, dtype=float)
        g, w = pulled(v)
        return g is not None and ty.membership(w)

    def mult(t, v):
        v = np.asarray(v, dtype=float)
        if t == 1:
            return v.copy()
        if t < 0:
            raise DomainError("mult needs t >= 0")
        g, w = pulled(v)
        if g is None or not ty.membership(w):
            if t > 0:
                return v.copy()
            raise OutsideTubularError(f"m^0 requested off the tubular of {ty.stratum.id}")
        if g == 1.0:
            return ty.mult(t, v)
        return tx.mult(g, ty.mult(t, w))

    def project(v):
        v = np.asarray(v, dtype=float)
        g, w = pulled(v)
        if g is None or not ty.membership(w):
            raise OutsideTubularError(f"projection requested off the tubular of {ty.stratum.id}")
        return ty.project(v) if g == 1.0 else tx.mult(g, ty.project(w))

    def rho(v):
        v = np.asarray(v, dtype=float)
        g, w = pulled(v)
        if g is None:
            return math.inf
        return ty.rho(w)

    field = VectorField(lambda v: log_time_derivative(mult, v))
    return TubularData(ty.stratum, field, membership, mult, project, ScalarField(rho), ty.bump_history + (("conj", tx.stratum.id),))


def log_time_derivative(mult: Callable, v: Point, eta: float = 1e-3) -> np.ndarray:
    """``d/dtau mult(exp(tau), v)`` at 0 by a fourth-order central stencil."""
    v = np.asarray(v, dtype=float)
    m = lambda tau: mult(math.exp(tau), v)  # noqa: E731
    return (-m(2 * eta) + 8 * m(eta) - 8 * m(-eta) + m(-2 * eta)) / (12 * eta)


def conjugate(cd: ControlData, lower: str, higher: str, samples: int = 30, seed: int = 7) -> ControlData:
    """Replace ``T_higher`` by its conjugate with regard to ``T_lower``.

    Refuses (``PreconditionError``) unless the pair pre-commutes at 1e-5 on samples.
    """
    s = cd.scenario
    if not s.less(lower, higher):
        raise PreconditionError(f"conjugation needs {lower} < {higher}")
    rep = SuiteReport("precommute-precheck", DEFAULT_TOL)
    _precommute_pair(cd, lower, higher, np.random.default_rng(seed), samples, rep)
    for r in rep.results:
        r.finish(DEFAULT_TOL)
    if any(r.status == FAILED for r in rep.results):
        raise PreconditionError(f"pair ({lower}, {higher}) does not pre-commute: {[r.as_dict() for r in rep.results]}")
    tubs = dict(cd.tubulars)
    tubs[higher] = conjugate_tubular(cd.tub(lower), cd.tub(higher))
    return replace(cd, tubulars=tubs, flags={}, notes=cd.notes + (f"conjugated {higher} by {lower}",))


def build_commutative(s: StratifiedScenario, seed: int = 42, base: Optional[ControlData] = None) -> ControlData:
    """Descending induction: conjugate higher tubulars, then shrink by ``h_{1/4,1/2}``."""
    cd = base if base is not None else build_tangential(s, seed)
    tubs = dict(cd.tubulars)
    notes = list(cd.notes)
    dims = sorted({st.dim for st in s.strata})
    trivial = {st.id for st in s.strata if s.recipes[st.id].model is None}
    for d in reversed(dims[:-1]):
        layer = sorted(st.id for st in s.strata if st.dim == d)
        for x in layer:
            for y in sorted(st.id for st in s.strata if st.dim > d):
                if not s.less(x, y):
                    continue
                if y in trivial:
                    notes.append(f"{y}: open stratum, conjugation by {x} is the identity")
                    continue
                tubs[y] = conjugate_tubular(tubs[x], tubs[y])
                notes.append(f"conjugated {y} by {x}")
        for x in layer:
            if x not in trivial:
                tubs[x] = shrink(tubs[x], COMMUTATIVE_SHRINK)
                notes.append(f"shrunk {x} by h_(1/4,1/2)")
    return ControlData(s, tubs, {}, tuple(notes), "commutative")


# ---------------------------------------------------------------------------
# Verifiers
# ---------------------------------------------------------------------------


def _safe(fn, *args):
    try:
        return fn(*args)
    except StratError:
        return None


def _pairs(s: StratifiedScenario) -> list:
    return sorted(s.order)


def verify_adjusted(cd: ControlData, samples: int = 200, tol: float = DEFAULT_TOL, seed: int = 42) -> tuple:
    """AD1-AD3 by membership sampling; AD4 holds by construction."""
    s = cd.scenario
    rng = np.random.default_rng(seed)
    rep = SuiteReport("adjusted", tol)
    ids = [t.id for t in s.strata]
    # candidate points: near every stratum plus uniform
    pool = [p for sid in ids for p in near_stratum(s, sid, rng, samples)]
    pool += list(rng.uniform(-s.box, s.box, (samples, s.n)))
    member = {sid: [bool(_safe(cd.tub(sid).membership, p)) for p in pool] for sid in ids}
    for i, x in enumerate(ids):
        for y in ids[i + 1 :]:
            both = sum(1 for a, b in zip(member[x], member[y]) if a and b)
            comparable = s.comparable(x, y)
            same_dim = s.stratum(x).dim == s.stratum(y).dim
            r = PropertyResult("AD1" if not same_dim else "AD3", (x, y))
            r.samples = len(pool)
            if comparable:
                r.status = VERIFIED if both > 0 else INCONCLUSIVE
            else:
                r.worst = r.worst_scaled = float(both)
                r.status = VERIFIED if both == 0 else FAILED
            rep.results.append(r)
    for x in ids:
        for y in ids:
            if x == y:
                continue
            ys = s.stratum(y).sample(rng, samples)
            hits = sum(1 for p in ys if _safe(cd.tub(x).membership, p))
            r = PropertyResult("AD2", (x, y))
            r.samples = samples
            if s.less(x, y):
                r.status = VERIFIED if hits > 0 else FAILED
                if hits == 0:
                    r.worst = r.worst_scaled = 1.0
            else:
                r.worst = r.worst_scaled = float(hits)
                r.status = VERIFIED if hits == 0 else FAILED
            rep.results.append(r)
    rep.notes.append("AD4 holds by construction: tubulars are induced by convenient fields")
    flag = FlagStatus(rep.status, rep.worst)
    return rep, cd.with_flags(adjusted=flag)


def verify_tangential(cd: ControlData, samples: int = 200, tol: float = DEFAULT_TOL, seed: int = 42) -> tuple:
    """Y-residual of ``m_X^s(y)`` for ``y`` in ``Y`` and ``T_X``, ``s`` in {0.5, 2}."""
    s = cd.scenario
    rng = np.random.default_rng(seed)
    rep = SuiteReport("tangential", tol)
    for x, y in _pairs(s):
        tx, sy = cd.tub(x), s.stratum(y)
        r = PropertyResult("tangential", (x, y))
        pts = [p for p in sy.sample(rng, 4 * samples) if _safe(tx.membership, p)][:samples]
        for p in pts:
            for sc in S_GRID:
                q = tx.mult(sc, p)
                res = sy.residual_norm(q) if not sy.exclude(q) else math.inf
                r.update(res, 1.0 + float(np.linalg.norm(p)))
        rep.results.append(r.finish(tol))
    return rep, cd.with_flags(tangential=FlagStatus(rep.status, rep.worst))


def _precommute_pair(cd, x, y, rng, samples, rep, pts=None):
    tx, ty = cd.tub(x), cd.tub(y)
    pc1 = PropertyResult("PC1", (x, y))
    pc2 = PropertyResult("PC2", (x, y))
    pts = overlap_samples(cd, [x, y], rng, samples) if pts is None else pts
    for v in pts:
        px, rx = tx.project(v), tx.rho(v)
        for t in T_GRID:
            w = ty.mult(t, v)
            if not tx.membership(w):
                pc1.skipped += 1
                pc2.skipped += 1
                continue
            pc1.update(float(np.linalg.norm(tx.project(w) - px)), 1.0)
            pc2.update(abs(tx.rho(w) - rx), 1.0 + rx)
    rep.results.extend([pc1, pc2])
    return pts


def verify_precommute(cd: ControlData, samples: int = 200, tol: float = DEFAULT_TOL, seed: int = 42) -> tuple:
    s = cd.scenario
    rng = np.random.default_rng(seed)
    rep = SuiteReport("precommute", tol)
    for x, y in _pairs(s):
        _precommute_pair(cd, x, y, rng, samples, rep)
    for r in rep.results:
        r.finish(tol)
    return rep, cd.with_flags(precommutative=FlagStatus(rep.status, rep.worst))


def verify_commute(cd: ControlData, samples: int = 200, tol: float = DEFAULT_TOL, seed: int = 42) -> tuple:
    """C1 (commutator displacement, t = 0 reported as ``C1@t0``) and C2."""
    s = cd.scenario
    rng = np.random.default_rng(seed)
    rep = SuiteReport("commute", tol)
    for x, y in _pairs(s):
        tx, ty = cd.tub(x), cd.tub(y)
        c1 = PropertyResult("C1", (x, y))
        c10 = PropertyResult("C1@t0", (x, y))
        c2 = PropertyResult("C2", (x, y))
        for v in overlap_samples(cd, [x, y], rng, samples):
            nv = 1.0 + float(np.linalg.norm(v))
            ry = ty.rho(v)
            for sc in S_GRID:
                xs = tx.mult(sc, v)
                if not ty.membership(xs):
                    c1.skipped += 1
                    c2.skipped += 1
                    continue
                c2.update(abs(ty.rho(xs) - ry), 1.0 + ry)
                for t in T_GRID:
                    yt = ty.mult(t, v)
                    if not tx.membership(yt):
                        (c10 if t == 0 else c1).skipped += 1
                        continue
                    a = tx.mult(sc, yt)
                    b = ty.mult(t, xs)
                    (c10 if t == 0 else c1).update(float(np.linalg.norm(a - b)), nv)
        rep.results.extend([c1.finish(tol), c10.finish(tol), c2.finish(tol)])
    return rep, cd.with_flags(commutative=FlagStatus(rep.status, rep.worst))


def verify_equivariant(cd: ControlData, samples: int = 100, tol: float = 1e-6, seed: int = 42) -> tuple:
    """``|g m^t(v) - m^t(g v)|`` and ``|rho(g v) - rho(v)|`` for test group elements."""
    s = cd.scenario
    rep = SuiteReport("equivariant", tol)
    if s.action is None:
        rep.notes.append("scenario has no group action")
        r = PropertyResult("equivariance", ("-",))
        r.status = SKIPPED
        rep.results.append(r)
        return rep, cd.with_flags(equivariant=FlagStatus(SKIPPED))
    rng = np.random.default_rng(seed)
    mats = s.action.test_matrices()
    for st in s.strata:
        tub = cd.tub(st.id)
        rm = PropertyResult("mult", (st.id,))
        rr = PropertyResult("rho", (st.id,))
        pts = [p for p in near_stratum(s, st.id, rng, 3 * samples) if tub.membership(p)][:samples]
        for v in pts:
            nv = 1.0 + float(np.linalg.norm(v))
            r0 = tub.rho(v)
            for g in mats:
                gv = g @ v
                if not tub.membership(gv):
                    rm.update(math.inf)
                    continue
                rr.update(abs(tub.rho(gv) - r0), 1.0 + r0)
                for t in (0.5, 2.0, 0.0):
                    rm.update(float(np.linalg.norm(g @ tub.mult(t, v) - tub.mult(t, gv))), nv)
        rep.results.extend([rm.finish(tol), rr.finish(tol)])
    return rep, cd.with_flags(equivariant=FlagStatus(rep.status, rep.worst))


def verify_all(cd: ControlData, samples: int = 200, tol: float = DEFAULT_TOL, seed: int = 42) -> tuple:
    reports = []
    for fn in (verify_adjusted, verify_tangential, verify_precommute, verify_commute):
        rep, cd = fn(cd, samples, tol, seed)
        reports.append(rep)
    rep, cd = verify_equivariant(cd, max(10, samples // 2), max(tol, 1e-6) if tol > 1e-6 else tol, seed)
    reports.append(rep)
    return reports, cd


def top_field_consequence(cd: ControlData, top: str, mid: str, low: str, samples: int = 50, seed: int = 42, eta: float = 1e-5) -> dict:
    """Derivatives of ``m^0`` and ``rho`` of two lower strata along ``V_top``.

    Returns the worst ``|D m^0 . V|`` and ``|L_V rho|`` for ``mid`` and ``low``.
    """
    rng = np.random.default_rng(seed)
    out = {f"{k}_{q}": 0.0 for k in (mid, low) for q in ("dproj", "drho")}
    pts = overlap_samples(cd, [low, mid, top], rng, samples)
    vt = cd.tub(top)
    for v in pts:
        V = vt.field.eval(v)
        for sid in (mid, low):
            tub = cd.tub(sid)
            a, b = v + eta * V, v - eta * V
            if not (tub.membership(a) and tub.membership(b)):
                continue
            dp = (tub.project(a) - tub.project(b)) / (2 * eta)
            dr = (tub.rho(a) - tub.rho(b)) / (2 * eta)
            out[f"{sid}_dproj"] = max(out[f"{sid}_dproj"], float(np.linalg.norm(dp)))
            out[f"{sid}_drho"] = max(out[f"{sid}_drho"], abs(dr))
    out["samples"] = len(pts)
    return out


def conjugation_identity_outside(cd_before: ControlData, cd_after: ControlData, x: str, y: str, samples: int = 100, seed: int = 3) -> float:
    """Max ``|m~_Y^t(v) - m_Y^t(v)|`` over points of ``T_Y`` outside ``T_X``."""
    rng = np.random.default_rng(seed)
    s = cd_before.scenario
    tx = cd_before.tub(x)
    ty, tz = cd_before.tub(y), cd_after.tub(y)
    worst, used, draws = 0.0, 0, 0
    while used < samples and draws < 50 * samples:
        p = near_stratum(s, y, rng, 1)[0] if draws % 2 else rng.uniform(-s.box, s.box, s.n)
        draws += 1
        if tx.membership(p) or not ty.membership(p):
            continue
        for t in (0.0, 0.5, 2.0):
            worst = max(worst, float(np.linalg.norm(tz.mult(t, p) - ty.mult(t, p))))
        worst = max(worst, abs(tz.rho(p) - ty.rho(p)))
        used += 1
    return worst if used else math.nan


# ---------------------------------------------------------------------------
# Reference data for FLAG3
# ---------------------------------------------------------------------------

ANTIPODAL_MARGIN = 0.1


def _sph(p):
    x, y, z = p
    r = math.sqrt(x * x + y * y + z * z)
    theta = math.atan2(math.hypot(y, z), x)
    alpha = math.atan2(z, y)
    return r, theta, alpha


def _cart(r, theta, alpha):
    return np.array([r * math.cos(theta), r * math.sin(theta) * math.cos(alpha), r * math.sin(theta) * math.sin(alpha)])


def analytic_flag_oracle(scenario: Optional[StratifiedScenario] = None) -> ControlData:
    """Exact control data for FLAG3 in coordinates ``r (cos th, sin th cos a, sin th sin a)``.

    ``m_X0`` scales ``r``, ``m_X1`` scales ``th``, ``m_X2`` scales ``a``; distances
    are ``r^2``, ``th^2``, ``a^2``.  Points with ``th`` or ``|a|`` at least
    ``pi - 0.1`` are outside the domain; the neighbourhoods of X1 and X2 use
    half of that angular range so that ``m^2`` stays inside the chart.
    """
    from .scenarios import linear_flag

    s = scenario or linear_flag()
    lim = math.pi - ANTIPODAL_MARGIN

    def check(th, al, need_alpha):
        if th >= lim or (need_alpha and abs(al) >= lim):
            raise DomainError("point in the excluded antipodal zone")

    def make(sid, which):
        st = s.stratum(sid)

        def membership(v):
            r, th, al = _sph(np.asarray(v, dtype=float))
            if which == 0:
                return True
            if which == 1:
                return r > 0 and th < lim / 2
            return r > 0 and 0 < th < lim and abs(al) < lim / 2 and math.hypot(v[1], v[2]) > 0

        def mult(t, v):
            v = np.asarray(v, dtype=float)
            if t < 0:
                raise DomainError("mult needs t >= 0")
            if which == 0:
                return t * v
            if not membership(v):
                if t > 0:
                    return v.copy()
                raise OutsideTubularError("m^0 requested off the tubular")
            r, th, al = _sph(v)
            if which == 1:
                return _cart(r, t * th, al)
            return _cart(r, th, t * al)

        def rho(v):
            v = np.asarray(v, dtype=float)
            if not membership(v):
                r, th, al = _sph(v)
                if r > 0:
                    check(th, al, which == 2)
                return math.inf
            r, th, al = _sph(v)
            return (r * r, th * th, al * al)[which]

        field = VectorField(lambda v: log_time_derivative(mult, v))
        return TubularData(st, field, membership, mult, lambda v: mult(0.0, v), ScalarField(rho), ())

    tubs = {"X0": make("X0", 0), "X1": make("X1", 1), "X2": make("X2", 2)}
    return ControlData(s, tubs, {}, ("analytic nested-spherical reference data",), "oracle")


def naive_flag_data(scenario: Optional[StratifiedScenario] = None) -> ControlData:
    """Non-pre-commutative FLAG3 data: linear fiber scalings and Euclidean distances."""
    from .scenarios import linear_flag

    s = scenario or linear_flag()

    def make(sid, k):
        st = s.stratum(sid)

        def membership(v):
            v = np.asarray(v, dtype=float)
            return k == 0 or bool(np.any(v[k - 1 : k]))

        def mult(t, v):
            v = np.asarray(v, dtype=float)
            if not membership(v):
                if t > 0:
                    return v.copy()
                raise OutsideTubularError("m^0 requested off the tubular")
            out = v.copy()
            out[k:] *= t
            return out

        def rho(v):
            v = np.asarray(v, dtype=float)
            return float(v[k:] @ v[k:]) if membership(v) else math.inf

        field = VectorField(lambda v: np.concatenate([np.zeros(k), np.asarray(v, dtype=float)[k:]]))
        return TubularData(st, field, membership, mult, lambda v: mult(0.0, v), ScalarField(rho), ())

    tubs = {"X0": make("X0", 0), "X1": make("X1", 1), "X2": make("X2", 2)}
    return ControlData(s, tubs, {}, ("naive linear scalings",), "naive")


def pc2_residual_at(cd: ControlData, x: str, y: str, v, t: float) -> float:
    """``|rho_X(m_Y^t(v)) - rho_X(v)|`` at one point."""
    v = np.asarray(v, dtype=float)
    return abs(cd.tub(x).rho(cd.tub(y).mult(t, v)) - cd.tub(x).rho(v))
