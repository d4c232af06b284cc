"""Smooth weak deformation retraction built from commutative control data.

Per dimension ``d`` the weight

    phi_d = h_{2,3}(rho_d) * prod_{i<d} (1 - h_{1,2}(rho_i))

switches the fiber scaling ``f_d^t = m_d^{1 - t phi_d}`` on and off, and the
homotopy ``F`` composes the ``f_d`` in descending order of dimension with a
smooth step ``h'`` in time.  ``rho_i = inf`` off the dimension-``i`` tubulars.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .controldata import VERIFIED, ControlData, near_stratum
from .errors import PreconditionError, StratError
from .smoothcore import BumpSpec, bump, smooth_step

Point = np.ndarray

OUTER = BumpSpec(2.0, 3.0)
INNER = BumpSpec(1.0, 2.0)
TRAJ_TIMES = (0.0, 0.25, 0.5, 0.75, 1.0)
REQUIRED_FLAGS = ("adjusted", "tangential", "precommutative", "commutative")


def _layer(cd: ControlData, d: int) -> list:
    return [cd.tub(st.id) for st in cd.scenario.strata if st.dim == d]


def rho_d(cd: ControlData, d: int, v: Point) -> float:
    """Distance to the dimension-``d`` part of C; ``inf`` off its tubulars."""
    best = math.inf
    for tub in _layer(cd, d):
        best = min(best, tub.rho(v))
    return best


def m_d(cd: ControlData, d: int, t: float, v: Point) -> Point:
    """Fiber scaling of the dimension-``d`` tubular containing ``v`` (identity elsewhere)."""
    v = np.asarray(v, dtype=float)
    for tub in _layer(cd, d):
        if tub.membership(v):
            return tub.mult(t, v)
    return v.copy()


def phi_d(cd: ControlData, d: int, v: Point) -> float:
    """The weight ``h_{2,3}(rho_d) prod_{i<d} (1 - h_{1,2}(rho_i))``."""
    v = np.asarray(v, dtype=float)
    r = rho_d(cd, d, v)
    if r >= OUTER.b:
        return 0.0
    out = bump(OUTER, r)
    for i in sorted({st.dim for st in cd.scenario.strata if st.dim < d}):
        ri = rho_d(cd, i, v)
        if ri < INNER.b:
            out *= 1.0 - bump(INNER, ri)
            if out == 0.0:
                return 0.0
    return out


def f_d(cd: ControlData, d: int, t: float, v: Point) -> Point:
    """``m_d^{1 - t phi_d(v)}(v)``; identity where ``phi_d = 0`` or ``t = 0``."""
    v = np.asarray(v, dtype=float)
    if t == 0.0:
        return v.copy()
    phi = phi_d(cd, d, v)
    if phi == 0.0:
        return v.copy()
    try:
        return m_d(cd, d, 1.0 - t * phi, v)
    except StratError as exc:
        raise type(exc)(f"f_{d}(t={t}) at {v.tolist()}: {exc}") from exc


@dataclass(frozen=True)
class Homotopy:
    """``F(t, v)``: descending composition of the ``f_d`` over present dimensions."""

    cd: ControlData
    dims: tuple
    hprime: object = smooth_step

    def _stage(self, k: int, t: float, v: Point) -> Point:
        d = self.dims[k]
        if k == len(self.dims) - 1:
            return f_d(self.cd, d, t, v)
        if t <= 0.5:
            return self._stage(k + 1, self.hprime(2 * t), v)
        w = self._stage(k + 1, 1.0, v)
        return f_d(self.cd, d, self.hprime(2 * t - 1), w)

    def eval(self, t: float, v: Point) -> Point:
        if not 0.0 <= t <= 1.0:
            raise ValueError("homotopy time must lie in [0, 1]")
        v = np.asarray(v, dtype=float)
        if t == 0.0:
            return v.copy()
        return self._stage(0, t, v)

    __call__ = eval


def build_homotopy(cd: ControlData, require_verified: bool = True) -> Homotopy:
    """The homotopy ``F = F_{d_min}``; refuses control data not verified commutative."""
    if require_verified:
        missing = [k for k in REQUIRED_FLAGS if cd.flags.get(k) is None or cd.flags[k].status != VERIFIED]
        if missing:
            raise PreconditionError(f"control data not verified for: {', '.join(missing)}")
    dims = tuple(sorted({st.dim for st in cd.scenario.strata}))
    return Homotopy(cd, dims)


def restrict(cd: ControlData, ids: Iterable[str]) -> ControlData:
    """Control data of a stratified subspace: keep the tubulars of ``ids`` only."""
    from dataclasses import replace

    keep = set(ids)
    s = cd.scenario
    strata = tuple(st for st in s.strata if st.id in keep)
    order = frozenset(p for p in s.order if p[0] in keep and p[1] in keep)
    sub = replace(s, strata=strata, order=order, recipes={k: v for k, v in s.recipes.items() if k in keep})
    return ControlData(sub, {k: cd.tub(k) for k in keep}, dict(cd.flags), cd.notes + (f"restricted to {sorted(keep)}",), cd.stage)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class RetractionReport:
    samples: int
    residuals: list = field(default_factory=list)
    frac_below_strict: float = 0.0
    max_residual: float = 0.0
    identity_at_zero: bool = True
    max_rho_active_increase: float = 0.0
    max_rho_other_change: float = 0.0
    tubular_crossings: int = 0
    neighbourhood_margin: float = math.inf
    on_c_max_residual: float = 0.0
    far_identity: bool = True
    equivariance_defect: Optional[float] = None
    strict_tol: float = 1e-5
    loose_tol: float = 1e-3

    @property
    def status(self) -> str:
        ok = (
            self.samples > 0
            and self.identity_at_zero
            and self.frac_below_strict >= 0.95
            and self.max_residual <= self.loose_tol
            and self.max_rho_active_increase <= 1e-7
            and self.max_rho_other_change <= 1e-6
            and self.on_c_max_residual <= 1e-6
            and self.far_identity
            and (self.equivariance_defect is None or self.equivariance_defect <= 1e-6)
        )
        if self.samples == 0:
            return "inconclusive"
        return "verified" if ok else "failed"

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "samples": self.samples,
            "frac_below_1e-5": self.frac_below_strict,
            "max_c_residual": self.max_residual,
            "identity_at_zero": self.identity_at_zero,
            "max_rho_active_increase": self.max_rho_active_increase,
            "max_rho_other_change": self.max_rho_other_change,
            "tubular_crossings": self.tubular_crossings,
            "neighbourhood_margin": self.neighbourhood_margin,
            "on_c_max_residual": self.on_c_max_residual,
            "far_identity": self.far_identity,
            "equivariance_defect": self.equivariance_defect,
        }


def _real_strata(cd: ControlData) -> list:
    return [st.id for st in cd.scenario.strata if cd.scenario.recipes[st.id].model is not None]


def neighbourhood_samples(cd: ControlData, rng: np.random.Generator, k: int, max_draws: Optional[int] = None) -> list:
    """Points of ``U{rho_X < 1}``, drawn near the strata with non-trivial tubulars."""
    ids = _real_strata(cd)
    out, draws = [], 0
    max_draws = max_draws or 50 * k
    while ids and len(out) < k and draws < max_draws:
        sid = ids[draws % len(ids)]
        draws += 1
        p = near_stratum(cd.scenario, sid, rng, 1)[0]
        if min(cd.tub(x).rho(p) for x in ids) < 1.0:
            out.append(p)
    return out


def _rho_change(a: float, b: float) -> Optional[float]:
    """Relative change; ``None`` when the curve enters or leaves the tubular."""
    if math.isinf(a) and math.isinf(b):
        return 0.0
    if math.isinf(a) or math.isinf(b):
        return None
    return abs(b - a) / (1.0 + abs(a))


def phase_monotonicity(h: Homotopy, v: Point) -> tuple:
    """Along each ``u -> f_d(u, w)`` (``w`` the input of phase ``d``).

    Returns the largest increase of ``rho_d``, the largest relative change of
    the other ``rho_i`` while defined, and the number of steps where a curve
    entered or left another tubular (outside the domain of the property).
    """
    cd = h.cd
    inc, other, crossings = 0.0, 0.0, 0
    w = np.asarray(v, dtype=float)
    for d in reversed(h.dims):
        prev = None
        for u in TRAJ_TIMES:
            x = f_d(cd, d, u, w)
            rs = {i: rho_d(cd, i, x) for i in h.dims}
            if prev is not None:
                if not (math.isinf(prev[d]) and math.isinf(rs[d])):
                    inc = max(inc, rs[d] - prev[d])
                for i in h.dims:
                    # once on C_d the higher distances leave their domain M_i
                    if i != d and not (i > d and rs[d] == 0.0):
                        c = _rho_change(prev[i], rs[i])
                        if c is None:
                            crossings += 1
                        else:
                            other = max(other, c)
            prev = rs
        w = f_d(cd, d, 1.0, w)
    return inc, other, crossings


def retraction_metrics(
    h: Homotopy,
    samples: int = 200,
    seed: int = 42,
    strict_tol: float = 1e-5,
    loose_tol: float = 1e-3,
    equivariance: bool = True,
) -> RetractionReport:
    """Sample ``U{rho_X < 1}`` and measure the retraction's quality."""
    cd, s = h.cd, h.cd.scenario
    rng = np.random.default_rng(seed)
    pts = neighbourhood_samples(cd, rng, samples)
    rep = RetractionReport(len(pts), strict_tol=strict_tol, loose_tol=loose_tol)
    ids = _real_strata(cd)
    for v in pts:
        if not np.array_equal(h.eval(0.0, v), v):
            rep.identity_at_zero = False
        end = h.eval(1.0, v)
        rep.residuals.append(s.c_residual(end))
        for t in (0.25, 0.5, 0.75, 1.0):
            x = h.eval(t, v)
            rep.neighbourhood_margin = min(rep.neighbourhood_margin, 1.0 - min(cd.tub(i).rho(x) for i in ids))
        inc, other, cross = phase_monotonicity(h, v)
        rep.tubular_crossings += cross
        rep.max_rho_active_increase = max(rep.max_rho_active_increase, inc)
        rep.max_rho_other_change = max(rep.max_rho_other_change, other)
    if rep.residuals:
        arr = np.array(rep.residuals)
        rep.max_residual = float(arr.max())
        rep.frac_below_strict = float(np.mean(arr <= strict_tol))
    # points on C stay on C
    for st in s.strata:
        for q in st.sample(rng, max(2, samples // 20)):
            for t in (0.25, 0.5, 1.0):
                rep.on_c_max_residual = max(rep.on_c_max_residual, s.c_residual(h.eval(t, q)))
    # far from every lower tubular the homotopy is the identity
    far = [p for p in rng.uniform(-s.box, s.box, (samples, s.n)) if all(cd.tub(i).rho(p) >= 3 for i in ids)]
    for p in far[:20]:
        for t in (0.5, 1.0):
            if not np.array_equal(h.eval(t, p), p):
                rep.far_identity = False
    if equivariance and s.action is not None:
        defect = 0.0
        for v in pts[: max(10, samples // 10)]:
            nv = 1.0 + float(np.linalg.norm(v))
            for g in s.action.test_matrices():
                for t in (0.5, 1.0):
                    defect = max(defect, float(np.linalg.norm(g @ h.eval(t, v) - h.eval(t, g @ v))) / nv)
        rep.equivariance_defect = defect
    return rep


# ---------------------------------------------------------------------------
# Trajectory dumps
# ---------------------------------------------------------------------------


def trajectory_rows(h: Homotopy, points: Sequence[Point], times: Sequence[float] = TRAJ_TIMES) -> tuple:
    """Header and rows ``(sample id, t, coords..., rho per stratum, C-residual)``."""
    s = h.cd.scenario
    ids = [st.id for st in s.strata]
    header = ["sample", "t"] + [f"x{i}" for i in range(s.n)] + [f"rho_{i}" for i in ids] + ["c_residual"]
    rows: List[list] = []
    for k, v in enumerate(points):
        for t in times:
            x = h.eval(t, v)
            rows.append([k, t, *x.tolist(), *(h.cd.tub(i).rho(x) for i in ids), s.c_residual(x)])
    return header, rows


def fmt(x) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])
