"""Stratified subsets of R^n: strata, conical charts, order, group actions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Sequence

import numpy as np

from .errors import DomainError, InvalidActionError
from .smoothcore import check_orthogonal

Point = np.ndarray


@dataclass(frozen=True)
class ConicalChart:
    """Chart ``theta: U -> R^k x R^(n-k)`` sending the stratum into ``R^k x 0``.

    ``cone_membership[Y]`` tests whether a fiber vector lies in the cone of
    the higher stratum ``Y``; cones are invariant under scaling by ``t`` in (0,1).
    """

    center: Point
    theta: Callable[[Point], Point]
    theta_inv: Callable[[Point], Point]
    split_k: int
    cone_membership: Mapping[str, Callable[[np.ndarray], bool]] = field(default_factory=dict)
    domain: Callable[[Point], bool] = lambda p: True
    image_domain: Callable[[Point], bool] = lambda c: True
    dual: bool = False

    def split(self, p: Point) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.theta(np.asarray(p, dtype=float)), dtype=float)
        return c[: self.split_k], c[self.split_k :]

    def join(self, x: np.ndarray, y: np.ndarray) -> Point:
        c = np.concatenate([np.atleast_1d(x), np.atleast_1d(y)]).astype(float)
        if not self.image_domain(c):
            raise DomainError("chart coordinates outside the chart image")
        return np.asarray(self.theta_inv(c), dtype=float)


@dataclass(frozen=True)
class Stratum:
    """A stratum given by residuals plus an exclusion predicate.

    ``residual(p)`` vanishes on the closure locus; ``exclude(p)`` is true on
    the part of that locus that belongs to other strata.  ``chart_for(p)``
    returns a conical chart whose domain contains ``p`` (or ``None``).
    ``normal_functions`` vanish to first order on the stratum and feed the
    order-2 Euler-like test.
    """

    id: str
    dim: int
    residual: Callable[[Point], np.ndarray]
    exclude: Callable[[Point], bool]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    chart_for: Callable[[Point], Optional[ConicalChart]] = lambda p: None
    normal_functions: Sequence[Any] = ()

    def residual_norm(self, p: Point) -> float:
        return float(np.linalg.norm(np.atleast_1d(self.residual(np.asarray(p, dtype=float)))))

    def contains(self, p: Point, tol: float = 1e-8) -> bool:
        p = np.asarray(p, dtype=float)
        return self.residual_norm(p) <= tol and not self.exclude(p)

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return np.asarray(self.sampler(rng, k), dtype=float).reshape(k, -1)

    def charts(self, rng: np.random.Generator, k: int = 3) -> list:
        return [c for c in (self.chart_for(q) for q in self.sample(rng, k)) if c is not None]


def _rot2(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class GroupAction:
    """A finite orthogonal matrix group or a weighted circle action on C^m.

    Circle actions use interleaved coordinates ``(x1, y1, x2, y2, ...)`` with
    ``z_j -> exp(i a_j theta) z_j``.  ``shift`` is the moment-map constant.
    """

    kind: str
    generators: tuple = ()
    weights: tuple = ()
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in ("finite", "circle"):
            raise InvalidActionError(f"unknown action kind {self.kind!r}")
        if self.kind == "finite":
            if not self.generators:
                raise InvalidActionError("finite action needs generators")
            check_orthogonal(self.generators)
        else:
            if not self.weights or any(int(a) != a for a in self.weights):
                raise InvalidActionError("circle action needs integer weights")

    @property
    def dim(self) -> int:
        if self.kind == "finite":
            return np.asarray(self.generators[0]).shape[0]
        return 2 * len(self.weights)

    def rotation(self, angle: float) -> np.ndarray:
        """Matrix of ``exp(i angle)`` for a circle action."""
        if self.kind != "circle":
            raise InvalidActionError("rotation() needs a circle action")
        m = len(self.weights)
        g = np.zeros((2 * m, 2 * m))
        for j, a in enumerate(self.weights):
            g[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = _rot2(a * angle)
        return g

    def lie_generator(self) -> np.ndarray:
        """Infinitesimal generator ``d/dtheta exp(i a theta)`` at 0."""
        if self.kind != "circle":
            raise InvalidActionError("lie_generator() needs a circle action")
        m = len(self.weights)
        xi = np.zeros((2 * m, 2 * m))
        for j, a in enumerate(self.weights):
            xi[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = a * np.array([[0.0, -1.0], [1.0, 0.0]])
        return xi

    def elements(self, cap: int = 48) -> list:
        """All group elements by closure enumeration (finite groups only)."""
        if self.kind != "finite":
            raise InvalidActionError("elements() needs a finite action")
        n = self.dim
        found = [np.eye(n)]
        frontier = [np.eye(n)]
        gens = [np.asarray(g, dtype=float) for g in self.generators]
        while frontier:
            nxt = []
            for a in frontier:
                for g in gens:
                    b = g @ a
                    if not any(np.allclose(b, c, atol=1e-9) for c in found):
                        found.append(b)
                        nxt.append(b)
                        if len(found) > cap:
                            raise InvalidActionError(f"group order exceeds {cap}")
            frontier = nxt
        return found

    def average_matrices(self) -> list:
        if self.kind == "finite":
            return self.elements()
        return [self.rotation(2 * math.pi * k / 64) for k in range(64)]

    def test_matrices(self) -> list:
        """Elements used in equivariance checks."""
        if self.kind == "finite":
            return [np.asarray(g, dtype=float) for g in self.generators]
        return [self.rotation(a) for a in (0.7, 2 * math.pi / 3, 2.5)]


@dataclass(frozen=True)
class StabilizerType:
    """Orbit-type descriptor: stabilizer order, label and a conjugacy key."""

    order: int
    label: str
    key: tuple


def _subgroup_key(idx: frozenset, elems: list) -> tuple:
    conj = []
    for h in elems:
        hi = h.T
        image = []
        for i in idx:
            m = h @ elems[i] @ hi
            image.append(next(j for j, e in enumerate(elems) if np.allclose(m, e, atol=1e-9)))
        conj.append(tuple(sorted(image)))
    return min(conj)


def orbit_type(action: GroupAction, p) -> StabilizerType:
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise DomainError("orbit_type needs a finite point")
    if action.kind == "finite":
        elems = action.elements()
        idx = frozenset(i for i, g in enumerate(elems) if np.linalg.norm(g @ p - p) <= 1e-10)
        k = len(idx)
        if k == len(elems):
            label = "full"
        elif k == 1:
            label = "trivial"
        elif k == 2 and any(np.linalg.det(elems[i]) < 0 for i in idx):
            label = "reflection"
        elif all(np.linalg.det(elems[i]) > 0 for i in idx):
            label = f"Z{k}"
        else:
            label = f"order-{k}"
        return StabilizerType(k, label, _subgroup_key(idx, elems))
    z = p.reshape(-1, 2)
    active = [abs(int(a)) for a, zj in zip(action.weights, z) if a != 0 and np.linalg.norm(zj) > 1e-10]
    if not active:
        return StabilizerType(0, "full", ("full",))
    g = 0
    for a in active:
        g = math.gcd(g, a)
    return StabilizerType(g, "trivial" if g == 1 else f"Z{g}", ("cyclic", g))


@dataclass(frozen=True)
class StratifiedScenario:
    """A stratified subset with declared order, optional action and recipes.

    ``recipes`` maps stratum ids to tubular recipes consumed by the builders;
    ``schedule`` records the neighbourhoods W_X in words for reports.
    """

    name: str
    n: int
    strata: tuple
    order: frozenset
    action: Optional[GroupAction] = None
    schedule: Mapping[str, str] = field(default_factory=dict)
    recipes: Mapping[str, Any] = field(default_factory=dict)
    box: float = 2.0
    section: str = ""
    extras: Mapping[str, Any] = field(default_factory=dict)

    def stratum(self, sid: str) -> Stratum:
        for s in self.strata:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def less(self, x: str, y: str) -> bool:
        return (x, y) in self.order

    def comparable(self, x: str, y: str) -> bool:
        return (x, y) in self.order or (y, x) in self.order

    def c_residual(self, p) -> float:
        """Minimum stratum residual: a stand-in for the distance to C."""
        return min(s.residual_norm(p) for s in self.strata)

    def locate(self, p, tol: float = 1e-8) -> Optional[str]:
        for s in sorted(self.strata, key=lambda s: s.dim):
            if s.contains(p, tol):
                return s.id
        return None

    def with_order(self, order) -> "StratifiedScenario":
        from dataclasses import replace

        return replace(self, order=frozenset(order))


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


@dataclass
class CheckEntry:
    name: str
    passed: bool
    worst: float = 0.0
    samples: int = 0
    note: str = ""


@dataclass
class CheckReport:
    entries: list = field(default_factory=list)
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]


FRONTIER_T = (1e-1, 1e-3, 1e-6)


def _frontier_limit(x: Stratum, y: Stratum, rng, k: int) -> tuple[float, int]:
    """Worst X-residual of Y samples pushed to the chart-cone apex.

    Returns ``(worst, used)``; ``worst`` is ``inf`` when no sample lies in a
    chart of X.
    """
    worst, used = 0.0, 0
    for p in y.sample(rng, k):
        chart = x.chart_for(p)
        if chart is None or not chart.domain(p):
            continue
        base, fib = chart.split(p)
        try:
            r = [x.residual_norm(chart.join(base, t * fib)) for t in FRONTIER_T]
        except DomainError:
            continue
        used += 1
        worst = max(worst, r[-1] / (1.0 + float(np.linalg.norm(p))))
    return (worst if used else math.inf), used


def order_check(s: StratifiedScenario, samples: int = 50, seed: int = 42) -> CheckReport:
    """Transitivity, antisymmetry, dimension monotonicity and frontier spot checks."""
    rng = np.random.default_rng(seed)
    rep = CheckReport()
    ids = [t.id for t in s.strata]
    dims = {t.id: t.dim for t in s.strata}
    for a, b in s.order:
        if a not in dims or b not in dims:
            rep.entries.append(CheckEntry(f"ids {a}<{b}", False, note="unknown stratum id"))
    bad_trans = [
        (a, c) for (a, b1) in s.order for (b2, c) in s.order if b1 == b2 and (a, c) not in s.order
    ]
    rep.entries.append(CheckEntry("transitivity", not bad_trans, note=str(bad_trans[:3])))
    anti = [(a, b) for (a, b) in s.order if (b, a) in s.order or a == b]
    rep.entries.append(CheckEntry("antisymmetry", not anti, note=str(anti[:3])))
    for a, b in sorted(s.order):
        if a in dims and b in dims:
            rep.entries.append(CheckEntry(f"dim {a}<{b}", dims[a] < dims[b]))
    for xa, yb in itertools.permutations(ids, 2):
        x, y = s.stratum(xa), s.stratum(yb)
        if x.dim >= y.dim:
            continue
        worst, used = _frontier_limit(x, y, rng, samples)
        approaches = used > 0 and worst <= 1e-5
        if s.less(xa, yb):
            ok = approaches
            note = "" if ok else "declared X<Y but Y samples do not accumulate on X"
        else:
            ok = not approaches
            note = "" if ok else "Y accumulates on X but the order omits X<Y"
        rep.entries.append(CheckEntry(f"frontier {xa}<{yb}", ok, 0.0 if not used else worst, used, note))
    return rep


def chart_conicality_check(
    chart: ConicalChart,
    s: StratifiedScenario,
    samples: int = 50,
    owner: Optional[str] = None,
    seed: int = 42,
    points: Optional[Mapping[str, np.ndarray]] = None,
) -> CheckReport:
    """Sample higher strata in the chart domain and test cone invariance.

    ``points`` may supply explicit higher-stratum samples per stratum id
    (used by negative controls); otherwise the strata samplers are used.
    """
    rng = np.random.default_rng(seed)
    rep = CheckReport()
    own = s.stratum(owner) if owner else None
    if own is not None:
        worst_inv, worst_flat = 0.0, 0.0
        for q in own.sample(rng, samples):
            if not chart.domain(q):
                continue
            c = np.asarray(chart.theta(q), dtype=float)
            worst_inv = max(worst_inv, float(np.linalg.norm(chart.theta_inv(c) - q)))
            worst_flat = max(worst_flat, float(np.linalg.norm(c[chart.split_k :])))
        rep.entries.append(CheckEntry("theta_inv o theta", worst_inv <= 1e-9, worst_inv, samples))
        rep.entries.append(CheckEntry("stratum -> R^k x 0", worst_flat <= 1e-9, worst_flat, samples))
    for y in s.strata:
        if own is not None and not s.less(own.id, y.id):
            continue
        pts = points[y.id] if points and y.id in points else y.sample(rng, samples)
        worst, used = 0.0, 0
        cone_ok = True
        for p in pts:
            if not chart.domain(p):
                rep.skipped += 1
                continue
            base, fib = chart.split(p)
            if not np.any(fib):
                rep.skipped += 1
                continue
            member = chart.cone_membership.get(y.id)
            for t in (0.25, 0.5, 0.75):
                if member is not None and member(fib) and not member(t * fib):
                    cone_ok = False
            try:
                for t in (0.25, 0.5):
                    q = chart.join(base, t * fib)
                    r = y.residual_norm(q) if not y.exclude(q) else math.inf
                    worst = max(worst, r)
            except DomainError:
                rep.skipped += 1
                continue
            used += 1
        if used:
            rep.entries.append(CheckEntry(f"cone {y.id}", cone_ok and worst <= 1e-8, worst, used))
    return rep
