"""Momentum-map and Hilbert-map scenarios.

Coordinates on C^n are interleaved, ``(x1, y1, x2, y2, ...)``, with the
symplectic form ``omega(u, v) = sum_j (u_yj v_xj - u_xj v_yj)``, i.e. the
matrix ``J`` with diagonal blocks ``[[0, -1], [1, 0]]``.  With this convention
the weight-``a`` circle has moment map ``a |z|^2 / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .controldata import VERIFIED, ControlData, inner_samples
from .errors import DomainError, EquivarianceDefectError, InvalidActionError, PreconditionError
from .smoothcore import DEFAULT_FLOW, FlowOptions, VectorField, flow
from .strata import GroupAction, orbit_type

Point = np.ndarray

SYMPLECTIC_TOL = 1e-10


def symplectic_matrix(n: int) -> np.ndarray:
    """``J`` on R^{2n}: ``omega(u, v) = u^T J v``."""
    J = np.zeros((2 * n, 2 * n))
    for j in range(n):
        J[2 * j, 2 * j + 1] = -1.0
        J[2 * j + 1, 2 * j] = 1.0
    return J


def omega(u, v) -> float:
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    return float(u @ symplectic_matrix(len(u) // 2) @ v)


# ---------------------------------------------------------------------------
# Torus (circle) Hamiltonians
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusHamiltonian:
    """Weighted circle action on C^n with ``mu(z) = 1/2 sum a_j |z_j|^2 - c``."""

    n: int
    weights: tuple
    shift: float = 0.0

    def __post_init__(self):
        if len(self.weights) != self.n:
            raise InvalidActionError("need one weight per complex coordinate")
        if any(int(a) != a for a in self.weights):
            raise InvalidActionError("weights must be integers")

    @property
    def action(self) -> GroupAction:
        return GroupAction("circle", weights=tuple(int(a) for a in self.weights), shift=self.shift)

    def _a(self) -> np.ndarray:
        return np.repeat(np.asarray(self.weights, dtype=float), 2)

    def mu(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return 0.5 * float(np.sum(self._a() * z * z)) - self.shift

    def grad_mu(self, z) -> np.ndarray:
        return self._a() * np.asarray(z, dtype=float)


def moment(ham: TorusHamiltonian, z) -> float:
    return ham.mu(z)


def norm_sq_gradient(ham: TorusHamiltonian, z) -> np.ndarray:
    """Gradient of ``|mu|^2``: ``2 mu(z) grad mu(z)``."""
    return 2.0 * ham.mu(z) * ham.grad_mu(z)


def norm_sq_gradient_flow(ham: TorusHamiltonian, z, T: float, opts: FlowOptions = DEFAULT_FLOW) -> np.ndarray:
    """Flow ``z' = -grad |mu|^2`` for time ``T``."""
    if T < 0:
        raise DomainError("gradient flow time must be non-negative")
    z = np.asarray(z, dtype=float)
    if ham.mu(z) == 0.0 or T == 0:
        return z.copy()
    field = VectorField(lambda p: -norm_sq_gradient(ham, p))
    return flow(field, z, T, opts)


def norm_sq_gradient_limit(ham: TorusHamiltonian, z, s_max: float = 40.0, opts: FlowOptions = DEFAULT_FLOW) -> np.ndarray:
    """Endpoint of the ``-grad |mu|^2`` trajectory through ``z``.

    Near the origin ``|grad mu|`` is small and the plain flow crawls, so the
    same trajectory is followed in the time ``s`` where ``d mu / ds = -mu``
    (field ``-mu grad mu / |grad mu|^2``); ``mu`` then decays like ``exp(-s)``.
    """
    z = np.asarray(z, dtype=float)
    if ham.mu(z) == 0.0:
        return z.copy()

    def fn(p):
        g = ham.grad_mu(p)
        gg = float(g @ g)
        if gg == 0.0:
            raise DomainError("gradient flow reached a critical point of mu")
        return -ham.mu(p) * g / gg

    return flow(VectorField(fn), z, s_max, opts)


def crit_residual(ham: TorusHamiltonian, z) -> float:
    return float(np.linalg.norm(norm_sq_gradient(ham, z)))


# ---------------------------------------------------------------------------
# Quadratic local model
# ---------------------------------------------------------------------------


def _generators(action) -> list:
    if isinstance(action, GroupAction):
        if action.kind != "circle":
            raise InvalidActionError("the quadratic moment map needs a Lie algebra; finite groups have none")
        return [action.lie_generator()]
    return [np.asarray(x, dtype=float) for x in action]


def check_symplectic(xi: np.ndarray, tol: float = SYMPLECTIC_TOL) -> None:
    J = symplectic_matrix(xi.shape[0] // 2)
    defect = float(np.max(np.abs(xi.T @ J + J @ xi)))
    if defect > tol:
        raise InvalidActionError(f"generator is not infinitesimally symplectic (defect {defect:.3g})")


def quadratic_moment(action, z) -> np.ndarray:
    """Values ``<Q(z), xi_j> = omega(xi_j z, z) / 2`` for each generator ``xi_j``."""
    z = np.asarray(z, dtype=float)
    out = []
    for xi in _generators(action):
        check_symplectic(xi)
        out.append(0.5 * omega(xi @ z, z))
    return np.array(out)


def cv_residual(action, xi_beta, z) -> float:
    """``|Q(z)| + |xi_beta z|``: zero exactly on the local critical model."""
    z = np.asarray(z, dtype=float)
    q = float(np.linalg.norm(quadratic_moment(action, z)))
    if xi_beta is None:
        return q
    xi_beta = np.asarray(xi_beta, dtype=float)
    check_symplectic(xi_beta)
    return q + float(np.linalg.norm(xi_beta @ z))


# ---------------------------------------------------------------------------
# Hilbert maps
# ---------------------------------------------------------------------------


def hilbert_d3(p) -> tuple:
    x, y = float(p[0]), float(p[1])
    return x * x + y * y, x ** 3 - 3 * x * y * y


def d3_gap(p) -> float:
    """``y^2 (3x^2 - y^2)^2``, equal to ``s1^3 - s2^2``."""
    x, y = float(p[0]), float(p[1])
    return y * y * (3 * x * x - y * y) ** 2


def _d3_lift(s) -> np.ndarray:
    s1, s2 = float(s[0]), float(s[1])
    if s1 < 0:
        raise DomainError("sigma_1 must be non-negative")
    r = math.sqrt(s1)
    if r == 0.0:
        return np.zeros(2)
    c = max(-1.0, min(1.0, s2 / r ** 3))
    phi = math.acos(c) / 3.0
    return np.array([r * math.cos(phi), r * math.sin(phi)])


@dataclass(frozen=True)
class HilbertModel:
    """Invariant polynomials, their weights, the group and image predicates.

    ``strata`` maps a quotient-stratum name to a predicate on image points;
    ``upstairs`` maps upstairs stratum ids to those names.  ``lift`` returns
    one representative of a given image point.
    """

    name: str
    generators: tuple
    weights: tuple
    action: GroupAction
    constraints: tuple = ()
    strata: dict = field(default_factory=dict)
    upstairs: dict = field(default_factory=dict)
    lift: Optional[Callable] = None

    def sigma(self, p) -> np.ndarray:
        return np.array([g(p) for g in self.generators], dtype=float)


def _boundary(s, tol=1e-9):
    # relative to sigma_1^3: near the apex an absolute test calls everything an edge point
    return s[0] > 0 and abs(s[1] ** 2 - s[0] ** 3) <= tol * s[0] ** 3


def d3_model() -> HilbertModel:
    from .scenarios import d3_action

    return HilbertModel(
        name="D3",
        generators=(lambda p: hilbert_d3(p)[0], lambda p: hilbert_d3(p)[1]),
        weights=(2, 3),
        action=d3_action(),
        constraints=(lambda s: s[0], lambda s: s[0] ** 3 - s[1] ** 2),
        strata={
            "apex": lambda s: abs(s[0]) <= 1e-12 and abs(s[1]) <= 1e-12,
            "edge+": lambda s: _boundary(s) and s[1] > 0,
            "edge-": lambda s: _boundary(s) and s[1] < 0,
            "interior": lambda s: s[0] > 0 and s[1] ** 2 < s[0] ** 3 * (1 - 1e-9),
        },
        upstairs={"X0": "apex", "X1a": "edge+", "X1b": "edge-", "X2": "interior"},
        lift=_d3_lift,
    )


def _circle11_lift(s) -> np.ndarray:
    u1, u2, wr, wi = (float(c) for c in s)
    if u1 <= 0:
        return np.array([0.0, 0.0, math.sqrt(max(u2, 0.0)), 0.0])
    r1 = math.sqrt(u1)
    # z1 = r1, z2 = w / z1
    return np.array([r1, 0.0, wr / r1, wi / r1])


def circle11_model() -> HilbertModel:
    """Invariants ``|z1|^2, |z2|^2, Re z1 z2, Im z1 z2`` of the weight (1, -1) circle."""
    act = GroupAction("circle", weights=(1, -1))
    gens = (
        lambda p: p[0] ** 2 + p[1] ** 2,
        lambda p: p[2] ** 2 + p[3] ** 2,
        lambda p: p[0] * p[2] - p[1] * p[3],
        lambda p: p[0] * p[3] + p[1] * p[2],
    )
    zero = lambda s: abs(s[0] - s[1]) <= 1e-9 * (1 + s[0])  # noqa: E731
    return HilbertModel(
        name="circle(1,-1)",
        generators=gens,
        weights=(2, 2, 2, 2),
        action=act,
        constraints=(lambda s: s[0], lambda s: s[1], lambda s: s[0] * s[1] - s[2] ** 2 - s[3] ** 2),
        strata={
            "apex": lambda s: max(abs(c) for c in s) <= 1e-12,
            "zero": lambda s: zero(s) and s[0] > 1e-12,
        },
        upstairs={"X0": "apex", "X1": "zero"},
        lift=_circle11_lift,
    )


@dataclass
class ImageReport:
    samples: int
    max_violation: float = 0.0
    max_gap_error: float = 0.0
    misclassified: int = 0
    boundary_points: int = 0

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-10 and self.max_gap_error <= 1e-9 and self.misclassified == 0


def d3_image_check(samples: int = 1000, seed: int = 42) -> ImageReport:
    """Image inequalities, the gap identity and boundary vs mirror-line classification."""
    from .scenarios import d3_action

    rng = np.random.default_rng(seed)
    act = d3_action()
    rep = ImageReport(samples)
    for i in range(samples):
        if i % 4 == 0:
            # a point on one of the three mirror lines
            ang = rng.integers(3) * math.pi / 3
            r = rng.uniform(-2, 2)
            p = np.array([r * math.cos(ang), r * math.sin(ang)])
        else:
            p = rng.uniform(-2, 2, 2)
        s1, s2 = hilbert_d3(p)
        scale = 1.0 + s1 ** 3
        rep.max_violation = max(rep.max_violation, max(0.0, -s1), max(0.0, s2 * s2 - s1 ** 3) / scale)
        gap = s1 ** 3 - s2 * s2
        rep.max_gap_error = max(rep.max_gap_error, abs(gap - d3_gap(p)) / scale)
        on_edge = s1 > 1e-12 and gap <= 1e-10 * s1 ** 3
        on_mirror = orbit_type(act, p).label == "reflection"
        rep.boundary_points += on_edge
        if on_edge != on_mirror:
            rep.misclassified += 1
    return rep


@dataclass
class QuasiHomogReport:
    samples: int
    failures: int = 0
    max_defect: float = 0.0

    @property
    def passed(self) -> bool:
        return self.samples > 0 and self.failures == 0


def weighted_scale(weights: Sequence[int], t: float, s) -> np.ndarray:
    return np.array([t ** d * c for d, c in zip(weights, s)])


def quasi_homog_check(
    model: HilbertModel,
    predicate: Callable,
    points: Sequence,
    t_grid: Sequence[float] = (0.25, 0.5, 0.9),
) -> QuasiHomogReport:
    """Image points satisfying ``predicate`` keep satisfying it under weighted scaling."""
    rep = QuasiHomogReport(0)
    for s in points:
        if not predicate(s):
            continue
        rep.samples += 1
        for t in t_grid:
            if not predicate(weighted_scale(model.weights, t, s)):
                rep.failures += 1
    return rep


# ---------------------------------------------------------------------------
# Reduction of control data
# ---------------------------------------------------------------------------


@dataclass
class ReducedFiberedNbhd:
    """Homothety and distance of one quotient stratum, in Hilbert-chart coordinates."""

    stratum: str
    image_stratum: str
    model: HilbertModel
    mbar: Callable
    rhobar: Callable
    membership: Callable
    samples: list = field(default_factory=list)


@dataclass
class FiberedInvariants:
    samples: int
    semigroup: float = 0.0
    identity: float = 0.0
    homogeneity: float = 0.0
    strata_preserved: bool = True

    @property
    def passed(self) -> bool:
        return (
            self.samples > 0
            and self.semigroup <= 1e-8
            and self.identity <= 1e-8
            and self.homogeneity <= 1e-6
            and self.strata_preserved
        )


REDUCED_T = (0.5, 0.8)


def fibered_invariants(nb: ReducedFiberedNbhd) -> FiberedInvariants:
    """Homothety law, ``mbar^1 = id``, stratum preservation and ``rhobar`` homogeneity."""
    rep = FiberedInvariants(len(nb.samples))
    preds = nb.model.strata
    for y in nb.samples:
        ny = 1.0 + float(np.linalg.norm(y))
        rep.identity = max(rep.identity, float(np.linalg.norm(nb.mbar(1.0, y) - y)) / ny)
        r0 = nb.rhobar(y)
        home = [k for k, p in preds.items() if p(y)]
        for t in REDUCED_T:
            yt = nb.mbar(t, y)
            if r0 > 0:
                rep.homogeneity = max(rep.homogeneity, abs(nb.rhobar(yt) - t * t * r0) / (t * t * r0))
            if [k for k, p in preds.items() if p(yt)] != home:
                rep.strata_preserved = False
            for s in REDUCED_T:
                rep.semigroup = max(rep.semigroup, float(np.linalg.norm(nb.mbar(s, yt) - nb.mbar(s * t, y))) / ny)
    return rep


def _reduced(cd: ControlData, sid: str, model: HilbertModel, samples: list) -> ReducedFiberedNbhd:
    tub = cd.tub(sid)

    def rep_of(y):
        p = model.lift(np.asarray(y, dtype=float))
        if not tub.membership(p):
            raise DomainError(f"image point outside the reduced neighbourhood of {sid}")
        return p

    def mbar(t, y):
        return model.sigma(tub.mult(t, rep_of(y)))

    def rhobar(y):
        return tub.rho(rep_of(y))

    def membership(y):
        try:
            return tub.membership(model.lift(np.asarray(y, dtype=float)))
        except DomainError:
            return False

    return ReducedFiberedNbhd(sid, model.upstairs.get(sid, sid), model, mbar, rhobar, membership, samples)


def reduce_control_data(
    cd: ControlData,
    model: HilbertModel,
    samples: int = 40,
    seed: int = 42,
    require_verified: bool = True,
) -> list:
    """Push ``m^t`` and ``rho`` of each non-open stratum through the Hilbert chart.

    Well-definedness is checked on orbit pairs ``(p, g p)``: equal images must
    have images under ``m^t`` within 1e-7 and equal distances.
    """
    if require_verified:
        for k in ("equivariant", "commutative"):
            if cd.flags.get(k) is None or cd.flags[k].status != VERIFIED:
                raise PreconditionError(f"reduction needs control data verified {k}")
    if model.lift is None:
        raise PreconditionError("the Hilbert model has no lift")
    s = cd.scenario
    rng = np.random.default_rng(seed)
    mats = model.action.test_matrices()
    out = []
    for st in s.strata:
        if s.recipes[st.id].model is None:
            continue
        tub = cd.tub(st.id)
        pts = inner_samples(tub, s, rng, samples, rho_max=0.5)
        images = []
        for p in pts:
            sp = model.sigma(p)
            for g in mats:
                q = g @ p
                if not tub.membership(q):
                    raise EquivarianceDefectError(f"tubular of {st.id} is not invariant", witness=(p, q))
                if float(np.linalg.norm(model.sigma(q) - sp)) > 1e-10 * (1 + float(np.linalg.norm(sp))):
                    raise EquivarianceDefectError("Hilbert map is not invariant", witness=(p, q))
                for t in (0.0, 0.5, 2.0):
                    a, b = model.sigma(tub.mult(t, p)), model.sigma(tub.mult(t, q))
                    if float(np.linalg.norm(a - b)) > 1e-7:
                        raise EquivarianceDefectError(f"reduced homothety of {st.id} is ill-defined at t={t}", witness=(p, q))
                if abs(tub.rho(p) - tub.rho(q)) > 1e-7 * (1 + tub.rho(p)):
                    raise EquivarianceDefectError(f"reduced distance of {st.id} is ill-defined", witness=(p, q))
            images.append(sp)
        out.append(_reduced(cd, st.id, model, images))
    return out
