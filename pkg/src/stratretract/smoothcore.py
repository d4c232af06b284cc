"""Smooth-calculus kernel.

Scalar and vector fields with derivatives (dual numbers or central
differences), an embedded Dormand-Prince RK4(5) integrator, smooth bump
functions, partitions of unity, constant extension and group averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DomainError,
    EscapeError,
    InvalidActionError,
    NonConvergenceError,
    UncoveredPointError,
)

# ---------------------------------------------------------------------------
# Dual numbers and expression combinators
# ---------------------------------------------------------------------------


class Dual:
    """Forward-mode dual number ``val + der*eps`` with ``eps**2 = 0``."""

    __slots__ = ("val", "der")
    __array_ufunc__ = None  # make numpy scalars defer to our reflected ops

    def __init__(self, val: float, der: float = 0.0):
        self.val = float(val)
        self.der = float(der)

    def __repr__(self) -> str:
        return f"Dual({self.val!r}, {self.der!r})"

    @staticmethod
    def _lift(x) -> "Dual":
        return x if isinstance(x, Dual) else Dual(float(x), 0.0)

    def __add__(self, o):
        o = Dual._lift(o)
        return Dual(self.val + o.val, self.der + o.der)

    __radd__ = __add__

    def __sub__(self, o):
        o = Dual._lift(o)
        return Dual(self.val - o.val, self.der - o.der)

    def __rsub__(self, o):
        return Dual._lift(o) - self

    def __mul__(self, o):
        o = Dual._lift(o)
        return Dual(self.val * o.val, self.der * o.val + self.val * o.der)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = Dual._lift(o)
        return Dual(self.val / o.val, (self.der * o.val - self.val * o.der) / (o.val * o.val))

    def __rtruediv__(self, o):
        return Dual._lift(o) / self

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pos__(self):
        return self

    def __abs__(self):
        return -self if self.val < 0 else self

    def __pow__(self, k):
        if isinstance(k, Dual):
            return exp(k * log(self))
        if k == 0:
            return Dual(1.0, 0.0)
        return Dual(self.val**k, k * self.val ** (k - 1) * self.der)

    def __rpow__(self, base):
        return exp(self * math.log(base))

    def __lt__(self, o):
        return self.val < Dual._lift(o).val

    def __le__(self, o):
        return self.val <= Dual._lift(o).val

    def __gt__(self, o):
        return self.val > Dual._lift(o).val

    def __ge__(self, o):
        return self.val >= Dual._lift(o).val

    def __float__(self):
        return self.val


def _unary(fval: Callable[[float], float], fder: Callable[[float], float], npfun):
    def op(x):
        if isinstance(x, Dual):
            return Dual(fval(x.val), fder(x.val) * x.der)
        if isinstance(x, np.ndarray):
            if x.dtype == object:
                return np.array([op(e) for e in x.flat], dtype=object).reshape(x.shape)
            return npfun(x)
        return fval(x)

    return op


sin = _unary(math.sin, math.cos, np.sin)
cos = _unary(math.cos, lambda v: -math.sin(v), np.cos)
exp = _unary(math.exp, math.exp, np.exp)
log = _unary(math.log, lambda v: 1.0 / v, np.log)
sqrt = _unary(math.sqrt, lambda v: 0.5 / math.sqrt(v), np.sqrt)


def atan2(y, x):
    """Two-argument arctangent that propagates dual parts."""
    if isinstance(y, Dual) or isinstance(x, Dual):
        y, x = Dual._lift(y), Dual._lift(x)
        r2 = x.val * x.val + y.val * y.val
        return Dual(math.atan2(y.val, x.val), (x.val * y.der - y.val * x.der) / r2)
    return math.atan2(y, x)


def value_of(x) -> float:
    return x.val if isinstance(x, Dual) else float(x)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


def _always(_p) -> bool:
    return True


def fd_step(p: np.ndarray) -> float:
    """Central-difference step used for opaque callables."""
    return 1e-6 * (1.0 + float(np.linalg.norm(p)))


@dataclass(frozen=True)
class ScalarField:
    """A scalar function with a domain predicate.

    ``dual=True`` declares that ``fn`` is built from the combinators in this
    module and may be evaluated on object arrays of :class:`Dual`.
    """

    fn: Callable[[np.ndarray], float]
    domain: Callable[[np.ndarray], bool] = _always
    dual: bool = False

    def __call__(self, p) -> float:
        return self.eval(p)

    def eval(self, p) -> float:
        p = np.asarray(p, dtype=float)
        if not self.domain(p):
            raise DomainError(f"point {p} outside scalar-field domain")
        return float(self.fn(p))

    def directional(self, p, v) -> float:
        """Derivative of the field at ``p`` in direction ``v``."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if not self.domain(p):
            raise DomainError(f"point {p} outside scalar-field domain")
        if self.dual:
            seeded = np.array([Dual(a, b) for a, b in zip(p, v)], dtype=object)
            out = self.fn(seeded)
            return out.der if isinstance(out, Dual) else 0.0
        return float(self.gradient(p) @ v)

    def gradient(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        n = p.size
        if self.dual:
            return np.array([self.directional(p, np.eye(n)[j]) for j in range(n)])
        h = fd_step(p)
        g = np.empty(n)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            g[j] = (float(self.fn(p + e)) - float(self.fn(p - e))) / (2 * h)
        return g


@dataclass(frozen=True)
class VectorField:
    """A vector field ``p -> v(p)`` with a Jacobian contract."""

    fn: Callable[[np.ndarray], np.ndarray]
    domain: Callable[[np.ndarray], bool] = _always
    dual: bool = False
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, p) -> np.ndarray:
        return self.eval(p)

    def eval(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if not self.domain(p):
            raise DomainError(f"point {p} outside vector-field domain")
        return np.asarray(self.fn(p), dtype=float)

    def jacobian(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if not self.domain(p):
            raise DomainError(f"point {p} outside vector-field domain")
        if self.jac is not None:
            return np.asarray(self.jac(p), dtype=float)
        n = p.size
        J = np.empty((n, n))
        if self.dual:
            for j in range(n):
                seeded = np.array([Dual(a, float(i == j)) for i, a in enumerate(p)], dtype=object)
                out = self.fn(seeded)
                J[:, j] = [o.der if isinstance(o, Dual) else 0.0 for o in out]
            return J
        h = fd_step(p)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            J[:, j] = (np.asarray(self.fn(p + e), float) - np.asarray(self.fn(p - e), float)) / (2 * h)
        return J

    def scaled(self, weight: Callable[[np.ndarray], float]) -> "VectorField":
        """Pointwise product ``weight(p) * field(p)``; zero where weight is 0."""

        def fn(p):
            w = weight(p)
            if w == 0.0:
                return np.zeros_like(p, dtype=float)
            return w * self.eval(p)

        return VectorField(fn, self.domain)


def zero_field(n: int) -> VectorField:
    return VectorField(lambda p: np.zeros(n), dual=False, jac=lambda p: np.zeros((n, n)))


def euler_field(n: int) -> VectorField:
    """The Euler vector field ``E(x) = x`` on R^n."""
    return VectorField(lambda p: np.array(p, copy=True), dual=True, jac=lambda p: np.eye(n))


def lie_derivative(field: VectorField, f: ScalarField, p) -> float:
    """``L_field f (p) = grad f(p) . field(p)``."""
    p = np.asarray(p, dtype=float)
    if not field.domain(p) or not f.domain(p):
        raise DomainError(f"point {p} outside field or function domain")
    return f.directional(p, field.eval(p))


# ---------------------------------------------------------------------------
# Bumps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BumpSpec:
    a: float
    b: float

    def __post_init__(self):
        if not (0 < self.a < self.b):
            raise DomainError(f"bump spec needs 0 < a < b, got ({self.a}, {self.b})")


def _g(x: float) -> float:
    return math.exp(-1.0 / x) if x > 0 else 0.0


def bump(spec: BumpSpec, t: float) -> float:
    """Smooth monotone bump: 1 on [0, a], 0 on [b, inf), strictly decreasing between."""
    if t < 0:
        raise DomainError(f"bump argument must be >= 0, got {t}")
    if t <= spec.a:
        return 1.0
    if t >= spec.b:
        return 0.0
    w = spec.b - spec.a
    up = _g((spec.b - t) / w)
    down = _g((t - spec.a) / w)
    return up / (up + down)


SMOOTH_STEP = BumpSpec(0.1, 0.9)


def smooth_step(t: float) -> float:
    """Monotone step on [0, 1]: 0 on [0, 0.1], 1 on [0.9, 1]."""
    return 1.0 - bump(SMOOTH_STEP, max(t, 0.0))


# ---------------------------------------------------------------------------
# Integrator (Dormand-Prince 5(4), local extrapolation, FSAL)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowOptions:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_steps: int = 100_000
    tau_min: float = math.log(1e-6)

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError("flow tolerances must be positive")
        if self.max_steps < 1:
            raise DomainError("max_steps must be >= 1")
        if self.tau_min >= 0:
            raise DomainError("tau_min must be negative")


DEFAULT_FLOW = FlowOptions()

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = _A[6] + (0.0,)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


def _initial_step(fun, y, f0, rtol, atol, span):
    sc = atol + rtol * np.abs(y)
    d0 = float(np.max(np.abs(y) / sc))
    d1 = float(np.max(np.abs(f0) / sc))
    if d1 == 0.0:
        return span
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = fun(y + h0 * f0)
    d2 = float(np.max(np.abs(f1 - f0) / sc)) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
    return min(100 * h0, h1, span)


def flow(
    field: VectorField,
    p,
    t: float,
    opts: FlowOptions = DEFAULT_FLOW,
    domain: Optional[Callable[[np.ndarray], bool]] = None,
) -> np.ndarray:
    """Time-``t`` flow of ``field`` from ``p`` (``t`` may be negative)."""
    y = np.array(p, dtype=float)
    if t == 0:
        return y
    sign = 1.0 if t > 0 else -1.0
    inside = domain or field.domain

    def fun(z):
        return sign * field.fn(z)

    span = abs(t)
    rtol, atol = opts.rel_tol, opts.abs_tol
    s = 0.0
    try:
        f0 = np.asarray(fun(y), dtype=float)
        h = _initial_step(fun, y, f0, rtol, atol, span)
    except DomainError:
        raise EscapeError("flow started outside the field domain", 0.0)
    steps = 0
    k = [None] * 7
    while s < span:
        steps += 1
        if steps > opts.max_steps:
            raise NonConvergenceError(f"flow exceeded {opts.max_steps} steps at time {sign * s:.6g}")
        h = min(h, span - s)
        k[0] = f0
        try:
            for i in range(1, 7):
                yi = y + h * sum(a * kj for a, kj in zip(_A[i], k[:i]) if a != 0.0)
                k[i] = np.asarray(fun(yi), dtype=float)
        except DomainError:
            h *= 0.25
            if h < 1e-14 * max(1.0, span):
                raise EscapeError("flow left the field domain", sign * s)
            continue
        y_new = yi  # stage 7 argument is the 5th-order solution
        err_vec = h * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / sc))
        if err <= 1.0:
            if not inside(y_new):
                raise EscapeError("flow left its domain", sign * s)
            s += h
            y = y_new
            f0 = k[6]
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.2))
        else:
            fac = max(0.2, 0.9 * err**-0.2)
        h *= fac
    return y


def integrate_scalar(
    fun: Callable[[float], float],
    y0: float,
    t: float,
    rel_tol: float = 1e-12,
    abs_tol: float = 1e-14,
    max_steps: int = 100_000,
) -> float:
    """Dormand-Prince solution of the autonomous scalar ODE ``y' = fun(y)``.

    Pure-float twin of :func:`flow` for the hot scalar paths.
    """
    if t == 0:
        return y0
    sign = 1.0 if t > 0 else -1.0
    span = abs(t)
    y = y0
    f0 = sign * fun(y)
    sc = abs_tol + rel_tol * abs(y)
    d0, d1 = abs(y) / sc, abs(f0) / sc
    if d1 == 0.0:
        return y
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, span)
    d2 = abs(sign * fun(y + h * f0) - f0) / sc / h
    dm = max(d1, d2)
    h = min(100 * h, (0.01 / dm) ** 0.2 if dm > 1e-15 else h * 1e3, span)
    a2, a3, a4, a5, a6, a7 = _A[1:]
    e1, _, e3, e4, e5, e6, e7 = _E
    s = 0.0
    steps = 0
    while s < span:
        steps += 1
        if steps > max_steps:
            raise NonConvergenceError(f"scalar ODE exceeded {max_steps} steps")
        h = min(h, span - s)
        k1 = f0
        k2 = sign * fun(y + h * a2[0] * k1)
        k3 = sign * fun(y + h * (a3[0] * k1 + a3[1] * k2))
        k4 = sign * fun(y + h * (a4[0] * k1 + a4[1] * k2 + a4[2] * k3))
        k5 = sign * fun(y + h * (a5[0] * k1 + a5[1] * k2 + a5[2] * k3 + a5[3] * k4))
        k6 = sign * fun(y + h * (a6[0] * k1 + a6[1] * k2 + a6[2] * k3 + a6[3] * k4 + a6[4] * k5))
        y_new = y + h * (a7[0] * k1 + a7[2] * k3 + a7[3] * k4 + a7[4] * k5 + a7[5] * k6)
        k7 = sign * fun(y_new)
        err = abs(h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7))
        err /= abs_tol + rel_tol * max(abs(y), abs(y_new))
        if err <= 1.0:
            s += h
            y = y_new
            f0 = k7
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.2))
        else:
            fac = max(0.2, 0.9 * err**-0.2)
        h *= fac
    return y


# ---------------------------------------------------------------------------
# Partitions of unity, constant extension, averaging
# ---------------------------------------------------------------------------

COVER_BUMP = BumpSpec(0.5, 1.0)


def partition_of_unity(covers: Sequence[tuple]) -> list:
    """Partition of unity subordinate to balls ``(center, radius)``.

    Raw weights are ``h_{1/2,1}(|p - c|^2 / r^2)``, normalized by their sum.
    """
    centers = [np.asarray(c, dtype=float) for c, _ in covers]
    radii = [float(r) for _, r in covers]
    if any(r <= 0 for r in radii):
        raise DomainError("cover radii must be positive")

    def raw(p: np.ndarray) -> np.ndarray:
        return np.array(
            [bump(COVER_BUMP, float(np.sum((p - c) ** 2)) / r**2) for c, r in zip(centers, radii)]
        )

    def make(i: int) -> ScalarField:
        def fn(p):
            w = raw(p)
            total = float(w.sum())
            if total == 0.0:
                raise UncoveredPointError(f"point {p} is not covered")
            return w[i] / total

        return ScalarField(fn)

    return [make(i) for i in range(len(covers))]


def extend_by_constant(f: ScalarField, c: float, region: Callable[[np.ndarray], bool]) -> ScalarField:
    """``f`` inside ``region``, the constant ``c`` elsewhere."""

    def fn(p):
        return f.fn(p) if region(p) else c

    return ScalarField(fn)


def check_orthogonal(mats: Sequence[np.ndarray], tol: float = 1e-10) -> None:
    for g in mats:
        g = np.asarray(g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise InvalidActionError("group elements must be square matrices")
        if np.max(np.abs(g.T @ g - np.eye(g.shape[0]))) > tol:
            raise InvalidActionError("group element is not orthogonal")


def group_average(field: VectorField, action) -> VectorField:
    """Average ``g^{-1} field(g p)`` over a finite group or the circle.

    ``action`` must provide ``average_matrices()``: every element of a finite
    group, or the 64 trapezoidal nodes of a circle action.
    """
    mats = [np.asarray(g, dtype=float) for g in action.average_matrices()]
    check_orthogonal(mats)
    inv = [g.T for g in mats]
    n = len(mats)

    def fn(p):
        acc = np.zeros_like(p, dtype=float)
        for g, gi in zip(mats, inv):
            acc += gi @ field.eval(g @ p)
        return acc / n

    return VectorField(fn, field.domain)
