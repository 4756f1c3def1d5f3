"""Domain types for control systems on R^d.

Systems (linear and general), compact convex control ranges, piecewise
constant quantized controls, potentials on the control range, and compact
sets with tolerant membership tests. All types are immutable after
construction and safe to share across parallel workers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull, QhullError

from .errors import ConfigError, DomainError

#: default tolerance for closed-set membership tests
MEMBERSHIP_TOL = 1e-9

#: default step scale for central-difference divergence of a general system
DIV_FD_STEP = 1e-5


def _as_float_array(x, ndim: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != ndim:
        raise DomainError(f"{name} must be a {ndim}-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite entries")
    return a


# ---------------------------------------------------------------------------
# control range
# ---------------------------------------------------------------------------


@dataclass
class ControlRange:
    """Compact convex control range U in R^m: a box or a convex hull of points.

    An optional reference point ``u_ref`` must lie strictly inside with
    margin at least ``interior_tol``.
    """

    kind: str
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    points: np.ndarray | None = None
    u_ref: np.ndarray | None = None
    interior_tol: float = MEMBERSHIP_TOL

    def __post_init__(self):
        if self.kind == "box":
            self.lo = _as_float_array(self.lo, 1, "lo")
            self.hi = _as_float_array(self.hi, 1, "hi")
            if self.lo.shape != self.hi.shape:
                raise DomainError("lo and hi must have the same length")
            if np.any(self.lo > self.hi):
                raise DomainError("box control range requires lo <= hi componentwise")
        elif self.kind == "hull":
            self.points = _as_float_array(self.points, 2, "points")
            if self.points.shape[0] < 1:
                raise DomainError("hull control range needs at least one point")
        else:
            raise DomainError(f"unknown control range kind {self.kind!r}")
        if self.u_ref is not None:
            self.u_ref = _as_float_array(self.u_ref, 1, "u_ref")
            if self.u_ref.shape[0] != self.dim:
                raise DomainError("u_ref dimension does not match the control range")
            margin = self.interior_margin(self.u_ref)
            if margin < self.interior_tol:
                raise DomainError(
                    f"u_ref is not strictly inside the control range "
                    f"(margin {margin:.3e} < {self.interior_tol:.3e})"
                )

    @classmethod
    def box(cls, lo, hi, u_ref=None, interior_tol: float = MEMBERSHIP_TOL) -> "ControlRange":
        return cls(kind="box", lo=lo, hi=hi, u_ref=u_ref, interior_tol=interior_tol)

    @classmethod
    def hull(cls, points, u_ref=None, interior_tol: float = MEMBERSHIP_TOL) -> "ControlRange":
        return cls(kind="hull", points=points, u_ref=u_ref, interior_tol=interior_tol)

    @property
    def dim(self) -> int:
        return len(self.lo) if self.kind == "box" else self.points.shape[1]

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "box":
            return self.lo.copy(), self.hi.copy()
        return self.points.min(axis=0), self.points.max(axis=0)

    @cached_property
    def _hull_equations(self) -> np.ndarray | None:
        """Facet equations a.x + b <= 0 of the hull, None when degenerate."""
        if self.kind != "hull" or self.dim == 1 or self.points.shape[0] <= self.dim:
            return None
        try:
            return ConvexHull(self.points).equations
        except QhullError:
            return None

    def vertices(self) -> np.ndarray:
        """Vertex list: box corners, or the extreme points of the hull."""
        if self.kind == "box":
            corners = list(itertools.product(*zip(self.lo, self.hi)))
            return np.unique(np.array(corners, dtype=float), axis=0)
        if self.dim == 1:
            return np.array([[self.points.min()], [self.points.max()]])
        if self._hull_equations is None:
            return np.unique(self.points, axis=0)
        return self.points[ConvexHull(self.points).vertices]

    def contains(self, u, tol: float = 0.0) -> bool:
        """Membership test; ``tol`` slackens every defining inequality."""
        u = np.asarray(u, dtype=float).reshape(-1)
        return self.interior_margin(u) >= -tol - 1e-12 * (1.0 + _scale(self))

    def interior_margin(self, u) -> float:
        """Signed distance-like margin: positive strictly inside, negative outside.

        For boxes this is the smallest componentwise slack; for hulls the
        smallest facet slack (facet normals are unit vectors). Degenerate
        hulls have empty interior and report -inf for interior points.
        """
        u = np.asarray(u, dtype=float).reshape(-1)
        if self.kind == "box":
            return float(min(np.min(u - self.lo), np.min(self.hi - u)))
        if self.dim == 1:
            return float(min(u[0] - self.points.min(), self.points.max() - u[0]))
        eqs = self._hull_equations
        if eqs is not None:
            return float(-np.max(eqs[:, :-1] @ u + eqs[:, -1]))
        # flat hull: membership decided by LP, but the interior is empty
        dev = _lp_hull_deviation(self.points, u)
        return float("-inf") if dev <= 1e-12 * (1.0 + _scale(self)) else -dev

    def grid(self, levels: int) -> np.ndarray:
        """Deterministic value grid with ``levels`` points per coordinate.

        Boxes yield the full lattice (levels^m points). Hulls yield the
        bounding-box lattice filtered by membership, always including the
        hull vertices.
        """
        if levels < 2:
            raise ConfigError("levels must be >= 2")
        lo, hi = self.bounding_box()
        axes = [np.linspace(lo[i], hi[i], levels) for i in range(self.dim)]
        pts = np.array(list(itertools.product(*axes)))
        if self.kind == "box":
            return pts
        keep = [p for p in pts if self.contains(p, tol=1e-12)]
        out = np.array(keep) if keep else np.empty((0, self.dim))
        return np.unique(np.vstack([out, self.vertices()]), axis=0)

    def sample_interior(self, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "box":
            return self.lo + (self.hi - self.lo) * rng.random(self.dim)
        w = rng.dirichlet(np.ones(self.points.shape[0]))
        return w @ self.points


def _scale(rng_or_set) -> float:
    lo, hi = rng_or_set.bounding_box()
    return float(max(np.max(np.abs(lo)), np.max(np.abs(hi)), 1.0))


def _lp_hull_deviation(points: np.ndarray, x: np.ndarray) -> float:
    """Smallest t with |V^T lam - x|_inf <= t over convex weights lam.

    Exact membership test for possibly degenerate hulls: x is in the hull
    iff the optimum is 0.
    """
    n, d = points.shape
    # variables: lam (n), t (1); minimize t
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.zeros((2 * d, n + 1))
    b_ub = np.zeros(2 * d)
    a_ub[:d, :n] = points.T
    a_ub[:d, -1] = -1.0
    b_ub[:d] = x
    a_ub[d:, :n] = -points.T
    a_ub[d:, -1] = -1.0
    b_ub[d:] = -x
    a_eq = np.zeros((1, n + 1))
    a_eq[0, :n] = 1.0
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(0, None)], method="highs")
    if not res.success:
        raise DomainError("hull membership LP failed to solve")
    return float(res.x[-1])


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------


@dataclass
class LinearSystem:
    """Linear control system xdot = A x + B u with control range U."""

    A: np.ndarray
    B: np.ndarray
    U: ControlRange

    def __post_init__(self):
        self.A = _as_float_array(self.A, 2, "A")
        self.B = _as_float_array(self.B, 2, "B")
        d, d2 = self.A.shape
        if d != d2:
            raise DomainError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != d:
            raise DomainError(f"B must have {d} rows, got {self.B.shape}")
        if d < 1 or self.B.shape[1] < 1:
            raise DomainError("state and control dimensions must be >= 1")
        if self.B.shape[1] != self.U.dim:
            raise DomainError("control range dimension does not match B")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B.shape[1]

    def rhs(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Vector field; broadcasts over leading axes of x and u."""
        return x @ self.A.T + u @ self.B.T

    def divergence(self, x, u) -> float:
        return float(np.trace(self.A))


@dataclass
class GeneralSystem:
    """Control system xdot = F(x, u) given by an evaluable vector field.

    ``div_f`` is the divergence of F(., u); when absent it is computed by
    central differences with step DIV_FD_STEP * (1 + |x|) per coordinate.
    ``vectorized`` declares that F accepts arrays with leading batch axes.
    """

    F: "callable"
    U: ControlRange
    div_f: "callable | None" = None
    dim: int = 0
    vectorized: bool = False
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("state dimension must be >= 1")

    @property
    def input_dim(self) -> int:
        return self.U.dim

    def rhs(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        if self.vectorized or x.ndim == 1:
            return np.asarray(self.F(x, u), dtype=float)
        flat_x = x.reshape(-1, x.shape[-1])
        flat_u = np.broadcast_to(u, x.shape[:-1] + (u.shape[-1],)).reshape(-1, u.shape[-1])
        out = np.array([self.F(xi, ui) for xi, ui in zip(flat_x, flat_u)], dtype=float)
        return out.reshape(x.shape)

    def divergence(self, x, u) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        if self.div_f is not None:
            return float(self.div_f(x, u))
        h = DIV_FD_STEP * (1.0 + np.linalg.norm(x))
        total = 0.0
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            total += (self.F(x + e, u)[i] - self.F(x - e, u)[i]) / (2.0 * h)
        return float(total)


# ---------------------------------------------------------------------------
# quantized controls
# ---------------------------------------------------------------------------


@dataclass
class QuantizedControl:
    """Piecewise constant control: values held on consecutive intervals of length step.

    Evaluation at t in [0, N*step) returns the value of the containing
    interval; at t = N*step the last value (right endpoint convention).
    """

    step: float
    values: np.ndarray

    def __post_init__(self):
        self.step = float(self.step)
        if not self.step > 0:
            raise DomainError("control step must be positive")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise DomainError("values must be a nonempty (N, m) array")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("control values must be finite")

    @classmethod
    def constant(cls, value, step: float, n: int = 1) -> "QuantizedControl":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(step=step, values=np.tile(v, (n, 1)))

    @property
    def horizon(self) -> float:
        return self.step * self.values.shape[0]

    @property
    def num_steps(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def value_at(self, t: float) -> np.ndarray:
        return eval_control(self, t)

    def rotate(self, k: int) -> "QuantizedControl":
        """Cyclic shift by k intervals, the quantized time shift for periodic pairs."""
        return QuantizedControl(self.step, np.roll(self.values, -k, axis=0))

    def repeat(self, n: int) -> "QuantizedControl":
        return QuantizedControl(self.step, np.tile(self.values, (n, 1)))

    def concat(self, other: "QuantizedControl") -> "QuantizedControl":
        if abs(other.step - self.step) > 1e-12 * self.step:
            raise DomainError("cannot concatenate controls with different steps")
        return QuantizedControl(self.step, np.vstack([self.values, other.values]))


def eval_control(control: QuantizedControl, t: float) -> np.ndarray:
    """Piecewise constant lookup at time t in [0, horizon]."""
    horizon = control.horizon
    slack = 1e-12 * max(1.0, horizon)
    if t < -slack or t > horizon + slack:
        raise DomainError(f"time {t} outside the control domain [0, {horizon}]")
    idx = min(int(np.floor(max(t, 0.0) / control.step)), control.num_steps - 1)
    return control.values[idx].copy()


def check_control_in_range(control: QuantizedControl, control_range: ControlRange) -> None:
    """Raise DomainError unless every control value lies in the range (exactly)."""
    for v in control.values:
        if not control_range.contains(v, tol=0.0):
            raise DomainError(f"control value {v} lies outside the control range")


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


@dataclass
class PotentialSpec:
    """Continuous potential on the control range.

    Kinds: ``constant`` f(u) = c, ``affine`` f(u) = w.u + b, and
    ``norm-dist`` f(u) = |u - u_ref|_p with p in {1, 2, inf}. The ``offset``
    adds a constant to any kind (the potential f + c).
    """

    kind: str
    c: float = 0.0
    w: np.ndarray | None = None
    b: float = 0.0
    u_ref: np.ndarray | None = None
    p: float = 2.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind == "constant":
            self.c = float(self.c)
        elif self.kind == "affine":
            self.w = _as_float_array(self.w, 1, "w")
            self.b = float(self.b)
        elif self.kind == "norm-dist":
            self.u_ref = _as_float_array(self.u_ref, 1, "u_ref")
            if self.p not in (1, 2, np.inf) and self.p != float("inf"):
                raise DomainError("norm-dist requires p in {1, 2, inf}")
            self.p = float(self.p)
        else:
            raise DomainError(f"unknown potential kind {self.kind!r}")
        self.offset = float(self.offset)

    @classmethod
    def constant(cls, c: float) -> "PotentialSpec":
        return cls(kind="constant", c=c)

    @classmethod
    def affine(cls, w, b: float = 0.0) -> "PotentialSpec":
        return cls(kind="affine", w=w, b=b)

    @classmethod
    def norm_dist(cls, u_ref, p: float = 2.0) -> "PotentialSpec":
        return cls(kind="norm-dist", u_ref=u_ref, p=p)

    def value(self, u) -> float:
        u = np.asarray(u, dtype=float).reshape(-1)
        if self.kind == "constant":
            return self.c + self.offset
        if self.kind == "affine":
            return float(self.w @ u + self.b) + self.offset
        d = u - self.u_ref
        if self.p == 1:
            return float(np.abs(d).sum()) + self.offset
        if self.p == 2:
            return float(np.linalg.norm(d)) + self.offset
        return float(np.abs(d).max()) + self.offset

    def value_batch(self, u: np.ndarray) -> np.ndarray:
        """Evaluate on an (..., m) array of control values."""
        u = np.asarray(u, dtype=float)
        if self.kind == "constant":
            return np.full(u.shape[:-1], self.c + self.offset)
        if self.kind == "affine":
            return u @ self.w + self.b + self.offset
        d = u - self.u_ref
        if self.p == 1:
            return np.abs(d).sum(axis=-1) + self.offset
        if self.p == 2:
            return np.sqrt((d * d).sum(axis=-1)) + self.offset
        return np.abs(d).max(axis=-1) + self.offset

    def shifted(self, c: float) -> "PotentialSpec":
        """The potential f + c."""
        return PotentialSpec(kind=self.kind, c=self.c, w=self.w, b=self.b,
                             u_ref=self.u_ref, p=self.p, offset=self.offset + c)

    def lipschitz(self) -> tuple[float, float]:
        """(L, p) with |f(u) - f(v)| <= L * |u - v|_p for all u, v."""
        if self.kind == "constant":
            return 0.0, 2.0
        if self.kind == "affine":
            return float(np.linalg.norm(self.w)), 2.0
        return 1.0, self.p


def eval_potential(f: PotentialSpec, u, control_range: ControlRange | None = None,
                   tol: float = MEMBERSHIP_TOL) -> float:
    """Evaluate f(u), checking u against the control range when one is given."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if control_range is not None and not control_range.contains(u, tol=tol):
        raise DomainError(f"control value {u} lies outside the control range")
    return f.value(u)


# ---------------------------------------------------------------------------
# compact sets
# ---------------------------------------------------------------------------


@dataclass
class CompactSet:
    """Compact subset of R^d: a box, a convex hull of points, or an
    epsilon-inflation of another compact set in a p-norm metric.

    Membership is tested against the closed set with tolerance eta.
    """

    kind: str
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    points: np.ndarray | None = None
    base: "CompactSet | None" = None
    eps: float = 0.0
    eta: float = MEMBERSHIP_TOL
    pnorm: float = 2.0

    def __post_init__(self):
        if self.kind == "box":
            self.lo = _as_float_array(self.lo, 1, "lo")
            self.hi = _as_float_array(self.hi, 1, "hi")
            if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
                raise DomainError("box requires lo <= hi componentwise")
        elif self.kind == "hull":
            self.points = _as_float_array(self.points, 2, "points")
        elif self.kind == "inflation":
            if self.base is None:
                raise DomainError("inflation requires a base set")
            if self.eps < 0:
                raise DomainError("inflation radius must be >= 0")
            if self.pnorm not in (1, 2, float("inf")):
                raise DomainError("inflation metric must be a p-norm with p in {1, 2, inf}")
        else:
            raise DomainError(f"unknown compact set kind {self.kind!r}")
        if self.eta < 0:
            raise DomainError("membership tolerance eta must be >= 0")

    @classmethod
    def box(cls, lo, hi, eta: float = MEMBERSHIP_TOL) -> "CompactSet":
        return cls(kind="box", lo=lo, hi=hi, eta=eta)

    @classmethod
    def hull(cls, points, eta: float = MEMBERSHIP_TOL) -> "CompactSet":
        return cls(kind="hull", points=points, eta=eta)

    @classmethod
    def inflate(cls, base: "CompactSet", eps: float, pnorm: float = 2.0,
                eta: float = MEMBERSHIP_TOL) -> "CompactSet":
        return cls(kind="inflation", base=base, eps=eps, pnorm=pnorm, eta=eta)

    @property
    def dim(self) -> int:
        if self.kind == "box":
            return len(self.lo)
        if self.kind == "hull":
            return self.points.shape[1]
        return self.base.dim

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "box":
            return self.lo.copy(), self.hi.copy()
        if self.kind == "hull":
            return self.points.min(axis=0), self.points.max(axis=0)
        lo, hi = self.base.bounding_box()
        return lo - self.eps, hi + self.eps

    @cached_property
    def _hull_equations(self) -> np.ndarray | None:
        if self.kind != "hull" or self.dim == 1 or self.points.shape[0] <= self.dim:
            return None
        try:
            return ConvexHull(self.points).equations
        except QhullError:
            return None

    def vertices(self) -> np.ndarray:
        if self.kind == "box":
            corners = list(itertools.product(*zip(self.lo, self.hi)))
            return np.unique(np.array(corners, dtype=float), axis=0)
        if self.kind == "hull":
            if self.dim == 1:
                return np.array([[self.points.min()], [self.points.max()]])
            if self._hull_equations is None:
                return np.unique(self.points, axis=0)
            return self.points[ConvexHull(self.points).vertices]
        raise DomainError("an inflated set is not a polytope; it has no vertex list")

    def scale(self, factor: float) -> "CompactSet":
        """Scale about the origin. Defined for boxes and hulls."""
        if self.kind == "box":
            lo, hi = factor * self.lo, factor * self.hi
            return CompactSet.box(np.minimum(lo, hi), np.maximum(lo, hi), eta=self.eta)
        if self.kind == "hull":
            return CompactSet.hull(factor * self.points, eta=self.eta)
        raise DomainError("cannot scale an inflated set")

    # -- membership ---------------------------------------------------------

    def distance(self, x, pnorm: float | None = None) -> float:
        """p-norm distance from x to the set (0 inside)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        p = self.pnorm if pnorm is None else pnorm
        if self.kind == "box":
            gap = np.maximum(np.maximum(self.lo - x, x - self.hi), 0.0)
            return _pnorm(gap, p)
        if self.kind == "hull":
            return _hull_distance(self.points, x, p, self._hull_equations)
        return max(0.0, self.base.distance(x, pnorm=p) - self.eps)

    def contains(self, x, tol: float | None = None) -> bool:
        return membership(self, x, tol=tol)

    def contains_batch(self, x: np.ndarray, shrink: float = 0.0) -> np.ndarray:
        """Vectorized membership for an (..., d) array of points.

        ``shrink`` tightens the test by a margin (used to compensate
        sampled-time trajectory checks); shrink = 0 is plain membership.
        """
        x = np.asarray(x, dtype=float)
        need = shrink - self.eta
        if self.kind == "box":
            m = np.minimum((x - self.lo).min(axis=-1), (self.hi - x).min(axis=-1))
            return m >= need
        if self.kind == "hull":
            eqs = self._hull_equations
            if eqs is not None:
                slack = (x @ eqs[:, :-1].T + eqs[:, -1]).max(axis=-1)
                return -slack >= need
            if self.dim == 1:
                lo, hi = float(self.points.min()), float(self.points.max())
                m = np.minimum(x[..., 0] - lo, hi - x[..., 0])
                return m >= need
            flat = x.reshape(-1, self.dim)
            out = np.array([_lp_hull_deviation(self.points, p) <= self.eta - shrink
                            for p in flat])
            return out.reshape(x.shape[:-1])
        # inflation: vectorized for box bases, exact per-point distance otherwise
        if self.base.kind == "box":
            gap = np.maximum(np.maximum(self.base.lo - x, x - self.base.hi), 0.0)
            return self.eps - _pnorm_batch(gap, self.pnorm) >= need
        flat = x.reshape(-1, self.dim)
        out = np.array([self.eps - self.base.distance(p, pnorm=self.pnorm) >= need
                        for p in flat])
        return out.reshape(x.shape[:-1])

    def grid(self, pitch: float) -> np.ndarray:
        """Points of the origin-anchored lattice (pitch * Z^d) inside the set."""
        if pitch <= 0:
            raise ConfigError("grid pitch must be positive")
        lo, hi = self.bounding_box()
        axes = [np.arange(np.floor(lo[i] / pitch), np.ceil(hi[i] / pitch) + 1) * pitch
                for i in range(self.dim)]
        pts = np.array(list(itertools.product(*axes)))
        keep = self.contains_batch(pts)
        return pts[keep]


def _pnorm(v: np.ndarray, p: float) -> float:
    if p == 1:
        return float(np.abs(v).sum())
    if p == 2:
        return float(np.linalg.norm(v))
    return float(np.abs(v).max())


def _pnorm_batch(v: np.ndarray, p: float) -> np.ndarray:
    if p == 1:
        return np.abs(v).sum(axis=-1)
    if p == 2:
        return np.sqrt((v * v).sum(axis=-1))
    return np.abs(v).max(axis=-1)


def _hull_distance(points: np.ndarray, x: np.ndarray, p: float,
                   equations: np.ndarray | None) -> float:
    d = points.shape[1]
    if d == 1:
        lo, hi = points.min(), points.max()
        return _pnorm(np.array([max(lo - x[0], x[0] - hi, 0.0)]), p)
    if equations is not None:
        slack = float(np.max(equations[:, :-1] @ x + equations[:, -1]))
        if slack <= 0:
            return 0.0
    if p == 2:
        n = points.shape[0]
        w0 = np.full(n, 1.0 / n)

        def obj(w):
            r = w @ points - x
            return float(r @ r), 2.0 * points @ r

        res = minimize(obj, w0, jac=True, method="SLSQP",
                       bounds=[(0, 1)] * n,
                       constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0,
                                     "jac": lambda w: np.ones(n)}],
                       options={"maxiter": 200, "ftol": 1e-14})
        return float(np.sqrt(max(res.fun, 0.0)))
    # p = 1 or inf: linear program over convex weights and slack variables
    n = points.shape[0]
    if p == 1:
        # vars: lam (n), t (d); min sum t, -t <= V^T lam - x <= t
        c = np.concatenate([np.zeros(n), np.ones(d)])
        a_ub = np.zeros((2 * d, n + d))
        a_ub[:d, :n] = points.T
        a_ub[:d, n:] = -np.eye(d)
        a_ub[d:, :n] = -points.T
        a_ub[d:, n:] = -np.eye(d)
        b_ub = np.concatenate([x, -x])
    else:
        c = np.concatenate([np.zeros(n), [1.0]])
        a_ub = np.zeros((2 * d, n + 1))
        a_ub[:d, :n] = points.T
        a_ub[:d, -1] = -1.0
        a_ub[d:, :n] = -points.T
        a_ub[d:, -1] = -1.0
        b_ub = np.concatenate([x, -x])
    a_eq = np.zeros((1, a_ub.shape[1]))
    a_eq[0, :n] = 1.0
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * a_ub.shape[1], method="highs")
    if not res.success:
        raise DomainError("hull distance LP failed to solve")
    return float(res.fun)


def membership(s: CompactSet, x, tol: float | None = None) -> bool:
    """True iff x lies in s up to tolerance (s.eta unless overridden)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    eta = s.eta if tol is None else tol
    if s.kind == "box":
        return bool(np.all(x >= s.lo - eta) and np.all(x <= s.hi + eta))
    if s.kind == "hull":
        eqs = s._hull_equations
        if eqs is not None:
            return bool(np.max(eqs[:, :-1] @ x + eqs[:, -1]) <= eta)
        if s.dim == 1:
            return bool(s.points.min() - eta <= x[0] <= s.points.max() + eta)
        return _lp_hull_deviation(s.points, x) <= eta
    return s.base.distance(x, pnorm=s.pnorm) <= s.eps + eta


# ---------------------------------------------------------------------------
# built-in general systems
# ---------------------------------------------------------------------------


def _vanderpol_f(x, u):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    d1 = x2
    d2 = (1.0 - x1 * x1) * x2 - x1 + u[..., 0]
    return np.stack([np.broadcast_to(d1, np.broadcast_shapes(d1.shape, d2.shape)),
                     np.broadcast_to(d2, np.broadcast_shapes(d1.shape, d2.shape))], axis=-1)


def _vanderpol_div(x, u):
    x = np.asarray(x, dtype=float)
    return 1.0 - x[..., 0] ** 2


def make_builtin_system(name: str, control_range: ControlRange) -> GeneralSystem:
    """Construct a named built-in general system on the given control range."""
    if name == "vanderpol":
        # forced Van der Pol oscillator, state dependent divergence 1 - x1^2
        if control_range.dim != 1:
            raise ConfigError("vanderpol expects a one-dimensional control range")
        return GeneralSystem(F=_vanderpol_f, U=control_range, div_f=_vanderpol_div,
                             dim=2, vectorized=True, name="vanderpol")
    raise ConfigError(f"unknown builtin system {name!r} (available: vanderpol)")
