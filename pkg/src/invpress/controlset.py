"""Monte Carlo approximation of the control set of a controllable
hyperbolic linear system.

The forward cloud samples endpoints reachable from the origin, the
backward cloud endpoints of the time-reversed system. The estimate is the
convex hull of cloud points lying in both cloud hulls, a polytope usable
as K and Q in the pressure estimator. Everything is deterministic given
the seed; sample i always uses the i-th spawned random stream, so growing
the sample count extends rather than reshuffles the cloud.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import ConfigError, DegenerateHullError, DomainError, NotHyperbolicError
from .model import CompactSet, ControlRange, LinearSystem, MEMBERSHIP_TOL
from .simulate import rk4_step
from .spectral import check_formula_hypotheses

#: fraction of control values drawn from the vertex set (bang-bang bias)
VERTEX_BIAS = 0.75

#: hulls with volume at or below this are treated as degenerate
DEGENERATE_VOLUME = 1e-12


@dataclass
class ControlSetApprox:
    """Convex polytope approximating the control set, with sampling metadata."""

    forward_cloud: np.ndarray
    backward_cloud: np.ndarray
    hull_vertices: np.ndarray
    samples: int
    horizon: float
    seed: int
    control_step: float
    dt: float
    origin_margin: float
    control_values: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.hull_vertices.shape[1]

    def diameter(self) -> float:
        v = self.hull_vertices
        return float(max(np.linalg.norm(a - b) for a in v for b in v))

    def as_compact_set(self, eta: float = MEMBERSHIP_TOL) -> CompactSet:
        return CompactSet.hull(self.hull_vertices, eta=eta)


def sample_control_values(control_range: ControlRange, rng: np.random.Generator,
                          n_steps: int) -> np.ndarray:
    """One random piecewise constant control, biased toward range vertices."""
    verts = control_range.vertices()
    values = np.empty((n_steps, control_range.dim))
    for k in range(n_steps):
        if rng.random() < VERTEX_BIAS:
            values[k] = verts[rng.integers(0, len(verts))]
        else:
            values[k] = control_range.sample_interior(rng)
    return values


def _batched_endpoints(a: np.ndarray, b: np.ndarray, values: np.ndarray,
                       step: float, dt: float) -> np.ndarray:
    """Endpoints of trajectories from the origin under each control (RK4)."""
    n_samples, n_steps, _ = values.shape
    x = np.zeros((n_samples, a.shape[0]))
    nsub = max(1, int(np.ceil(step / dt - 1e-12)))
    h = step / nsub

    def rhs(z, u):
        return z @ a.T + u @ b.T

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            u = values[:, k, :]
            for _ in range(nsub):
                x = rk4_step(rhs, x, u, h)
    return x


def _hull_equations(points: np.ndarray) -> np.ndarray:
    try:
        return ConvexHull(points).equations
    except QhullError as exc:
        raise DegenerateHullError(f"cloud hull is degenerate: {exc}") from exc


def _in_hull(points: np.ndarray, equations: np.ndarray, tol: float) -> np.ndarray:
    return (points @ equations[:, :-1].T + equations[:, -1] <= tol).all(axis=1)


def estimate_control_set(sys: LinearSystem, samples: int = 2000, horizon: float = 8.0,
                         dt: float = 0.01, seed: int = 0,
                         control_step: float | None = None) -> ControlSetApprox:
    """Estimate the control set of a controllable hyperbolic linear system.

    Clouds are endpoints of trajectories from the origin under ``samples``
    random bang-bang-biased controls (forward) and under the time-reversed
    dynamics (backward). Constant vertex controls are always included so
    the extreme points of the reachable sets are hit. The returned hull is
    an approximation of the control set, not the set itself.
    """
    try:
        check_formula_hypotheses(sys)
    except NotHyperbolicError as exc:
        raise NotHyperbolicError(
            exc.eigenvalue, exc.tol,
            note="without hyperbolicity the control set is unbounded and this "
                 "bounded-hull estimator does not apply",
        ) from None
    d = sys.dim
    if control_step is None:
        control_step = max(dt, horizon / 16.0)
    n_steps = max(1, int(round(horizon / control_step)))
    control_step = horizon / n_steps

    verts = sys.U.vertices()
    if samples < len(verts):
        raise ConfigError(
            f"samples = {samples} is below the {len(verts)} constant vertex controls"
        )
    values = np.empty((samples, n_steps, sys.input_dim))
    values[:len(verts)] = np.repeat(verts[:, None, :], n_steps, axis=1)
    for i in range(len(verts), samples):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        values[i] = sample_control_values(sys.U, rng, n_steps)

    fwd = _batched_endpoints(sys.A, sys.B, values, control_step, dt)
    bwd = _batched_endpoints(-sys.A, -sys.B, values, control_step, dt)
    fwd = fwd[np.all(np.isfinite(fwd), axis=1)]
    bwd = bwd[np.all(np.isfinite(bwd), axis=1)]
    if len(fwd) == 0 or len(bwd) == 0:
        raise DegenerateHullError("all sampled trajectories blew up")

    if d == 1:
        flo, fhi = fwd.min(), fwd.max()
        blo, bhi = bwd.min(), bwd.max()
        lo, hi = max(flo, blo), min(fhi, bhi)
        if hi - lo <= DEGENERATE_VOLUME:
            raise DegenerateHullError(
                f"intersection interval [{lo:.3e}, {hi:.3e}] is degenerate"
            )
        hull_vertices = np.array([[lo], [hi]])
        volume = hi - lo
        origin_margin = float(min(-lo, hi))
    else:
        eq_f = _hull_equations(fwd)
        eq_b = _hull_equations(bwd)
        tol = MEMBERSHIP_TOL
        cloud = np.vstack([fwd, bwd])
        both = cloud[_in_hull(cloud, eq_f, tol) & _in_hull(cloud, eq_b, tol)]
        if len(both) <= d:
            raise DegenerateHullError(
                "too few cloud points lie in both reachability hulls"
            )
        try:
            hull = ConvexHull(both)
        except QhullError as exc:
            raise DegenerateHullError(f"intersection hull is degenerate: {exc}") from exc
        if hull.volume <= DEGENERATE_VOLUME:
            raise DegenerateHullError(f"hull volume {hull.volume:.3e} is degenerate")
        hull_vertices = both[hull.vertices]
        volume = hull.volume
        origin_margin = float(-np.max(hull.equations[:, -1]))

    if origin_margin <= 0:
        raise DegenerateHullError(
            f"the origin is not strictly inside the estimated hull "
            f"(margin {origin_margin:.3e}); increase samples or the horizon"
        )
    return ControlSetApprox(
        forward_cloud=fwd,
        backward_cloud=bwd,
        hull_vertices=hull_vertices,
        samples=samples,
        horizon=horizon,
        seed=seed,
        control_step=control_step,
        dt=dt,
        origin_margin=origin_margin,
        control_values=values,
    )


def shrink_hull(approx: ControlSetApprox, factor: float,
                eta: float = MEMBERSHIP_TOL) -> CompactSet:
    """Hull scaled about the origin by a factor in (0, 1], as a compact set.

    Produces a compact subset with nonempty interior sitting strictly
    inside the estimate when factor < 1.
    """
    if not 0.0 < factor <= 1.0:
        raise DomainError(f"shrink factor must lie in (0, 1], got {factor}")
    return CompactSet.hull(factor * approx.hull_vertices, eta=eta)
