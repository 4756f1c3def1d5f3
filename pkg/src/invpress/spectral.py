"""Exact linear-algebraic quantities.

Eigenstructure with clustered multiplicities, the hyperbolic splitting and
its projection built from reordered real Schur forms, Kalman
controllability, potential minimization over the control range, the closed
form pressure of controllable hyperbolic linear systems, and the
equilibrium-pair upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog, minimize

from .errors import (
    DomainError,
    NotControllableError,
    NotEquilibriumError,
    NotHyperbolicError,
    NotInteriorError,
    NotRegularError,
    NumericError,
)
from .model import ControlRange, LinearSystem, PotentialSpec

#: relative eigenvalue clustering tolerance (scaled by the spectral norm of A)
EIGEN_CLUSTER_TOL = 1e-8

#: relative hyperbolicity tolerance (scaled by the spectral norm of A)
HYPERBOLICITY_TOL = 1e-8

#: relative singular value threshold for the Kalman rank test
KALMAN_RANK_TOL = 1e-10

#: extra margin required of interior points beyond the configured tolerance
INTERIOR_MARGIN = 1e-9

#: defect tolerance scale for equilibrium pairs
EQUILIBRIUM_TOL = 1e-6

#: central-difference step scale for equilibrium linearizations
JAC_STEP = 1e-6


@dataclass
class Spectrum:
    """Eigenvalues with algebraic multiplicities; multiplicities sum to d."""

    entries: list[tuple[complex, int]]
    cluster_tol: float
    dim: int

    def __post_init__(self):
        if sum(m for _, m in self.entries) != self.dim:
            raise NumericError("spectrum multiplicities must sum to the dimension")

    def real_parts(self) -> list[float]:
        return [ev.real for ev, _ in self.entries]


@dataclass
class HyperbolicSplit:
    """Stable/unstable invariant bases and the projection onto E^u along E^s."""

    stable_basis: np.ndarray
    unstable_basis: np.ndarray
    projection: np.ndarray
    margin: float

    @property
    def stable_dim(self) -> int:
        return self.stable_basis.shape[1]

    @property
    def unstable_dim(self) -> int:
        return self.unstable_basis.shape[1]


def eigen_decompose(a, cluster_tol: float | None = None) -> Spectrum:
    """Eigenvalues of a square matrix with clustered algebraic multiplicities.

    Eigenvalues closer than the clustering tolerance are merged into one
    entry whose multiplicity is the cluster size.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix contains non-finite entries")
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    scale = float(np.linalg.norm(a, 2)) if a.size else 0.0
    tol = cluster_tol if cluster_tol is not None else EIGEN_CLUSTER_TOL * max(scale, 1e-300)
    d = a.shape[0]
    # connected components of the threshold graph on the complex plane
    parent = list(range(d))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(d):
        for j in range(i + 1, d):
            if abs(vals[i] - vals[j]) <= tol:
                parent[find(i)] = find(j)
    clusters: dict[int, list[complex]] = {}
    for i in range(d):
        clusters.setdefault(find(i), []).append(vals[i])
    entries = []
    for members in clusters.values():
        rep = complex(np.mean(members))
        if abs(rep.imag) <= tol:
            rep = complex(rep.real, 0.0)
        entries.append((rep, len(members)))
    entries.sort(key=lambda e: (-e[0].real, -e[0].imag))
    return Spectrum(entries, tol, d)


def unstable_sum(spectrum: Spectrum) -> float:
    """Sum of multiplicity times positive real part over the spectrum."""
    return float(sum(m * max(0.0, ev.real) for ev, m in spectrum.entries))


def hyperbolic_split(a, tol: float | None = None) -> HyperbolicSplit:
    """Stable/unstable splitting of a hyperbolic matrix.

    Bases come from reordered real Schur forms (numerically stable for
    non-normal matrices); the projection is assembled from the basis pair
    and verified to be idempotent and to commute with the matrix.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    scale = float(np.linalg.norm(a, 2))
    hyp_tol = tol if tol is not None else HYPERBOLICITY_TOL * max(scale, 1e-300)
    spec = eigen_decompose(a)
    margin = min(abs(ev.real) for ev, _ in spec.entries)
    if margin <= hyp_tol:
        worst = min((ev for ev, _ in spec.entries), key=lambda ev: abs(ev.real))
        raise NotHyperbolicError(worst, hyp_tol)
    _, z_s, n_s = sla.schur(a, output="real", sort="lhp")
    _, z_u, n_u = sla.schur(a, output="real", sort="rhp")
    stable = z_s[:, :n_s]
    unstable = z_u[:, :n_u]
    if n_s + n_u != d:
        raise NumericError(
            f"Schur reordering split {n_s} + {n_u} != {d}; eigenvalues too close "
            "to the imaginary axis"
        )
    mixed = np.hstack([unstable, stable])
    sel = np.zeros((d, d))
    sel[:n_u, :n_u] = np.eye(n_u)
    try:
        proj = mixed @ sel @ np.linalg.inv(mixed)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"splitting basis is singular: {exc}") from exc
    check_tol = 1e-10 * (1.0 + scale) * max(1.0, np.linalg.cond(mixed))
    if np.max(np.abs(proj @ proj - proj)) > check_tol:
        raise NumericError("projection failed the idempotence check")
    if np.max(np.abs(proj @ a - a @ proj)) > check_tol:
        raise NumericError("projection failed to commute with the matrix")
    return HyperbolicSplit(stable, unstable, proj, float(margin))


def kalman_rank(a, b) -> tuple[int, bool]:
    """Rank of the controllability matrix [B, AB, ..., A^{d-1}B].

    Uses a singular value decomposition with relative threshold
    KALMAN_RANK_TOL; controllable iff the rank equals the state dimension.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    d = a.shape[0]
    if a.shape[1] != d or b.shape[0] != d:
        raise DomainError("incompatible Kalman test dimensions")
    blocks = [b]
    for _ in range(d - 1):
        blocks.append(a @ blocks[-1])
    ctrb = np.hstack(blocks)
    svals = np.linalg.svd(ctrb, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0, d == 0
    rank = int(np.sum(svals > KALMAN_RANK_TOL * svals[0]))
    return rank, rank == d


def min_potential(f: PotentialSpec, control_range: ControlRange,
                  levels: int = 33) -> tuple[np.ndarray, float]:
    """Minimizer and minimum of the potential over the control range.

    Exact by kind: constant potentials return any grid point, affine ones a
    minimizing vertex, norm-dist ones the projection of the reference point
    onto the range. ``levels`` only picks the reported point for constants.
    """
    if levels < 2:
        raise DomainError("levels must be >= 2")
    if f.kind == "constant":
        lo, hi = control_range.bounding_box()
        u = 0.5 * (lo + hi)
        if not control_range.contains(u, tol=1e-12):
            u = control_range.vertices()[0]
        return np.asarray(u, dtype=float), f.value(u)
    if f.kind == "affine":
        verts = control_range.vertices()
        vals = verts @ f.w + f.b + f.offset
        i = int(np.argmin(vals))
        return verts[i].copy(), float(vals[i])
    # norm-dist: project u_ref onto the range
    u_ref = f.u_ref
    if control_range.contains(u_ref, tol=0.0):
        return u_ref.copy(), f.value(u_ref)
    if control_range.kind == "box":
        u = np.clip(u_ref, control_range.lo, control_range.hi)
        return u, f.value(u)
    u = _project_onto_hull(control_range.points, u_ref, f.p)
    return u, f.value(u)


def _project_onto_hull(points: np.ndarray, target: np.ndarray, p: float) -> np.ndarray:
    """Point of the convex hull closest to the target in the p-norm."""
    n, d = points.shape
    if p == 2:
        w0 = np.full(n, 1.0 / n)

        def obj(w):
            r = w @ points - target
            return float(r @ r), 2.0 * points @ r

        res = minimize(obj, w0, jac=True, method="SLSQP",
                       bounds=[(0, 1)] * n,
                       constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0,
                                     "jac": lambda w: np.ones(n)}],
                       options={"maxiter": 300, "ftol": 1e-16})
        return res.x @ points
    if p == 1:
        c = np.concatenate([np.zeros(n), np.ones(d)])
        a_ub = np.zeros((2 * d, n + d))
        a_ub[:d, :n] = points.T
        a_ub[:d, n:] = -np.eye(d)
        a_ub[d:, :n] = -points.T
        a_ub[d:, n:] = -np.eye(d)
        b_ub = np.concatenate([target, -target])
        nvar = n + d
    else:
        c = np.concatenate([np.zeros(n), [1.0]])
        a_ub = np.zeros((2 * d, n + 1))
        a_ub[:d, :n] = points.T
        a_ub[:d, -1] = -1.0
        a_ub[d:, :n] = -points.T
        a_ub[d:, -1] = -1.0
        b_ub = np.concatenate([target, -target])
        nvar = n + 1
    a_eq = np.zeros((1, nvar))
    a_eq[0, :n] = 1.0
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * nvar, method="highs")
    if not res.success:
        raise NumericError("hull projection LP failed")
    return res.x[:n] @ points


def check_formula_hypotheses(sys: LinearSystem) -> tuple[Spectrum, HyperbolicSplit]:
    """Verify controllability, hyperbolicity, and 0 interior to U; return
    the spectrum and splitting for reuse."""
    rank, controllable = kalman_rank(sys.A, sys.B)
    if not controllable:
        raise NotControllableError(rank, sys.dim)
    split = hyperbolic_split(sys.A)
    zero = np.zeros(sys.input_dim)
    margin = sys.U.interior_margin(zero)
    required = INTERIOR_MARGIN + sys.U.interior_tol
    if margin < required:
        raise NotInteriorError(zero, margin, required)
    return eigen_decompose(sys.A), split


def formula_pressure(sys: LinearSystem, f: PotentialSpec) -> float:
    """Closed-form invariance pressure of a controllable hyperbolic linear
    system over its control set: min of the potential plus the unstable sum."""
    if not isinstance(sys, LinearSystem):
        raise DomainError("the pressure formula applies to linear systems only")
    spectrum, _ = check_formula_hypotheses(sys)
    _, fmin = min_potential(f, sys.U)
    return fmin + unstable_sum(spectrum)


def _linearization(sys, x0: np.ndarray, u0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """State and input Jacobians of the vector field at (x0, u0)."""
    if isinstance(sys, LinearSystem):
        return sys.A, sys.B
    d = sys.dim
    m = sys.input_dim
    hx = JAC_STEP * (1.0 + np.linalg.norm(x0))
    hu = JAC_STEP * (1.0 + np.linalg.norm(u0))
    a = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = hx
        a[:, i] = (np.asarray(sys.F(x0 + e, u0), dtype=float)
                   - np.asarray(sys.F(x0 - e, u0), dtype=float)) / (2.0 * hx)
    b = np.empty((d, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = hu
        b[:, j] = (np.asarray(sys.F(x0, u0 + e), dtype=float)
                   - np.asarray(sys.F(x0, u0 - e), dtype=float)) / (2.0 * hu)
    return a, b


def equilibrium_upper_bound(sys, x0, u0, f: PotentialSpec,
                            eq_tol: float | None = None) -> float:
    """Upper bound from a regular equilibrium pair: the unstable sum of the
    linearization at (x0, u0) plus f(u0)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    fx = np.asarray(sys.rhs(x0, u0), dtype=float)
    defect = float(np.linalg.norm(fx))
    tol = eq_tol if eq_tol is not None else EQUILIBRIUM_TOL * (1.0 + np.linalg.norm(x0))
    if defect > tol:
        raise NotEquilibriumError(defect, tol)
    margin = sys.U.interior_margin(u0)
    required = INTERIOR_MARGIN + sys.U.interior_tol
    if margin < required:
        raise NotInteriorError(u0, margin, required)
    a, b = _linearization(sys, x0, u0)
    rank, controllable = kalman_rank(a, b)
    if not controllable:
        raise NotRegularError(rank, a.shape[0])
    return unstable_sum(eigen_decompose(a)) + f.value(u0)


def project_system(sys: LinearSystem, split: HyperbolicSplit) -> LinearSystem:
    """Subsystem on the unstable subspace, expressed in the E^u basis."""
    if split.unstable_dim == 0:
        raise DomainError("the unstable subspace is trivial; nothing to project onto")
    eu = split.unstable_basis
    pinv_eu = np.linalg.pinv(eu)
    a_u = pinv_eu @ sys.A @ eu
    b_u = pinv_eu @ (split.projection @ sys.B)
    return LinearSystem(A=a_u, B=b_u, U=sys.U)


def project_points(split: HyperbolicSplit, points: np.ndarray) -> np.ndarray:
    """Coordinates of the projected points in the E^u basis."""
    coords = np.linalg.pinv(split.unstable_basis) @ split.projection
    return np.asarray(points, dtype=float) @ coords.T
