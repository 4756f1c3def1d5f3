"""Brute-force estimation of spanning-set weights and the growth-rate bounds.

Builds finite candidate pools of quantized controls, records which
candidate keeps which grid point of K inside Q (the coverage matrix),
solves the minimum-weight set cover exactly (branch and bound) or greedily,
extrapolates the growth rate of the optimal total weight over horizons
n * tau0, and evaluates the volume-based lower bound, optionally on the
projected unstable subsystem.

The estimator's totals are feasible covers, hence an upper-biased bracket
of the true infimum beyond the exact-solver regime; reports carry the
rigorous lower and upper bounds alongside for cross-checking.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BlowupError,
    ConfigError,
    DomainError,
    NotAdmissibleError,
    PreconditionError,
    VacuousBoundError,
)
from .model import CompactSet, ControlRange, LinearSystem, PotentialSpec, QuantizedControl
from .simulate import divergence_integral, integrate_trajectory, rk4_step, running_potential
from .spectral import (
    HyperbolicSplit,
    equilibrium_upper_bound,
    formula_pressure,
    hyperbolic_split,
    min_potential,
    project_points,
    project_system,
)

#: candidate-count threshold below which the exact cover solver runs
EXACT_THRESHOLD = 20


# ---------------------------------------------------------------------------
# candidate pools
# ---------------------------------------------------------------------------


def build_candidates(control_range: ControlRange, levels: int, tau: float,
                     delta: float, cap: int, seed: int = 0) -> list[QuantizedControl]:
    """Finite candidate pool of quantized controls with horizon tau.

    Full enumeration of value sequences over the per-coordinate level grid
    when that count stays within ``cap``; otherwise ``cap`` seeded
    pseudo-random sequences that always include every constant control at
    a grid value.
    """
    if levels < 2:
        raise ConfigError("levels must be >= 2")
    n_steps = int(round(tau / delta))
    if n_steps < 1 or abs(n_steps * delta - tau) > 1e-9 * max(1.0, tau):
        raise ConfigError(f"delta = {delta} must divide tau = {tau}")
    grid = control_range.grid(levels)
    n_values = len(grid)
    if cap < n_values:
        raise ConfigError(
            f"cap = {cap} is below the {n_values} constant controls of the value grid"
        )
    total = n_values ** n_steps
    if total <= cap:
        seqs = np.array(list(itertools.product(range(n_values), repeat=n_steps)))
    else:
        rng = np.random.default_rng(seed)
        const = np.repeat(np.arange(n_values)[:, None], n_steps, axis=1)
        rand = rng.integers(0, n_values, size=(cap - n_values, n_steps))
        seqs = np.vstack([const, rand])
    return [QuantizedControl(delta, grid[s]) for s in seqs]


def concat_candidates(base: list[QuantizedControl], n: int, cap: int,
                      rng: np.random.Generator) -> list[QuantizedControl]:
    """n-fold concatenations of the base pool, capped.

    The full product when it fits within ``cap``; otherwise the n-fold
    repetition of every base candidate (the periodic extensions) plus
    seeded random concatenations up to the cap.
    """
    if n == 1:
        return list(base)
    c0 = len(base)
    if cap < c0:
        raise ConfigError(f"cap = {cap} is below the base pool size {c0}")
    values = np.stack([c.values for c in base])
    step = base[0].step
    if c0 ** n <= cap:
        idx = np.array(list(itertools.product(range(c0), repeat=n)))
    else:
        rep = np.repeat(np.arange(c0)[:, None], n, axis=1)
        rand = rng.integers(0, c0, size=(cap - c0, n))
        idx = np.vstack([rep, rand])
    stacked = values[idx]  # (C, n, N0, m)
    flat = stacked.reshape(len(idx), -1, values.shape[-1])
    return [QuantizedControl(step, v) for v in flat]


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------


@dataclass
class CoverageMatrix:
    """Boolean spanning relation between candidates and grid points of K."""

    candidates: list[QuantizedControl]
    points: np.ndarray
    covers: np.ndarray
    weights: np.ndarray
    tau: float
    dt: float
    stride: int
    q_margin: float = 0.0

    def uncovered_points(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(~self.covers.any(axis=0))]


def _interval_lengths(tau: float, delta: float) -> list[float]:
    lengths = []
    remaining = tau
    while remaining > 1e-12 * max(1.0, tau):
        lengths.append(min(delta, remaining))
        remaining -= lengths[-1]
    return lengths


def _coverage_block(sys, points: np.ndarray, values: np.ndarray, delta: float,
                    tau: float, dt: float, stride: int, q_set: CompactSet,
                    q_margin: float) -> np.ndarray:
    """Covers for one block of candidates, fully vectorized over (C, P)."""
    n_cand = values.shape[0]
    n_pts = len(points)
    x = np.broadcast_to(points, (n_cand, n_pts, points.shape[1])).copy()
    start_inside = q_set.contains_batch(points, shrink=q_margin)
    covers = np.tile(start_inside, (n_cand, 1))
    step_index = 0
    lengths = _interval_lengths(tau, delta)
    with np.errstate(over="ignore", invalid="ignore"):
        for k, length in enumerate(lengths):
            u = values[:, k, :][:, None, :]
            nsub = max(1, int(np.ceil(length / dt - 1e-12)))
            h = length / nsub
            for s in range(nsub):
                x = rk4_step(sys.rhs, x, u, h)
                step_index += 1
                last = (k == len(lengths) - 1) and (s == nsub - 1)
                if step_index % stride == 0 or last:
                    finite = np.all(np.isfinite(x), axis=-1)
                    if finite.all():
                        inside = q_set.contains_batch(x, shrink=q_margin)
                    else:
                        inside = q_set.contains_batch(np.nan_to_num(x), shrink=q_margin)
                        inside &= finite
                    covers &= inside
                    if not covers.any():
                        return covers
    return covers


def _coverage_block_star(args):
    return _coverage_block(*args)


def coverage_map(sys, k_set: CompactSet, q_set: CompactSet,
                 candidates: list[QuantizedControl], tau: float, dt: float,
                 stride: int = 1, pitch: float | None = None,
                 points: np.ndarray | None = None,
                 f: PotentialSpec | None = None,
                 q_margin: float = 0.0, workers: int = 1) -> CoverageMatrix:
    """Coverage matrix: covers[i, j] iff the trajectory from points[j] under
    candidates[i] stays in Q at every sampled time of [0, tau].

    Sampled times are every ``stride``-th integration step plus t = 0 and
    t = tau. Points default to the origin-anchored lattice of ``pitch``
    inside K. Candidates whose trajectory blows up cover nothing; a point
    covered by no candidate is reported inside the matrix, not raised here.
    """
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    if not candidates:
        raise ConfigError("candidate list is empty")
    if points is None:
        if pitch is None:
            raise ConfigError("either points or a grid pitch is required")
        points = k_set.grid(pitch)
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if len(points) == 0:
        raise ConfigError("the grid over K is empty at this pitch")
    steps = {c.num_steps for c in candidates}
    deltas = {c.step for c in candidates}
    if len(steps) != 1 or len(deltas) != 1:
        raise ConfigError("candidates must share one step and one horizon")
    delta = deltas.pop()
    horizon = candidates[0].horizon
    if tau > horizon + 1e-9 * max(1.0, horizon):
        raise ConfigError(f"tau = {tau} exceeds the candidate horizon {horizon}")
    values = np.stack([c.values for c in candidates])

    if workers > 1 and len(candidates) > workers:
        blocks = np.array_split(np.arange(len(candidates)), workers)
        tasks = [(sys, points, values[b], delta, tau, dt, stride, q_set, q_margin)
                 for b in blocks if len(b)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_coverage_block_star, tasks))
        covers = np.vstack(parts)
    else:
        covers = _coverage_block(sys, points, values, delta, tau, dt, stride,
                                 q_set, q_margin)

    if f is None:
        weights = np.ones(len(candidates))
    else:
        lengths = np.array(_interval_lengths(tau, delta))
        per_interval = f.value_batch(values[:, :len(lengths), :])
        weights = np.exp(per_interval @ lengths)
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise DomainError("candidate weights must be positive and finite")
    return CoverageMatrix(list(candidates), points, covers, weights, tau, dt,
                          stride, q_margin)


# ---------------------------------------------------------------------------
# minimum-weight set cover
# ---------------------------------------------------------------------------


@dataclass
class CoverResult:
    """A feasible cover: chosen candidate indices and their exact total weight."""

    chosen: tuple[int, ...]
    total_weight: float
    method: str
    gap_bound: float

    @property
    def size(self) -> int:
        return len(self.chosen)


def _greedy_cover(covers: np.ndarray, weights: np.ndarray) -> tuple[list[int], float]:
    n_pts = covers.shape[1]
    uncovered = np.ones(n_pts, dtype=bool)
    chosen: list[int] = []
    while uncovered.any():
        new_counts = (covers & uncovered).sum(axis=1)
        with np.errstate(divide="ignore"):
            ratio = np.where(new_counts > 0, weights / np.maximum(new_counts, 1), np.inf)
        i = int(np.argmin(ratio))  # ties resolve to the lower index
        if not np.isfinite(ratio[i]):
            break
        chosen.append(i)
        uncovered &= ~covers[i]
    total = float(np.sum(weights[np.array(sorted(chosen), dtype=int)]))
    return chosen, total


def _exact_cover(covers: np.ndarray, weights: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Branch and bound over candidate subsets with an admissible bound.

    Branches on the uncovered point with the fewest covering candidates;
    the bound below any node is the largest over uncovered points of the
    cheapest candidate covering that point.
    """
    n_cand, n_pts = covers.shape
    masks = [int(sum(1 << j for j in range(n_pts) if covers[i, j])) for i in range(n_cand)]
    full = (1 << n_pts) - 1
    point_cands = []
    for j in range(n_pts):
        cands = [i for i in range(n_cand) if covers[i, j]]
        cands.sort(key=lambda i: (weights[i], i))
        point_cands.append(cands)

    greedy_chosen, greedy_total = _greedy_cover(covers, weights)
    best_total = greedy_total
    best_set = tuple(sorted(greedy_chosen))

    min_weight_for_point = [weights[cands[0]] for cands in point_cands]

    def uncovered_bound(mask: int) -> float:
        bound = 0.0
        for j in range(n_pts):
            if not mask >> j & 1:
                w = min_weight_for_point[j]
                if w > bound:
                    bound = w
        return bound

    def recurse(mask: int, total: float, chosen: tuple[int, ...]):
        nonlocal best_total, best_set
        if mask == full:
            if total < best_total:
                best_total = total
                best_set = tuple(sorted(chosen))
            return
        if total + uncovered_bound(mask) >= best_total:
            return
        # branch on the most constrained uncovered point
        pivot, degree = -1, n_cand + 1
        for j in range(n_pts):
            if not mask >> j & 1:
                deg = len(point_cands[j])
                if deg < degree:
                    pivot, degree = j, deg
        for i in point_cands[pivot]:
            if i in chosen:
                continue
            recurse(mask | masks[i], total + weights[i], chosen + (i,))

    recurse(0, 0.0, ())
    return best_set, float(np.sum(weights[np.array(best_set, dtype=int)]))


def min_weight_cover(matrix: CoverageMatrix,
                     exact_threshold: int = EXACT_THRESHOLD) -> CoverResult:
    """Minimum-weight cover of the grid points by candidates.

    Exact branch and bound when the candidate count is at most
    ``exact_threshold``; otherwise the weight-per-new-point greedy with
    ties broken by lower candidate index. The greedy result is reported
    with its harmonic-number optimality factor over the fractional bound.
    """
    uncovered = matrix.uncovered_points()
    if uncovered:
        raise NotAdmissibleError(uncovered)
    covers = matrix.covers
    weights = matrix.weights
    if len(matrix.candidates) <= exact_threshold:
        chosen, total = _exact_cover(covers, weights)
        return CoverResult(chosen, total, "exact", 0.0)
    chosen, total = _greedy_cover(covers, weights)
    k = int(covers.sum(axis=1).max())
    harmonic = float(sum(1.0 / i for i in range(1, k + 1))) if k else 1.0
    return CoverResult(tuple(sorted(chosen)), total, "greedy", harmonic)


# ---------------------------------------------------------------------------
# pressure series
# ---------------------------------------------------------------------------


@dataclass
class SeriesRow:
    n: int
    tau: float
    cover_size: int
    a_value: float
    log_a_over_tau: float
    slope_so_far: float
    method: str


@dataclass
class LowerBound:
    """Volume-argument lower bound with its ingredients."""

    value: float
    beta: float
    alpha: float
    surviving: int
    tau: float
    used_projection: bool

    def __float__(self) -> float:
        return self.value


@dataclass
class PressureReport:
    """Series of cover totals over horizons n * tau0 and fitted growth rates."""

    rows: list[SeriesRow]
    slope: float
    slope_with_intercept: float
    last_ratio: float
    tail_start: int
    formula_value: float | None
    lower: LowerBound | None
    upper_value: float | None
    metadata: dict = field(default_factory=dict)

    def series_taus(self) -> np.ndarray:
        return np.array([r.tau for r in self.rows])


def _origin_slope(taus: np.ndarray, logs: np.ndarray) -> float:
    """Least-squares slope of log a against tau anchored at the origin.

    log a(0) = 0 for the empty-horizon cover, so the anchored fit is the
    tail-averaged form of the defining ratio (1/tau) log a(tau).
    """
    denom = float(taus @ taus)
    return float(taus @ logs / denom) if denom > 0 else float("nan")


def _tail_start(n: int) -> int:
    return n // 2 + 1


def estimate_pressure(sys, k_set: CompactSet, q_set: CompactSet, f: PotentialSpec,
                      tau0: float, n_max: int, *, delta: float, levels: int,
                      cap: int, seed: int, dt: float, stride: int,
                      pitch: float | None = None, points: np.ndarray | None = None,
                      exact_threshold: int = EXACT_THRESHOLD,
                      q_margin: float = 0.0, workers: int = 1,
                      with_bounds: bool = True) -> PressureReport:
    """Growth-rate estimate of the minimal spanning weight over n * tau0.

    Candidates at horizon n * tau0 are n-fold concatenations of the base
    pool, so cost grows linearly in n at a fixed cap. The slope is the
    origin-anchored least-squares fit of log a over the tail half of the
    series; the with-intercept local slope and the last-point ratio are
    also reported. When hypotheses hold, the closed-form value and the
    rigorous lower/upper bounds are attached for cross-checking.
    """
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    n_tau0 = int(round(tau0 / delta))
    if n_tau0 < 1 or abs(n_tau0 * delta - tau0) > 1e-9 * max(1.0, tau0):
        raise ConfigError(f"tau0 = {tau0} must be a multiple of delta = {delta}")
    base = build_candidates(sys.U, levels, tau0, delta, cap, seed)
    if points is None:
        if pitch is None:
            raise ConfigError("either points or a grid pitch is required")
        points = k_set.grid(pitch)
    rows: list[SeriesRow] = []
    taus, logs = [], []
    last_candidates: list[QuantizedControl] = base
    for n in range(1, n_max + 1):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n,)))
        cands = concat_candidates(base, n, cap, rng)
        last_candidates = cands
        tau = n * tau0
        matrix = coverage_map(sys, k_set, q_set, cands, tau, dt, stride=stride,
                              points=points, f=f, q_margin=q_margin, workers=workers)
        try:
            cover = min_weight_cover(matrix, exact_threshold)
        except NotAdmissibleError as exc:
            raise NotAdmissibleError(exc.uncovered, n=n) from None
        taus.append(tau)
        logs.append(math.log(cover.total_weight))
        start = _tail_start(n)
        t_arr = np.array(taus[start - 1:])
        l_arr = np.array(logs[start - 1:])
        rows.append(SeriesRow(n, tau, cover.size, cover.total_weight,
                              logs[-1] / tau, _origin_slope(t_arr, l_arr),
                              cover.method))
    start = _tail_start(n_max)
    t_arr = np.array(taus[start - 1:])
    l_arr = np.array(logs[start - 1:])
    slope = _origin_slope(t_arr, l_arr)
    if len(t_arr) >= 2:
        slope_int = float(np.polyfit(t_arr, l_arr, 1)[0])
    else:
        slope_int = slope
    last_ratio = logs[-1] / taus[-1]

    formula_value = None
    lower = None
    upper_value = None
    if with_bounds and isinstance(sys, LinearSystem):
        try:
            formula_value = formula_pressure(sys, f)
        except PreconditionError:
            formula_value = None
        try:
            lower = lower_bound(sys, k_set, q_set, f, taus[-1], last_candidates,
                                dt, points=points, use_projection=True)
        except (PreconditionError, VacuousBoundError, DomainError):
            lower = None
        try:
            u_star, _ = min_potential(f, sys.U)
            x_star = np.linalg.solve(sys.A, -sys.B @ u_star)
            upper_value = equilibrium_upper_bound(sys, x_star, u_star, f)
        except (PreconditionError, np.linalg.LinAlgError):
            upper_value = None

    metadata = {
        "tau0": tau0, "n_max": n_max, "delta": delta, "levels": levels,
        "cap": cap, "seed": seed, "dt": dt, "stride": stride,
        "pitch": pitch, "points": int(len(points)),
        "exact_threshold": exact_threshold, "q_margin": q_margin,
        "eta_K": k_set.eta, "eta_Q": q_set.eta,
        "base_pool": len(base),
    }
    return PressureReport(rows, slope, slope_int, last_ratio, start,
                          formula_value, lower, upper_value, metadata)


def outer_pressure_series(sys, k_set: CompactSet, q_set: CompactSet, f: PotentialSpec,
                          eps_ladder: list[float], pnorm: float = 2.0,
                          **kwargs) -> list[tuple[float, PressureReport]]:
    """Pressure estimates for Q replaced by shrinking epsilon-inflations.

    The ladder must be strictly decreasing and positive; one report per
    epsilon, tagged with it.
    """
    if not eps_ladder:
        raise ConfigError("the epsilon ladder is empty")
    if any(e <= 0 for e in eps_ladder):
        raise ConfigError("epsilon values must be positive")
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ConfigError("epsilon values must be strictly decreasing")
    out = []
    for eps in eps_ladder:
        inflated = CompactSet.inflate(q_set, eps, pnorm=pnorm, eta=q_set.eta)
        report = estimate_pressure(sys, k_set, inflated, f, **kwargs)
        report.metadata["eps"] = eps
        out.append((eps, report))
    return out


# ---------------------------------------------------------------------------
# lower bound
# ---------------------------------------------------------------------------


def _surviving_mask(sys, points: np.ndarray, values: np.ndarray, delta: float,
                    tau: float, dt: float, q_set: CompactSet) -> np.ndarray:
    return _coverage_block(sys, points, values, delta, tau, dt, 1, q_set, 0.0)


def _project_compact(split: HyperbolicSplit, s: CompactSet) -> CompactSet:
    verts = project_points(split, s.vertices())
    return CompactSet.hull(verts, eta=s.eta)


def lower_bound(sys, k_set: CompactSet, q_set: CompactSet, f: PotentialSpec,
                tau: float, candidates: list[QuantizedControl], dt: float,
                pitch: float | None = None, points: np.ndarray | None = None,
                use_projection: bool = False) -> LowerBound:
    """Volume-argument lower bound over sampled surviving pairs.

    Over all (grid point, candidate) pairs whose trajectory stays in Q on
    [0, tau]: beta is the smallest running potential, alpha the smallest
    divergence integral, and the bound is (beta + max(0, alpha)) / tau.
    With projection the computation runs on the unstable subsystem with
    projected K and Q, where the divergence integral is exactly
    tau * trace(A restricted to E^u).
    """
    if not candidates:
        raise ConfigError("candidate list is empty")
    if points is None:
        if pitch is None:
            raise ConfigError("either points or a grid pitch is required")
        points = k_set.grid(pitch)
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    values = np.stack([c.values for c in candidates])
    delta = candidates[0].step
    s_f = np.array([running_potential(f, c, tau) for c in candidates])

    if use_projection:
        if not isinstance(sys, LinearSystem):
            raise DomainError("projection requires a linear system")
        split = hyperbolic_split(sys.A)
        if split.unstable_dim == 0:
            # trivial unstable subspace: every pair survives, no expansion term
            beta = float(np.min(s_f))
            return LowerBound(beta / tau, beta, 0.0, len(points) * len(candidates),
                              tau, True)
        sys_p = project_system(sys, split)
        points_p = project_points(split, points)
        q_p = _project_compact(split, q_set)
        surviving = _surviving_mask(sys_p, points_p, values, delta, tau, dt, q_p)
        alpha = tau * float(np.trace(sys_p.A))
    else:
        surviving = _surviving_mask(sys, points, values, delta, tau, dt, q_set)
        if isinstance(sys, LinearSystem):
            alpha = tau * float(np.trace(sys.A))
        else:
            alpha = np.inf
            for i, j in zip(*np.nonzero(surviving)):
                try:
                    traj = integrate_trajectory(sys, points[j], candidates[i], tau, dt)
                except BlowupError:
                    continue
                alpha = min(alpha, divergence_integral(sys, traj))
            if not np.isfinite(alpha):
                alpha = 0.0

    count = int(surviving.sum())
    if count == 0:
        raise VacuousBoundError()
    surviving_cands = surviving.any(axis=1)
    beta = float(np.min(s_f[surviving_cands]))
    value = (beta + max(0.0, alpha)) / tau
    return LowerBound(value, beta, float(alpha), count, tau, use_projection)
