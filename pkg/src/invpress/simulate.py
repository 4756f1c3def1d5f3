"""Trajectory integration and exponent machinery.

Fixed-step classical Runge-Kutta 4 with the substep aligned to the control
step, so control discontinuities fall exactly on integration boundaries.
Provides trajectories, the homogeneous variational (fundamental matrix)
flow, divergence integrals along trajectories, and Floquet/Lyapunov
exponents of periodic pairs via monodromy eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowupError, DomainError, NotPeriodicError, NumericError
from .model import LinearSystem, QuantizedControl

#: relative tolerance for declaring a pair periodic
PERIODICITY_TOL = 1e-6

#: central-difference step scale for state Jacobians of general systems
JAC_FD_STEP = 1e-6


@dataclass
class Trajectory:
    """Sampled solution of xdot = F(x, omega(t)) on a fixed time grid."""

    times: np.ndarray
    states: np.ndarray
    control: QuantizedControl

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise DomainError("times and states must have equal length")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class FundamentalMatrix:
    """Fundamental solution of the homogeneous variational equation at the horizon."""

    matrix: np.ndarray
    horizon: float

    def __post_init__(self):
        det = float(np.linalg.det(self.matrix))
        if not det > 0:
            raise NumericError(
                f"fundamental matrix has non-positive determinant {det:.3e}; "
                "an ODE flow preserves orientation"
            )

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


@dataclass
class ExponentSpectrum:
    """Growth exponents with multiplicities, strictly decreasing, summing to d."""

    entries: list[tuple[float, int]]
    grouping_tol: float

    def __post_init__(self):
        rhos = [r for r, _ in self.entries]
        if any(b >= a for a, b in zip(rhos, rhos[1:])):
            raise NumericError("exponents must be strictly decreasing")
        if any(m < 1 for _, m in self.entries):
            raise NumericError("multiplicities must be positive")

    @property
    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.entries)

    def unstable_sum(self) -> float:
        return float(sum(m * max(0.0, r) for r, m in self.entries))


def rk4_step(rhs, x: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step of xdot = rhs(x, u) with u held constant.

    Broadcasts over any leading batch axes of x and u.
    """
    k1 = rhs(x, u)
    k2 = rhs(x + 0.5 * h * k1, u)
    k3 = rhs(x + 0.5 * h * k2, u)
    k4 = rhs(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _interval_plan(control: QuantizedControl, tau: float, dt: float):
    """Yield (interval_index, t_start, t_end, substeps) covering [0, tau].

    dt is rounded down so that an integer number of substeps tiles each
    control interval exactly; interval endpoints are computed by
    multiplication so the final time equals tau without accumulation drift.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    if tau < 0:
        raise DomainError("tau must be >= 0")
    if tau > control.horizon + 1e-9 * max(1.0, control.horizon):
        raise DomainError(
            f"tau = {tau} exceeds the control horizon {control.horizon}"
        )
    delta = control.step
    k = 0
    while True:
        t_start = k * delta
        if t_start >= tau - 1e-12 * max(1.0, tau):
            return
        t_end = min((k + 1) * delta, tau)
        nsub = max(1, int(np.ceil((t_end - t_start) / dt - 1e-12)))
        yield k, t_start, t_end, nsub
        k += 1


def integrate_trajectory(sys, x0, control: QuantizedControl, tau: float,
                         dt: float) -> Trajectory:
    """Integrate the controlled ODE from x0 over [0, tau].

    The control value is held constant within each control interval; the
    local error of each substep is O(dt^5). Raises BlowupError at the first
    non-finite state.
    """
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    times = [0.0]
    states = [x.copy()]
    with np.errstate(over="ignore", invalid="ignore"):
        for k, t_start, t_end, nsub in _interval_plan(control, tau, dt):
            u = control.values[k]
            h = (t_end - t_start) / nsub
            for s in range(nsub):
                x = rk4_step(sys.rhs, x, u, h)
                t = t_end if s == nsub - 1 else t_start + (s + 1) * h
                if not np.all(np.isfinite(x)):
                    raise BlowupError(t)
                times.append(t)
                states.append(x.copy())
    return Trajectory(np.array(times), np.array(states), control)


def running_potential(f, control: QuantizedControl, tau: float) -> float:
    """The integral of f along the control over [0, tau].

    Exact for piecewise constant controls: a weighted sum of interval
    lengths times potential values, no quadrature error.
    """
    if tau > control.horizon + 1e-9 * max(1.0, control.horizon):
        raise DomainError(f"tau = {tau} exceeds the control horizon {control.horizon}")
    total = 0.0
    remaining = tau
    for v in control.values:
        if remaining <= 1e-15 * max(1.0, tau):
            break
        length = min(control.step, remaining)
        total += length * f.value(v)
        remaining -= length
    return total


def _state_jacobian(sys, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Jacobian of the vector field in x, by central differences for general systems."""
    if isinstance(sys, LinearSystem):
        return sys.A
    d = sys.dim
    h = JAC_FD_STEP * (1.0 + np.linalg.norm(x))
    jac = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        jac[:, i] = (np.asarray(sys.F(x + e, u), dtype=float)
                     - np.asarray(sys.F(x - e, u), dtype=float)) / (2.0 * h)
    return jac


def integrate_variational(sys, x0, control: QuantizedControl, tau: float,
                          dt: float) -> FundamentalMatrix:
    """Fundamental matrix of the linearization along the trajectory from x0.

    Solves Phidot = A(t) Phi, Phi(0) = I jointly with the base trajectory,
    where A(t) is the state Jacobian along the solution. For a linear
    system A(t) is constant and the base trajectory is not needed.
    """
    if isinstance(sys, LinearSystem):
        d = sys.dim
        phi = np.eye(d)
        a = sys.A

        def mat_rhs(p, _u):
            return a @ p

        with np.errstate(over="ignore", invalid="ignore"):
            for k, t_start, t_end, nsub in _interval_plan(control, tau, dt):
                h = (t_end - t_start) / nsub
                for _ in range(nsub):
                    phi = rk4_step(mat_rhs, phi, None, h)
        if not np.all(np.isfinite(phi)):
            raise BlowupError(tau)
        return FundamentalMatrix(phi, tau)

    d = sys.dim
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    phi = np.eye(d)
    t = 0.0

    def joint_rhs(y, u):
        xs, ps = y[:d], y[d:].reshape(d, d)
        fx = np.asarray(sys.F(xs, u), dtype=float)
        jp = _state_jacobian(sys, xs, u) @ ps
        return np.concatenate([fx, jp.ravel()])

    y = np.concatenate([x, phi.ravel()])
    with np.errstate(over="ignore", invalid="ignore"):
        for k, t_start, t_end, nsub in _interval_plan(control, tau, dt):
            u = control.values[k]
            h = (t_end - t_start) / nsub
            for s in range(nsub):
                y = rk4_step(joint_rhs, y, u, h)
                if not np.all(np.isfinite(y)):
                    raise BlowupError(t_start + (s + 1) * h)
    return FundamentalMatrix(y[d:].reshape(d, d), tau)


def divergence_integral(sys, traj: Trajectory) -> float:
    """Integral of div F_{omega(s)} along the trajectory.

    Exactly tau * trace(A) for linear systems. Otherwise a trapezoid rule
    on the trajectory grid, applied per control interval so the divergence
    jump at control switches is handled on the correct side.
    """
    tau = traj.horizon
    if isinstance(sys, LinearSystem):
        return tau * float(np.trace(sys.A))
    control = traj.control
    times = traj.times
    states = traj.states
    if len(times) < 2:
        return 0.0
    # assign each grid segment to its control interval by midpoint, so the
    # divergence jump at a control switch is integrated on the correct side
    mids = 0.5 * (times[:-1] + times[1:])
    seg_interval = np.minimum(np.floor(mids / control.step).astype(int),
                              control.num_steps - 1)
    total = 0.0
    a = 0
    for b in range(1, len(times)):
        boundary = b == len(times) - 1 or seg_interval[b] != seg_interval[a]
        if not boundary:
            continue
        u = control.values[seg_interval[a]]
        g = np.array([sys.divergence(states[i], u) for i in range(a, b + 1)])
        total += float(np.trapezoid(g, times[a:b + 1]))
        a = b
    return total


def floquet_exponents(sys, x0, control: QuantizedControl, period: float, dt: float,
                      grouping_tol: float | None = None) -> ExponentSpectrum:
    """Floquet/Lyapunov exponents of a periodic control-trajectory pair.

    The pair must be periodic: the control horizon equals the period and
    the trajectory closes up within tolerance. Exponents are log moduli of
    monodromy eigenvalues divided by the period, clustered within the
    grouping tolerance with algebraic multiplicities.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if abs(control.horizon - period) > 1e-9 * max(1.0, period):
        raise DomainError(
            f"control horizon {control.horizon} must equal the period {period} "
            "(the control is extended periodically)"
        )
    traj = integrate_trajectory(sys, x0, control, period, dt)
    defect = float(np.linalg.norm(traj.end - x0))
    tol = PERIODICITY_TOL * (1.0 + np.linalg.norm(x0))
    if defect > tol:
        raise NotPeriodicError(defect, tol)
    monodromy = integrate_variational(sys, x0, control, period, dt).matrix
    try:
        mu = np.linalg.eigvals(monodromy)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"monodromy eigensolver failed: {exc}") from exc
    rho = np.sort(np.log(np.abs(mu)) / period)[::-1]
    if grouping_tol is None:
        grouping_tol = 1e-3 * float(np.max(np.abs(rho), initial=0.0)) + 1e-9
    entries: list[tuple[float, int]] = []
    group = [rho[0]]
    for r in rho[1:]:
        if group[0] - r <= grouping_tol:
            group.append(r)
        else:
            entries.append((float(np.mean(group)), len(group)))
            group = [r]
    entries.append((float(np.mean(group)), len(group)))
    return ExponentSpectrum(entries, grouping_tol)


def periodic_pair_upper_bound(sys, x0, control: QuantizedControl, period: float,
                              dt: float, f) -> float:
    """Pressure upper bound evaluated at one periodic control-trajectory pair:
    the unstable Floquet exponent sum plus the period-averaged potential.

    The pair's regularity (controllability of the linearization) is not
    verified here; for equilibrium pairs use the dedicated equilibrium
    bound, which runs the Kalman test.
    """
    spectrum = floquet_exponents(sys, x0, control, period, dt)
    average = running_potential(f, control, period) / period
    return spectrum.unstable_sum() + average
