"""Exception hierarchy shared by all invpress modules.

The CLI maps these onto exit codes: ConfigError -> 2,
NotAdmissibleError -> 3, PreconditionError subclasses -> 4.
"""


class InvpressError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(InvpressError):
    """Invalid or inconsistent configuration (bad keys, cross-field violations)."""


class DomainError(InvpressError):
    """An argument lies outside the operation's domain (time range, control range)."""


class BlowupError(InvpressError):
    """Integration produced a non-finite state."""

    def __init__(self, t_bad: float, message: str | None = None):
        self.t_bad = float(t_bad)
        super().__init__(message or f"trajectory became non-finite at t = {t_bad:.6g}")


class NotPeriodicError(InvpressError):
    """The supplied pair is not periodic within tolerance."""

    def __init__(self, defect: float, tol: float):
        self.defect = float(defect)
        self.tol = float(tol)
        super().__init__(
            f"pair is not periodic: closure defect {defect:.3e} exceeds tolerance {tol:.3e}"
        )


class PreconditionError(InvpressError):
    """A hypothesis of one of the implemented theorems fails."""


class NotHyperbolicError(PreconditionError):
    def __init__(self, eigenvalue: complex, tol: float, note: str = ""):
        self.eigenvalue = complex(eigenvalue)
        self.tol = float(tol)
        msg = (
            f"matrix is not hyperbolic: eigenvalue {eigenvalue:.6g} has "
            f"|Re| <= tolerance {tol:.3e}"
        )
        if note:
            msg += f" ({note})"
        super().__init__(msg)


class NotControllableError(PreconditionError):
    def __init__(self, rank: int, dim: int):
        self.rank = int(rank)
        self.dim = int(dim)
        super().__init__(f"pair (A, B) is not controllable: Kalman rank {rank} < {dim}")


class NotInteriorError(PreconditionError):
    def __init__(self, point, margin: float, required: float):
        self.margin = float(margin)
        super().__init__(
            f"point {point} is not strictly inside the control range: "
            f"margin {margin:.3e} < required {required:.3e}"
        )


class NotEquilibriumError(PreconditionError):
    def __init__(self, defect: float, tol: float):
        self.defect = float(defect)
        super().__init__(
            f"not an equilibrium pair: |F(x0,u0)| = {defect:.3e} exceeds tolerance {tol:.3e}"
        )


class NotRegularError(PreconditionError):
    def __init__(self, rank: int, dim: int):
        self.rank = int(rank)
        super().__init__(
            f"equilibrium pair is not regular: linearization has Kalman rank {rank} < {dim}"
        )


class NotAdmissibleError(InvpressError):
    """Some grid point of K is covered by no candidate at this resolution."""

    def __init__(self, uncovered, n: int | None = None):
        self.uncovered = list(uncovered)
        self.n = n
        where = f" at series step n = {n}" if n is not None else ""
        super().__init__(
            f"(K, Q) not admissible at this resolution{where}: "
            f"{len(self.uncovered)} uncovered grid point(s), first: {self.uncovered[0]}"
        )


class DegenerateHullError(InvpressError):
    """A hull construction collapsed (near-zero volume or origin not interior)."""


class VacuousBoundError(InvpressError):
    """No (x, omega) pair survives in Q: the lower bound degenerates to -infinity."""

    def __init__(self):
        super().__init__(
            "no sampled (x, omega) pair keeps the trajectory in Q on [0, tau]; "
            "the lower bound is vacuous (-inf), not a finite number"
        )


class NumericError(InvpressError):
    """A numerical kernel failed (eigensolver breakdown, inconsistent projection)."""
