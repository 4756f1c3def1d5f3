"""Configuration ingestion, subcommand dispatch, and report serialization.

Configs are strict TOML: unknown keys are fatal (with a nearest-key
suggestion), cross-field constraints are checked at parse time, and every
report embeds the fully resolved config so each number is reproducible.

Exit codes: 0 success, 1 verification failure or internal error, 2 config
error, 3 pair not admissible at the chosen resolution, 4 theorem
precondition failed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import difflib
import json
import sys as _sys
import time
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .controlset import ControlSetApprox, estimate_control_set, shrink_hull
from .errors import (
    ConfigError,
    InvpressError,
    NotAdmissibleError,
    PreconditionError,
)
from .model import (
    CompactSet,
    ControlRange,
    GeneralSystem,
    LinearSystem,
    PotentialSpec,
    QuantizedControl,
    make_builtin_system,
)
from .pressure import (
    PressureReport,
    build_candidates,
    concat_candidates,
    estimate_pressure,
    lower_bound,
    outer_pressure_series,
)
from .simulate import divergence_integral, floquet_exponents, integrate_trajectory, \
    integrate_variational
from .spectral import (
    eigen_decompose,
    equilibrium_upper_bound,
    formula_pressure,
    hyperbolic_split,
    kalman_rank,
    min_potential,
    unstable_sum,
)

SCHEMA_VERSION = 1

_SECTIONS = {
    "system": {"kind", "A", "B", "ode"},
    "control": {"range", "u0"},
    "potential": {"kind", "c", "w", "b", "u_ref", "p"},
    "sets": {"K", "Q"},
    "discretization": {
        "dt", "delta", "u_levels", "tau0", "n_max", "stride", "exact_threshold",
        "cap", "seed", "pitch", "samples", "horizon", "eps_ladder", "q_margin",
    },
    "output": {"report", "csv"},
}
_RANGE_KEYS = {"lo", "hi", "vertices"}
_SET_KEYS = {"kind", "lo", "hi", "vertices", "shrink", "eta", "eps", "pnorm"}

_DISC_DEFAULTS = {
    "dt": 0.01, "delta": 0.25, "u_levels": 3, "tau0": None, "n_max": 8,
    "stride": 5, "exact_threshold": 20, "cap": 8192, "seed": 0, "pitch": None,
    "samples": 2000, "horizon": 8.0, "eps_ladder": None, "q_margin": 0.0,
}


@dataclass
class RunConfig:
    """Parsed and validated configuration with defaults resolved."""

    raw: dict
    system: "LinearSystem | GeneralSystem"
    potential: PotentialSpec
    k_spec: dict | None
    q_spec: dict | None
    disc: dict
    output: dict


def _suggest(key: str, allowed) -> str:
    close = difflib.get_close_matches(key, sorted(allowed), n=1, cutoff=0.6)
    return f"; did you mean {close[0]!r}?" if close else ""


def _check_keys(table: dict, allowed, path: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}.{key}{_suggest(key, allowed)}")


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise ConfigError(f"missing required key {path}.{key}")
    return table[key]


def parse_config(text: str) -> RunConfig:
    """Parse a TOML config; unknown keys and cross-field violations are errors."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    _check_keys(data, _SECTIONS.keys(), "config")

    system_tbl = _require(data, "system", "config")
    _check_keys(system_tbl, _SECTIONS["system"], "system")
    control_tbl = _require(data, "control", "config")
    _check_keys(control_tbl, _SECTIONS["control"], "control")

    range_tbl = _require(control_tbl, "range", "control")
    _check_keys(range_tbl, _RANGE_KEYS, "control.range")
    u0 = control_tbl.get("u0")
    if "vertices" in range_tbl:
        if "lo" in range_tbl or "hi" in range_tbl:
            raise ConfigError("control.range takes either lo/hi or vertices, not both")
        control_range = ControlRange.hull(range_tbl["vertices"], u_ref=u0)
    else:
        lo = _require(range_tbl, "lo", "control.range")
        hi = _require(range_tbl, "hi", "control.range")
        control_range = ControlRange.box(lo, hi, u_ref=u0)

    kind = _require(system_tbl, "kind", "system")
    if kind == "linear":
        a = _require(system_tbl, "A", "system")
        b = _require(system_tbl, "B", "system")
        system = LinearSystem(A=a, B=b, U=control_range)
    elif kind == "general":
        ode = _require(system_tbl, "ode", "system")
        if not isinstance(ode, str) or not ode.startswith("builtin:"):
            raise ConfigError("system.ode must be of the form 'builtin:<name>'")
        system = make_builtin_system(ode.removeprefix("builtin:"), control_range)
    else:
        raise ConfigError(f"system.kind must be 'linear' or 'general', got {kind!r}")

    pot_tbl = data.get("potential", {"kind": "constant", "c": 0.0})
    _check_keys(pot_tbl, _SECTIONS["potential"], "potential")
    pkind = _require(pot_tbl, "kind", "potential")
    if pkind == "constant":
        potential = PotentialSpec.constant(pot_tbl.get("c", 0.0))
    elif pkind == "affine":
        potential = PotentialSpec.affine(_require(pot_tbl, "w", "potential"),
                                         pot_tbl.get("b", 0.0))
    elif pkind == "norm-dist":
        p_raw = pot_tbl.get("p", 2)
        p = float("inf") if p_raw in ("inf", "Inf") else float(p_raw)
        potential = PotentialSpec.norm_dist(_require(pot_tbl, "u_ref", "potential"), p)
    else:
        raise ConfigError(
            f"potential.kind must be constant, affine, or norm-dist, got {pkind!r}"
        )

    sets_tbl = data.get("sets", {})
    _check_keys(sets_tbl, _SECTIONS["sets"], "sets")
    k_spec = sets_tbl.get("K")
    q_spec = sets_tbl.get("Q")
    for name, spec in (("K", k_spec), ("Q", q_spec)):
        if spec is None:
            continue
        _check_keys(spec, _SET_KEYS, f"sets.{name}")
        skind = _require(spec, "kind", f"sets.{name}")
        if skind not in ("box", "hull", "from-controlset"):
            raise ConfigError(
                f"sets.{name}.kind must be box, hull, or from-controlset, got {skind!r}"
            )

    disc_tbl = data.get("discretization", {})
    _check_keys(disc_tbl, _SECTIONS["discretization"], "discretization")
    disc = dict(_DISC_DEFAULTS)
    disc.update(disc_tbl)
    if disc["tau0"] is None:
        disc["tau0"] = disc["delta"]
    for key in ("dt", "delta", "tau0"):
        if not disc[key] > 0:
            raise ConfigError(f"discretization.{key} must be positive")
    ratio = disc["delta"] / disc["dt"]
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ConfigError(
            "discretization.delta must be a positive multiple of discretization.dt"
        )
    ratio = disc["tau0"] / disc["delta"]
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ConfigError(
            "discretization.tau0 must be a positive multiple of discretization.delta"
        )

    output_tbl = data.get("output", {})
    _check_keys(output_tbl, _SECTIONS["output"], "output")

    resolved = {
        "system": dict(system_tbl),
        "control": {"range": dict(range_tbl), **({"u0": u0} if u0 is not None else {})},
        "potential": dict(pot_tbl),
        "sets": {k: dict(v) for k, v in sets_tbl.items()},
        "discretization": disc,
        "output": dict(output_tbl),
    }
    return RunConfig(raw=resolved, system=system, potential=potential,
                     k_spec=k_spec, q_spec=q_spec, disc=disc, output=dict(output_tbl))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(float(v)) if isinstance(v, float) else str(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + "}"
    raise ConfigError(f"cannot serialize value {v!r}")


def serialize_config(cfg: RunConfig) -> str:
    """Emit the resolved config back to TOML; parse(serialize(cfg)) == cfg."""
    lines = []
    for section, table in cfg.raw.items():
        entries = {k: v for k, v in table.items() if v is not None}
        if not entries:
            continue
        lines.append(f"[{section}]")
        for key, value in entries.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def _build_set(spec: dict, approx: ControlSetApprox | None, what: str) -> CompactSet:
    kind = spec["kind"]
    if kind == "from-controlset":
        if approx is None:
            raise ConfigError(f"sets.{what} needs a control-set estimate")
        s = shrink_hull(approx, float(spec.get("shrink", 1.0)),
                        eta=float(spec.get("eta", 1e-9)))
    elif kind == "box":
        s = CompactSet.box(spec["lo"], spec["hi"], eta=float(spec.get("eta", 1e-9)))
    else:
        s = CompactSet.hull(spec["vertices"], eta=float(spec.get("eta", 1e-9)))
    if "eps" in spec:
        s = CompactSet.inflate(s, float(spec["eps"]),
                               pnorm=float(spec.get("pnorm", 2.0)), eta=s.eta)
    return s


def resolve_sets(cfg: RunConfig) -> tuple[CompactSet, CompactSet, ControlSetApprox | None]:
    """Build K and Q, estimating the control set once when either needs it."""
    if cfg.k_spec is None or cfg.q_spec is None:
        raise ConfigError("this command needs both sets.K and sets.Q in the config")
    approx = None
    if "from-controlset" in (cfg.k_spec["kind"], cfg.q_spec["kind"]):
        if not isinstance(cfg.system, LinearSystem):
            raise ConfigError("from-controlset sets require a linear system")
        d = cfg.disc
        approx = estimate_control_set(cfg.system, samples=int(d["samples"]),
                                      horizon=float(d["horizon"]), dt=float(d["dt"]),
                                      seed=int(d["seed"]))
    return (_build_set(cfg.k_spec, approx, "K"),
            _build_set(cfg.q_spec, approx, "Q"), approx)


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def make_report(command: str, cfg: RunConfig | None, result: dict,
                seed: int | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "invpress",
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "command": command,
        "seed": seed,
        "config": _jsonable(cfg.raw) if cfg is not None else None,
        "result": _jsonable(result),
    }


def _emit(report: dict, out_path: str | None, quiet: bool) -> None:
    text = json.dumps(report, sort_keys=True, indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    if not quiet:
        print(text)


def _write_series_csv(path: str, report: PressureReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "tau", "cover_size", "a_tau", "log_a_over_tau",
                         "slope_so_far"])
        for row in report.rows:
            writer.writerow([row.n, f"{row.tau:.12g}", row.cover_size,
                             f"{row.a_value:.17g}", f"{row.log_a_over_tau:.17g}",
                             f"{row.slope_so_far:.17g}"])


def _pressure_result(report: PressureReport) -> dict:
    return {
        "series": [dataclasses.asdict(r) for r in report.rows],
        "slope": report.slope,
        "slope_with_intercept": report.slope_with_intercept,
        "last_ratio": report.last_ratio,
        "tail_start": report.tail_start,
        "formula": report.formula_value,
        "lower_bound": dataclasses.asdict(report.lower) if report.lower else None,
        "equilibrium_upper": report.upper_value,
        "discretization": report.metadata,
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_formula(cfg: RunConfig, args) -> dict:
    sys_ = cfg.system
    if not isinstance(sys_, LinearSystem):
        raise ConfigError("the formula command requires a linear system")
    rank, controllable = kalman_rank(sys_.A, sys_.B)
    spectrum = eigen_decompose(sys_.A)
    hyperbolic = all(abs(ev.real) > 0 for ev, _ in spectrum.entries)
    try:
        hyperbolic_split(sys_.A)
    except InvpressError:
        hyperbolic = False
    zero_margin = sys_.U.interior_margin(np.zeros(sys_.input_dim))
    u_star, f_min = min_potential(cfg.potential, sys_.U)
    value = formula_pressure(sys_, cfg.potential)
    return {
        "eigenvalues": [{"re": ev.real, "im": ev.imag, "multiplicity": m}
                        for ev, m in spectrum.entries],
        "unstable_sum": unstable_sum(spectrum),
        "min_potential": {"arg": u_star, "value": f_min},
        "formula": value,
        "hypotheses": {
            "controllable": controllable,
            "kalman_rank": rank,
            "hyperbolic": hyperbolic,
            "zero_interior_margin": zero_margin,
        },
    }


def _bounds_candidates(cfg: RunConfig):
    d = cfg.disc
    base = build_candidates(cfg.system.U, int(d["u_levels"]), float(d["tau0"]),
                            float(d["delta"]), int(d["cap"]), int(d["seed"]))
    n = int(d["n_max"])
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(d["seed"]),
                                                       spawn_key=(n,)))
    return concat_candidates(base, n, int(d["cap"]), rng), n * float(d["tau0"])


def cmd_bounds(cfg: RunConfig, args) -> dict:
    k_set, q_set, _ = resolve_sets(cfg)
    d = cfg.disc
    result: dict = {}
    try:
        result["formula"] = formula_pressure(cfg.system, cfg.potential)
    except InvpressError as exc:
        result["formula"] = None
        result["formula_error"] = str(exc)
    candidates, tau = _bounds_candidates(cfg)
    pitch = d["pitch"] if d["pitch"] is not None else _default_pitch(k_set)
    try:
        lb = lower_bound(cfg.system, k_set, q_set, cfg.potential, tau, candidates,
                         float(d["dt"]), pitch=float(pitch),
                         use_projection=isinstance(cfg.system, LinearSystem))
        result["lower_bound"] = dataclasses.asdict(lb)
    except InvpressError as exc:
        result["lower_bound"] = None
        result["lower_bound_error"] = str(exc)
    try:
        sys_ = cfg.system
        u_star, _ = min_potential(cfg.potential, sys_.U)
        if isinstance(sys_, LinearSystem):
            x_star = np.linalg.solve(sys_.A, -sys_.B @ u_star)
        else:
            raise ConfigError("equilibrium bound needs explicit x0 for general systems")
        result["equilibrium_upper"] = equilibrium_upper_bound(
            sys_, x_star, u_star, cfg.potential)
        result["equilibrium_point"] = {"x0": x_star, "u0": u_star}
    except InvpressError as exc:
        result["equilibrium_upper"] = None
        result["equilibrium_upper_error"] = str(exc)
    return result


def _default_pitch(k_set: CompactSet) -> float:
    lo, hi = k_set.bounding_box()
    return float(np.max(hi - lo) / 20.0)


def cmd_estimate(cfg: RunConfig, args) -> tuple[dict, PressureReport]:
    k_set, q_set, approx = resolve_sets(cfg)
    d = cfg.disc
    pitch = d["pitch"] if d["pitch"] is not None else _default_pitch(k_set)
    common = dict(
        delta=float(d["delta"]), levels=int(d["u_levels"]), cap=int(d["cap"]),
        seed=int(d["seed"]), dt=float(d["dt"]), stride=int(d["stride"]),
        pitch=float(pitch), exact_threshold=int(d["exact_threshold"]),
        q_margin=float(d["q_margin"]), workers=args.threads,
    )
    report = estimate_pressure(cfg.system, k_set, q_set, cfg.potential,
                               float(d["tau0"]), int(d["n_max"]), **common)
    result = _pressure_result(report)
    if d["eps_ladder"]:
        outer = outer_pressure_series(
            cfg.system, k_set, q_set, cfg.potential,
            [float(e) for e in d["eps_ladder"]],
            tau0=float(d["tau0"]), n_max=int(d["n_max"]),
            with_bounds=False, **common)
        result["outer"] = [{"eps": eps, **_pressure_result(rep)}
                           for eps, rep in outer]
    if approx is not None:
        result["controlset"] = {
            "hull_vertices": approx.hull_vertices,
            "origin_margin": approx.origin_margin,
            "samples": approx.samples,
            "horizon": approx.horizon,
            "seed": approx.seed,
        }
    return result, report


def cmd_controlset(cfg: RunConfig, args) -> tuple[dict, ControlSetApprox]:
    if not isinstance(cfg.system, LinearSystem):
        raise ConfigError("the controlset command requires a linear system")
    d = cfg.disc
    samples = args.samples if args.samples is not None else int(d["samples"])
    horizon = args.horizon if args.horizon is not None else float(d["horizon"])
    seed = args.seed if args.seed is not None else int(d["seed"])
    approx = estimate_control_set(cfg.system, samples=samples, horizon=horizon,
                                  dt=float(d["dt"]), seed=seed)
    result = {
        "hull_vertices": approx.hull_vertices,
        "origin_margin": approx.origin_margin,
        "samples": approx.samples,
        "horizon": approx.horizon,
        "seed": approx.seed,
        "control_step": approx.control_step,
    }
    return result, approx


def _write_hull_csv(path: str, approx: ControlSetApprox) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(approx.dim)])
        for v in approx.hull_vertices:
            writer.writerow([f"{x:.17g}" for x in v])


def cmd_lyapunov(cfg: RunConfig, args) -> dict:
    if args.T is None or args.T <= 0:
        raise ConfigError("lyapunov requires a positive --T period")
    if args.control:
        rows = []
        with open(args.control, newline="") as fh:
            for row in csv.reader(fh):
                if row and not row[0].lstrip().startswith("#"):
                    rows.append([float(x) for x in row])
        if not rows:
            raise ConfigError(f"control file {args.control} holds no values")
        values = np.array(rows)
    else:
        values = np.zeros((1, cfg.system.input_dim))
    control = QuantizedControl(step=args.T / len(values), values=values)
    x0 = (np.array([float(x) for x in args.x0.split(",")]) if args.x0
          else np.zeros(cfg.system.dim))
    spectrum = floquet_exponents(cfg.system, x0, control, args.T,
                                 float(cfg.disc["dt"]))
    return {
        "period": args.T,
        "x0": x0,
        "spectrum": [{"rho": r, "multiplicity": m} for r, m in spectrum.entries],
        "grouping_tol": spectrum.grouping_tol,
    }


# ---------------------------------------------------------------------------
# the built-in verification scenario
# ---------------------------------------------------------------------------

#: desk-scale resolution of the built-in scenario; every number in the
#: acceptance table is produced at exactly these settings
VERIFY_RESOLUTION = {
    "delta": 0.25, "dt": 0.01, "u_levels": 3, "tau0": 0.25, "n_max": 8,
    "stride": 5, "cap": 8192, "exact_threshold": 20, "pitch": 0.05,
    "samples": 2000, "horizon": 8.0, "seed": 7, "shrink": 0.6,
}


def planar_example_system(u0: float = 0.0) -> tuple[LinearSystem, PotentialSpec]:
    """The built-in planar verification system with control range [-1,1]+u0."""
    control_range = ControlRange.box([-1.0 + u0], [1.0 + u0], u_ref=[u0])
    sys_ = LinearSystem(A=[[1.0, -1.0], [1.0, 1.0]], B=[[0.0], [1.0]], U=control_range)
    return sys_, PotentialSpec.norm_dist([u0], p=1)


def run_verify_example(u0: float = 0.0, full: bool = True,
                       workers: int = 1) -> dict:
    """Run the built-in scenario and return a pass/fail table per criterion.

    The quick rows (exact formula and equilibrium bound) always run; the
    full mode adds the control-set estimate, the pressure series with its
    bracket checks, the projected lower bound, and the Liouville and
    Floquet consistency rows.
    """
    res = VERIFY_RESOLUTION
    sys_, f = planar_example_system(u0)
    rows = []

    def row(name, value, target, passed):
        rows.append({"criterion": name, "value": _jsonable(value),
                     "target": target, "passed": bool(passed)})

    value = formula_pressure(sys_, f)
    row("formula_pressure", value, "2 within 1e-12", abs(value - 2.0) <= 1e-12)

    u_eq = np.array([u0])
    x_eq = np.linalg.solve(sys_.A, -sys_.B @ u_eq)
    upper = equilibrium_upper_bound(sys_, x_eq, u_eq, f)
    row("equilibrium_upper_bound", upper, "2 within 1e-9", abs(upper - 2.0) <= 1e-9)

    if not full:
        return {"u0": u0, "full": False, "criteria": rows,
                "passed": all(r["passed"] for r in rows)}

    w0 = QuantizedControl.constant([u0], step=1.0, n=1)
    spectrum = floquet_exponents(sys_, x_eq, w0, 1.0, 1e-3)
    flo_ok = (len(spectrum.entries) == 1
              and spectrum.entries[0][1] == 2
              and abs(spectrum.entries[0][0] - 1.0) <= 1e-6)
    row("floquet_at_equilibrium", spectrum.entries, "{(1, 2)} within 1e-6", flo_ok)

    liouville_ok = True
    worst = 0.0
    for tau in (0.5, 1.0, 3.0):
        control = QuantizedControl.constant([u0], step=tau, n=1)
        traj = integrate_trajectory(sys_, [0.05, 0.0], control, tau, 1e-3)
        gap = abs(np.log(integrate_variational(sys_, [0.05, 0.0], control, tau,
                                               1e-3).det)
                  - divergence_integral(sys_, traj))
        worst = max(worst, gap)
        liouville_ok &= gap <= 1e-5
    row("liouville_consistency", worst, "|log det - div integral| <= 1e-5",
        liouville_ok)

    approx = estimate_control_set(sys_, samples=res["samples"],
                                  horizon=res["horizon"], dt=res["dt"],
                                  seed=res["seed"])
    cs_ok = (np.all(np.isfinite(approx.hull_vertices))
             and approx.origin_margin > 0.0)
    row("controlset_geometry",
        {"origin_margin": approx.origin_margin,
         "vertices": len(approx.hull_vertices)},
        "bounded hull with 0 strictly inside", cs_ok)

    k_set = shrink_hull(approx, res["shrink"])
    q_set = approx.as_compact_set()
    report = estimate_pressure(
        sys_, k_set, q_set, f, res["tau0"], res["n_max"],
        delta=res["delta"], levels=res["u_levels"], cap=res["cap"],
        seed=res["seed"], dt=res["dt"], stride=res["stride"],
        pitch=res["pitch"], exact_threshold=res["exact_threshold"],
        workers=workers,
    )
    lb = report.lower
    lb_ok = lb is not None and lb.surviving >= 200 and \
        abs((lb.value - lb.beta / lb.tau) - 2.0) <= 0.05
    row("lower_bound_projected",
        None if lb is None else dataclasses.asdict(lb),
        "value - beta/tau in [1.95, 2.05], >= 200 surviving pairs", lb_ok)

    lo_edge = (lb.value if lb is not None else 2.0) - 0.1
    hi_edge = (report.formula_value if report.formula_value is not None else 2.0) + 0.7
    slope_ok = lo_edge <= report.slope <= hi_edge
    row("estimate_slope",
        {"slope": report.slope, "last_ratio": report.last_ratio,
         "slope_with_intercept": report.slope_with_intercept},
        f"slope in [{lo_edge:.3f}, {hi_edge:.3f}]", slope_ok)

    return {
        "u0": u0,
        "full": True,
        "resolution": dict(res),
        "criteria": rows,
        "passed": all(r["passed"] for r in rows),
        "series": [dataclasses.asdict(r) for r in report.rows],
    }


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invpress",
        description="Invariance pressure toolkit: exact spectral formula, "
                    "certified bounds, and spanning-set estimation.",
        epilog="Discretization defaults: dt=0.01, delta=0.25, u_levels=3, "
               "tau0=delta, n_max=8, stride=5, exact_threshold=20, cap=8192, "
               "seed=0, samples=2000, horizon=8.0, q_margin=0.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("config", help="path to a TOML config file")
        p.add_argument("--out", default=None, help="write the JSON report here")
        p.add_argument("--csv", default=None, help="write the series CSV here")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel workers for coverage rows")
        p.add_argument("--quiet", action="store_true", help="suppress stdout report")

    common(sub.add_parser("formula", help="closed-form pressure of a linear system"))
    common(sub.add_parser("bounds", help="lower bound, formula, equilibrium upper bound"))
    common(sub.add_parser("estimate", help="brute-force pressure series"))
    p_cs = sub.add_parser("controlset", help="Monte Carlo control-set polytope")
    common(p_cs)
    p_cs.add_argument("--samples", type=int, default=None)
    p_cs.add_argument("--horizon", type=float, default=None)
    p_ly = sub.add_parser("lyapunov", help="Floquet exponents of a periodic pair")
    common(p_ly)
    p_ly.add_argument("--T", type=float, required=True, help="period")
    p_ly.add_argument("--control", default=None,
                      help="CSV of control values, one row per step")
    p_ly.add_argument("--x0", default=None, help="comma-separated initial state")
    p_ve = sub.add_parser("verify", help="run the built-in verification scenario")
    common(p_ve, needs_config=False)
    p_ve.add_argument("--u0", type=float, default=0.0)
    p_ve.add_argument("--quick", action="store_true",
                      help="only the exact-formula rows")
    return parser


def _load_config(args) -> RunConfig:
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg = parse_config(text)
    if args.seed is not None:
        cfg.disc["seed"] = args.seed
        cfg.raw["discretization"]["seed"] = args.seed
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            report_body = run_verify_example(u0=args.u0, full=not args.quick,
                                             workers=args.threads)
            report = make_report("verify", None, report_body)
            _emit(report, args.out, args.quiet)
            if not args.quiet:
                for row in report_body["criteria"]:
                    status = "PASS" if row["passed"] else "FAIL"
                    print(f"{status}  {row['criterion']}: target {row['target']}")
            return 0 if report_body["passed"] else 1

        cfg = _load_config(args)
        seed = cfg.disc["seed"]
        if args.command == "formula":
            result = cmd_formula(cfg, args)
            _emit(make_report("formula", cfg, result, seed), args.out, args.quiet)
        elif args.command == "bounds":
            result = cmd_bounds(cfg, args)
            _emit(make_report("bounds", cfg, result, seed), args.out, args.quiet)
        elif args.command == "estimate":
            result, pressure_report = cmd_estimate(cfg, args)
            csv_path = args.csv or cfg.output.get("csv")
            if csv_path:
                _write_series_csv(csv_path, pressure_report)
            out_path = args.out or cfg.output.get("report")
            _emit(make_report("estimate", cfg, result, seed), out_path, args.quiet)
        elif args.command == "controlset":
            result, approx = cmd_controlset(cfg, args)
            if args.out:
                _write_hull_csv(args.out, approx)
                if not args.quiet:
                    print(f"wrote {len(approx.hull_vertices)} hull vertices to {args.out}")
            elif not args.quiet:
                _emit(make_report("controlset", cfg, result, seed), None, args.quiet)
        elif args.command == "lyapunov":
            result = cmd_lyapunov(cfg, args)
            if not args.quiet:
                print("rho,multiplicity")
                for entry in result["spectrum"]:
                    print(f"{entry['rho']:.12g},{entry['multiplicity']}")
            if args.out:
                with open(args.out, "w") as fh:
                    json.dump(make_report("lyapunov", cfg, result, seed), fh,
                              sort_keys=True, indent=2)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    except NotAdmissibleError as exc:
        print(f"not admissible: {exc}", file=_sys.stderr)
        return 3
    except PreconditionError as exc:
        print(f"theorem precondition failed: {exc}", file=_sys.stderr)
        return 4
    except InvpressError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
