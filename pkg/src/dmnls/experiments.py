"""Dyadic eps sweeps, log-log rate fits and study reports."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import __version__
from .dispersion_map import named_map, gamma_deviation_sup, one_period_extremum, validate_admissible
from .errors import AbortedRunError, AdmissibilityError, ConfigError, InvalidParameterError, StudyFailure
from .evolution import evolve, orbit_trajectory
from .ground_state import DEFAULT_TOL, petviashvili_solve
from .io import config_hash, load_ground_state, parse_config_text, parse_eps_list
from .norms import trajectory_difference_norm
from .propagators import AdmissiblePair, filtered_data, propagator_difference_norm
from .spectral_grid import SpectralGrid

log = logging.getLogger(__name__)

STUDIES = ("gamma", "propagator", "averaging", "order")
ZERO_FLOOR = 1e-14


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class ExperimentConfig:
    study: str
    segments: tuple = ((1.0, 1.0),)
    map_name: str = "custom"
    dim: int = 1
    n: int = 512
    box: float = 20.0
    eps: tuple = ()
    a: float | None = None
    T: float | None = None
    t_cap: float = 16.0
    dt: float | None = None
    dt_max: float = 1e-2
    dt_eps_fraction: float = 0.25
    stride: int | None = None
    s: float = 0.5
    q: float = 10 / 3
    r: float = 10 / 3
    pair_dim: int = 3
    theta: float = 0.5
    seed: str = "gaussian"
    samples: int = 16
    n_t: int | None = None
    tol: float | None = None
    ground_state: str | None = None
    direction: str = "forward"
    linear: bool = False
    dt0: float = 0.1
    t1: float = 1.0
    r2_min: float | None = None
    record_runtime: bool = False
    workers: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError("study", f"must be one of {', '.join(STUDIES)}, got {self.study!r}")
        if self.study != "order":
            if len(self.eps) < 3:
                raise ConfigError("eps", "need at least 3 eps values for rate fitting")
            for e in self.eps:
                if not 0 < e < 1:
                    raise ConfigError("eps", f"eps must be in (0,1), got {e!r}")
            if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
                raise ConfigError("eps", "eps list must be strictly decreasing")
        if self.study == "averaging" and self.horizon_a * math.log(1 / min(self.eps)) > self.t_cap:
            raise ConfigError("a", f"a*log(1/eps_min) exceeds t_cap = {self.t_cap}")
        if self.direction not in ("forward", "backward"):
            raise ConfigError("direction", "must be forward or backward")
        try:
            self.dispersion_map()
        except AdmissibilityError as exc:
            raise ConfigError("segment", str(exc)) from None
        try:
            self.grid()
        except InvalidParameterError as exc:
            raise ConfigError("n", str(exc)) from None

    @property
    def horizon_a(self):
        if self.a is not None:
            return self.a
        return 1.0 if self.dim == 1 else 0.5

    def dispersion_map(self):
        return validate_admissible(self.segments, name=self.map_name)

    def grid(self):
        return SpectralGrid(self.dim, self.n, self.box)

    def dt_for(self, eps):
        if self.dt is not None:
            return self.dt
        return min(self.dt_max, eps * self.dt_eps_fraction)

    def canonical(self):
        d = asdict(self)
        d["segments"] = [list(s) for s in self.segments]
        d["eps"] = list(self.eps)
        return d

    def hash(self):
        return config_hash(self.canonical())


_FLOAT_KEYS = {"box", "a", "T", "t_cap", "dt", "dt_max", "dt_eps_fraction", "s", "q", "r", "theta",
               "tol", "dt0", "t1", "r2_min"}
_INT_KEYS = {"dim", "n", "stride", "samples", "n_t", "workers", "pair_dim"}
_BOOL_KEYS = {"linear", "record_runtime"}
_STR_KEYS = {"study", "seed", "ground_state", "direction", "out_dir"}
# keys arrive lower-cased
_ALIASES = {"output": "out_dir", "output_dir": "out_dir", "l": "box", "d": "dim", "t": "T", "horizon": "T"}


def _to_bool(key, v):
    lv = v.lower()
    if lv in ("1", "true", "yes", "on"):
        return True
    if lv in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {v!r}")


def _parse_q(v):
    return math.inf if v.lower() in ("inf", "infinity") else float(v)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from parsed ``key = value`` strings, reporting the offending key on error."""
    kw = {}
    for key, value in raw.items():
        key = _ALIASES.get(key, key)
        try:
            if key == "segment":
                kw["segments"] = tuple(tuple(s) for s in value)
            elif key == "map":
                try:
                    dmap = named_map(value)
                except KeyError as exc:
                    raise ConfigError("map", exc.args[0]) from None
                kw["segments"] = tuple(dmap.segments())
                kw["map_name"] = dmap.name
            elif key == "eps":
                kw["eps"] = tuple(parse_eps_list(value))
            elif key == "q":
                kw["q"] = _parse_q(value)
            elif key in _FLOAT_KEYS:
                kw[key] = float(value)
            elif key in _INT_KEYS:
                kw[key] = int(value)
            elif key in _BOOL_KEYS:
                kw[key] = _to_bool(key, value)
            elif key in _STR_KEYS:
                kw[key] = value
            else:
                raise ConfigError(key, "unknown key")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(key, f"cannot parse {value!r}") from None
    if "study" not in kw:
        raise ConfigError("study", "missing")
    if "segments" in kw and "map_name" not in kw:
        kw["map_name"] = "custom"
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def load_config(path):
    with open(path) as fh:
        return config_from_dict(parse_config_text(fh.read()))


# ---------------------------------------------------------------- fitting

def fit_rate(eps, err):
    """OLS of ``log err`` on ``log eps``: returns ``(slope, intercept, r2)``."""
    eps = np.asarray(eps, dtype=float)
    err = np.asarray(err, dtype=float)
    if eps.shape != err.shape or eps.size < 3:
        raise InvalidParameterError("fit needs two equal-length lists with at least 3 entries")
    for i, (e, v) in enumerate(zip(eps, err)):
        if not (e > 0 and v > 0):
            raise InvalidParameterError(f"row {i}: nonpositive value (eps={e!r}, error={v!r})")
    x, y = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), float(r2)


def jackknife_spread(eps, err):
    """Max absolute slope change when any single row is dropped (needs >= 4 rows)."""
    if len(eps) < 4:
        return None
    full, _, _ = fit_rate(eps, err)
    out = 0.0
    for i in range(len(eps)):
        e = [v for j, v in enumerate(eps) if j != i]
        r = [v for j, v in enumerate(err) if j != i]
        out = max(out, abs(fit_rate(e, r)[0] - full))
    return out


# ---------------------------------------------------------------- reports

@dataclass
class ConvergenceReport:
    study: str
    rows: list
    slope: float | None = None
    intercept: float | None = None
    r2: float | None = None
    jackknife: float | None = None
    status: str = "ok"
    gates: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    version: str = __version__

    @property
    def passed(self):
        return all(self.gates.values())

    @property
    def any_aborted(self):
        return any(r["status"] == "aborted" for r in self.rows)

    def csv_rows(self, record_runtime=False):
        out = []
        for r in self.rows:
            r = dict(r)
            if not record_runtime:
                r["runtime_s"] = None
            out.append(r)
        return out

    def to_json(self):
        return {
            "study": self.study,
            "rows": self.rows,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "jackknife_spread": self.jackknife,
            "status": self.status,
            "gates": self.gates,
            "passed": self.passed,
            "extra": self.extra,
            "config": self.config,
            "version": self.version,
        }


def _row(study, eps, error, T_eps=None, dt=None, slope_floor=None, mass_drift=None, tail_frac=None,
         runtime=None, status="ok"):
    return {"study": study, "eps": eps, "T_eps": T_eps, "dt": dt, "error": error, "slope_floor": slope_floor,
            "mass_drift": mass_drift, "tail_frac": tail_frac, "runtime_s": runtime, "status": status}


def _finish(report, eps, err, degenerate=False):
    """Attach fit, R^2 and jackknife spread; mark degenerate sweeps."""
    if degenerate or all(e <= ZERO_FLOOR for e in err):
        report.status = "degenerate: zero error"
        return report
    if len(eps) >= 3 and all(e > 0 for e in err):
        report.slope, report.intercept, report.r2 = fit_rate(eps, err)
        report.jackknife = jackknife_spread(eps, err)
    else:
        report.status = "insufficient valid rows"
    return report


def _nonincreasing(err, rel=1e-12):
    return all(b <= a * (1 + rel) + ZERO_FLOOR for a, b in zip(err, err[1:]))


def _strictly_decreasing(err):
    return all(b < a for a, b in zip(err, err[1:]))


def _map_rows(fn, items, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# ---------------------------------------------------------------- studies

def _gamma_row(args):
    dmap, eps, T, samples = args
    t0 = time.perf_counter()
    dev = gamma_deviation_sup(dmap, eps, T, samples)
    return _row("gamma", eps, dev, T_eps=T, runtime=time.perf_counter() - t0)


def gamma_study(cfg: ExperimentConfig) -> ConvergenceReport:
    """Sup deviation ``|Gamma_eps(t,0) - t|`` on ``[0, T]`` per eps; slope should be 1."""
    dmap = cfg.dispersion_map()
    T = 10.0 if cfg.T is None else cfg.T
    rows = _map_rows(_gamma_row, [(dmap, e, T, cfg.samples) for e in cfg.eps], cfg.workers)
    eps = [r["eps"] for r in rows]
    err = [r["error"] for r in rows]
    report = ConvergenceReport("gamma", rows, config=cfg.canonical())
    const = one_period_extremum(dmap)
    report.extra = {"one_period_extremum": const, "measured_constants": [v / e for e, v in zip(eps, err)]}
    _finish(report, eps, err, degenerate=dmap.is_unit)
    if report.status.startswith("degenerate"):
        report.gates = {"zero_error": all(v == 0 for v in err)}
        return report
    report.gates = {
        "slope": abs(report.slope - 1.0) <= 0.005,
        "r2": report.r2 >= 0.999,
        "constant": all(abs(v / e - const) <= 1e-9 for e, v in zip(eps, err)),
        "monotone": _nonincreasing(err),
    }
    return report


def _propagator_row(args):
    phi, dmap, eps, pair, T, n_t, floor = args
    t0 = time.perf_counter()
    err = propagator_difference_norm(phi, dmap, eps, pair, T, n_t)
    return _row("propagator", eps, err, T_eps=T, slope_floor=floor, runtime=time.perf_counter() - t0)


def propagator_study(cfg: ExperimentConfig) -> ConvergenceReport:
    """Space-time size of the propagator difference on filtered Gaussian data."""
    dmap = cfg.dispersion_map()
    pair = AdmissiblePair(cfg.q, cfg.r, cfg.pair_dim)
    grid = cfg.grid()
    phi = filtered_data(grid, cfg.theta, cfg.seed)
    T = 1.0 if cfg.T is None else cfg.T
    floor = pair.predicted_rate(cfg.theta)
    rows = _map_rows(_propagator_row, [(phi, dmap, e, pair, T, cfg.n_t, floor) for e in cfg.eps], cfg.workers)
    eps = [r["eps"] for r in rows]
    err = [r["error"] for r in rows]
    report = ConvergenceReport("propagator", rows, config=cfg.canonical())
    report.extra = {"predicted_floor": floor, "pair": [pair.q, pair.r], "pair_dim": pair.d,
                    "nominal_pair": pair.d != grid.d}
    _finish(report, eps, err, degenerate=dmap.is_unit)
    if report.status.startswith("degenerate"):
        report.gates = {"zero_error": all(v <= ZERO_FLOOR for v in err)}
        return report
    report.gates = {
        "strictly_decreasing": _strictly_decreasing(err),
        "slope": report.slope >= 0.9 * floor,
        "r2": report.r2 >= (0.9 if cfg.r2_min is None else cfg.r2_min),
    }
    return report


@lru_cache(maxsize=4)
def _solved_ground_state(d, n, L, tol):
    return petviashvili_solve(SpectralGrid(d, n, L), tol)


def ground_state_for(cfg: ExperimentConfig):
    if cfg.ground_state:
        Q = load_ground_state(cfg.ground_state)
        if Q.grid != cfg.grid():
            raise ConfigError("ground_state", f"stored profile grid {Q.grid} differs from configured grid")
        return Q
    tol = DEFAULT_TOL[cfg.dim] if cfg.tol is None else cfg.tol
    return _solved_ground_state(cfg.dim, cfg.n, cfg.box, tol)


def _averaging_row(args):
    Q, dmap, eps, T, dt, stride, s, backward = args
    t0 = time.perf_counter()
    end = -T if backward else T
    try:
        traj = evolve(Q.profile, (0.0, end), dt, dmap, eps, stride)
    except AbortedRunError as exc:
        log.warning("eps=%g aborted: %s", eps, exc)
        return _row("averaging", eps, None, T_eps=T, dt=dt, runtime=time.perf_counter() - t0, status="aborted")
    err = trajectory_difference_norm(traj, orbit_trajectory(Q, traj.times), s)
    return _row("averaging", eps, err, T_eps=T, dt=dt, mass_drift=traj.mass_drift,
                tail_frac=float(traj.tail_fractions.max()), runtime=time.perf_counter() - t0)


def averaging_study(cfg: ExperimentConfig, Q=None) -> ConvergenceReport:
    """``S^s`` distance between ``u_eps`` (data Q) and ``exp(it)Q`` on ``[0, a log(1/eps)]``."""
    dmap = cfg.dispersion_map()
    if Q is None:
        Q = ground_state_for(cfg)
    a = cfg.horizon_a
    stride = 1 if cfg.stride is None else cfg.stride
    items = [(Q, dmap, e, a * math.log(1 / e), cfg.dt_for(e), stride, cfg.s, cfg.direction == "backward")
             for e in cfg.eps]
    rows = _map_rows(_averaging_row, items, cfg.workers)
    report = ConvergenceReport("averaging", rows, config=cfg.canonical())
    good = [r for r in rows if r["status"] == "ok"]
    if not good:
        raise StudyFailure("every averaging run aborted")
    eps = [r["eps"] for r in good]
    err = [r["error"] for r in good]
    report.extra = {"a": a, "ground_state_residual": Q.residual, "ground_state_mass": Q.mass,
                    "max_mass_drift": max(r["mass_drift"] for r in good)}
    _finish(report, eps, err, degenerate=dmap.is_unit)
    if report.status.startswith("degenerate"):
        report.gates = {"completed": len(good) == len(rows)}
        return report
    if len(good) < 3:
        report.gates = {"completed": False}
        return report
    r2_min = 0.9 if cfg.r2_min is None else cfg.r2_min
    report.gates = {
        "completed": len(good) == len(rows),
        "nonincreasing": _nonincreasing(err),
        "b_positive": report.slope > 0,
        "r2": report.r2 >= r2_min,
        "quarter": err[-1] <= 0.25 * err[0],
        "mass_drift": report.extra["max_mass_drift"] <= 1e-10,
    }
    return report


def order_study(cfg: ExperimentConfig) -> ConvergenceReport:
    """Strang self-convergence for constant dispersion against a dt/16 reference."""
    if not cfg.dispersion_map().is_unit:
        raise ConfigError("segment", "order study needs the unit dispersion map")
    grid = cfg.grid()
    Q = ground_state_for(cfg)
    u0 = Q.profile
    dts = [cfg.dt0, cfg.dt0 / 2, cfg.dt0 / 4]
    ref = evolve(u0, (0.0, cfg.t1), cfg.dt0 / 16, None, 1.0, 10**9, nonlinear=not cfg.linear)
    rows = []
    for dt in dts:
        t0 = time.perf_counter()
        run = evolve(u0, (0.0, cfg.t1), dt, None, 1.0, 10**9, nonlinear=not cfg.linear)
        err = float(np.sqrt(np.sum(np.abs(run.values[-1] - ref.values[-1]) ** 2) * grid.cell_volume))
        rows.append(_row("order", 1.0, err, T_eps=cfg.t1, dt=dt, slope_floor=2.0, mass_drift=run.mass_drift,
                         runtime=time.perf_counter() - t0))
    report = ConvergenceReport("order", rows, config=cfg.canonical())
    err = [r["error"] for r in rows]
    if cfg.linear or all(e <= 1e-12 for e in err):
        report.status = "degenerate: exact substep"
        report.gates = {"exact": all(e <= 1e-12 for e in err)}
        return report
    report.slope, report.intercept, report.r2 = fit_rate(dts, err)
    monotone = _strictly_decreasing(err)
    if not monotone:
        report.status = "warning: non-asymptotic (error not monotone in dt)"
    report.extra = {"order": report.slope}
    report.gates = {"order": 1.9 <= report.slope <= 2.1, "monotone": monotone}
    return report


def run_study(cfg: ExperimentConfig) -> ConvergenceReport:
    return {"gamma": gamma_study, "propagator": propagator_study, "averaging": averaging_study,
            "order": order_study}[cfg.study](cfg)


__all__ = [
    "ExperimentConfig",
    "ConvergenceReport",
    "config_from_dict",
    "load_config",
    "fit_rate",
    "jackknife_spread",
    "gamma_study",
    "propagator_study",
    "averaging_study",
    "order_study",
    "run_study",
    "ground_state_for",
]
