"""Acceptance criteria at their stated tolerances; one summary line each.

Criteria that cannot be met on the prescribed grids are still run as stated
and left failing; the supplementary tests at the bottom measure why.
"""

import math
import time

import numpy as np
import pytest

from dmnls.dispersion_map import TWO_PIECE
from dmnls.evolution import Trajectory, decomposition_diagnostics, default_dt, duhamel_residual, evolve
from dmnls.experiments import ExperimentConfig, averaging_study, gamma_study, order_study, propagator_study
from dmnls.ground_state import certify_identities, petviashvili_solve, soliton_orbit
from dmnls.io import csv_text
from dmnls.spectral_grid import SpectralGrid

from oracles import sech_profile

pytestmark = pytest.mark.slow

TWO = {"segments": ((0.5, 3.0), (0.5, -1.0)), "map_name": "two-piece"}


def dyadic(k0, k1):
    return tuple(2.0**-k for k in range(k0, k1 + 1))


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


CONFIGS = {
    "gamma": ExperimentConfig("gamma", eps=dyadic(2, 10), T=10.0, **TWO),
    "propagator_1d": ExperimentConfig("propagator", eps=dyadic(2, 8), T=1.0, theta=0.5, **TWO),
    "propagator_3d": ExperimentConfig("propagator", dim=3, n=32, box=12.0, eps=dyadic(2, 8), T=1.0, theta=0.5, **TWO),
    "averaging_3d": ExperimentConfig("averaging", dim=3, n=32, box=12.0, eps=dyadic(2, 6), a=0.5, **TWO),
    "averaging_1d": ExperimentConfig("averaging", dim=1, n=512, box=20.0, eps=dyadic(2, 8), a=1.0, r2_min=0.95, **TWO),
}
RUNNERS = {"gamma": gamma_study, "propagator": propagator_study, "averaging": averaging_study}


@pytest.fixture(scope="module")
def studies():
    """First run of each configured study, kept for the determinism rerun."""
    cache = {}

    def get(key):
        if key not in cache:
            cfg = CONFIGS[key]
            cache[key] = timed(RUNNERS[cfg.study], cfg)
        return cache[key]

    return get


def _fmt_fit(rep):
    return f"slope={rep.slope:.4f} R2={rep.r2:.4f}" if rep.slope is not None else f"status={rep.status}"


# ---------------------------------------------------------------- 1

def test_criterion_1_gamma_deviation_law(studies, criterion):
    rep, runtime = studies("gamma")
    consts = rep.extra["measured_constants"]
    ok = (abs(rep.slope - 1.0) <= 0.005 and rep.r2 >= 0.999
          and max(abs(c - 1.0) for c in consts) <= 1e-9 and runtime < 1.0)
    criterion("1 (Gamma deviation)", ok,
              f"{_fmt_fit(rep)} max|C-1|={max(abs(c - 1.0) for c in consts):.1e} runtime={runtime:.2f}s")
    assert ok


# ---------------------------------------------------------------- 2

@pytest.fixture(scope="module")
def ground_state_budget():
    return {}


def test_criterion_2a_ground_state_1d(criterion, ground_state_budget):
    grid = SpectralGrid(1, 1024, 20.0)
    Q, runtime = timed(petviashvili_solve, grid, 1e-10)
    ground_state_budget["1d"] = runtime
    err = float(np.max(np.abs(Q.profile.values - sech_profile(grid.x))))
    r1, r2 = certify_identities(Q)
    ok = err <= 1e-8 and r1 <= 1e-8 and r2 <= 1e-8
    criterion("2a (ground state d=1)", ok, f"Linf vs sqrt2 sech={err:.1e} r1={r1:.1e} r2={r2:.1e} runtime={runtime:.2f}s")
    assert ok


def test_criterion_2b_ground_state_3d(criterion, ground_state_budget, radial3d):
    Q, runtime = timed(petviashvili_solve, SpectralGrid(3, 48, 12.0), 1e-8)
    total = runtime + ground_state_budget.get("1d", 0.0)
    oracle_mass = radial3d[3]
    rel = abs(Q.mass - oracle_mass) / oracle_mass
    r1, r2 = certify_identities(Q)
    ok = rel <= 1e-4 and r1 <= 1e-6 and r2 <= 1e-6 and total < 60
    criterion("2b (ground state d=3, N=48, L=12)", ok,
              f"mass={Q.mass:.6f} oracle={oracle_mass:.6f} rel={rel:.1e} r1={r1:.1e} r2={r2:.1e} "
              f"runtime(total)={total:.1f}s")
    assert ok


# ---------------------------------------------------------------- 3

@pytest.mark.parametrize("key,budget", [("propagator_1d", 30.0), ("propagator_3d", 300.0)])
def test_criterion_3_propagator_convergence(studies, criterion, key, budget):
    rep, runtime = studies(key)
    err = [r["error"] for r in rep.rows]
    decreasing = all(b < a for a, b in zip(err, err[1:]))
    ok = decreasing and rep.slope >= 0.09 and rep.r2 >= 0.9 and runtime < budget
    criterion(f"3 (propagator d={CONFIGS[key].dim})", ok,
              f"{_fmt_fit(rep)} strictly_decreasing={decreasing} floor=0.1 runtime={runtime:.1f}s")
    assert ok


# ---------------------------------------------------------------- 4

@pytest.fixture(scope="module")
def soliton_1d():
    return petviashvili_solve(SpectralGrid(1, 512, 20.0), 1e-10)


@pytest.fixture(scope="module")
def integrator_budget():
    return {"runtime": 0.0, "drifts": []}


def test_criterion_4a_mass_and_order(criterion, integrator_budget):
    rep, runtime = timed(order_study, ExperimentConfig("order", dt0=0.1, t1=1.0, segments=((1.0, 1.0),),
                                                       map_name="unit"))
    integrator_budget["runtime"] += runtime
    drift = max(r["mass_drift"] for r in rep.rows)
    integrator_budget["drifts"].append(drift)
    ok = 1.9 <= rep.slope <= 2.1 and drift <= 1e-10
    criterion("4a (Strang order, mass)", ok, f"order={rep.slope:.4f} mass_drift={drift:.1e}")
    assert ok


def test_criterion_4b_soliton_orbit_fidelity(criterion, soliton_1d, integrator_budget):
    run, runtime = timed(evolve, soliton_1d.profile, (0.0, 10.0), 1e-3, None, 1.0, 10)
    integrator_budget["runtime"] += runtime
    integrator_budget["drifts"].append(run.mass_drift)
    integrator_budget["run"] = run
    err = max((run.field(k) - soliton_orbit(soliton_1d, t)).l2_norm() for k, t in enumerate(run.times))
    ok = err <= 1e-5 and run.mass_drift <= 1e-10
    criterion("4b (soliton orbit d=1, [0,10], dt=1e-3)", ok,
              f"max L2 error={err:.3e} (target 1e-5) mass_drift={run.mass_drift:.1e}")
    assert ok


def test_criterion_4c_duhamel_residual(criterion, soliton_1d, integrator_budget):
    run = integrator_budget.get("run") or evolve(soliton_1d.profile, (0.0, 10.0), 1e-3, None, 1.0, 10)
    t0 = time.perf_counter()
    n = len(run)
    fine = duhamel_residual(run)
    coarse = duhamel_residual(run, n_quad=(n - 1) // 2 + 1)
    integrator_budget["runtime"] += time.perf_counter() - t0
    total = integrator_budget["runtime"]
    ok = fine <= 1e-4 and fine <= 0.5 * coarse and max(integrator_budget["drifts"]) <= 1e-10 and total < 120
    criterion("4c (Duhamel residual)", ok,
              f"residual={fine:.2e} at {n} nodes, {coarse:.2e} at half density (ratio {coarse / fine:.2f}) "
              f"runtime(4 total)={total:.1f}s")
    assert ok


# ---------------------------------------------------------------- 5

def _averaging_line(rep, runtime):
    err = [r["error"] for r in rep.rows]
    ratio = err[-1] / err[0] if err[0] else float("nan")
    return (f"b={rep.slope:.4f} R2={rep.r2:.4f} last/first={ratio:.3f} gates="
            + ",".join(k for k, v in rep.gates.items() if not v) + f"{'' if rep.passed else ' failed'}"
            + f" runtime={runtime:.1f}s")


def test_criterion_5a_averaging_3d(studies, criterion):
    rep, runtime = studies("averaging_3d")
    ok = rep.passed and runtime <= 20 * 60
    criterion("5a (averaging d=3, N=32, L=12, a=0.5)", ok, _averaging_line(rep, runtime))
    assert ok


def test_criterion_5b_averaging_1d(studies, criterion):
    rep, runtime = studies("averaging_1d")
    ok = rep.passed and rep.r2 >= 0.95 and runtime < 180
    criterion("5b (averaging d=1, CI gate)", ok, _averaging_line(rep, runtime))
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_decomposition_consistency(criterion, soliton_1d):
    eps = 2.0**-4
    T = math.log(1 / eps)
    dt = default_dt(eps)
    u_eps = evolve(soliton_1d.profile, (0.0, T), dt, TWO_PIECE, eps, 1)
    u_ref = evolve(soliton_1d.profile, (0.0, T), dt, None, 1.0, 1)
    t_end = u_eps.times[-1]
    fine = decomposition_diagnostics(u_eps, u_ref, 0.0, t_end, TWO_PIECE, eps)
    idx = np.arange(0, len(u_eps), 2)
    if idx[-1] != len(u_eps) - 1:
        idx = idx[:-1]
        t_end = u_eps.times[idx[-1]]
        fine = decomposition_diagnostics(u_eps, u_ref, 0.0, t_end, TWO_PIECE, eps)
    sub = [Trajectory(t.grid, t.times[idx], t.values[idx], t.dt, t.eps, t.map_name, t.nonlinear, 2) for t in (u_eps, u_ref)]
    coarse = decomposition_diagnostics(sub[0], sub[1], 0.0, t_end, TWO_PIECE, eps)
    ok = fine.transported == 0.0 and fine.mismatch <= 1e-3 and fine.mismatch < coarse.mismatch
    criterion("6 (four-term decomposition)", ok,
              f"mismatch={fine.mismatch:.2e} (half density {coarse.mismatch:.2e}) term1={fine.transported} "
              f"terms=({', '.join(f'{v:.3e}' for v in fine.as_tuple())}) direct={fine.direct:.3e}")
    assert ok


# ---------------------------------------------------------------- 7

def test_criterion_7_determinism(studies, criterion):
    same = {}
    for key in ("gamma", "propagator_1d", "propagator_3d", "averaging_1d", "averaging_3d"):
        first, _ = studies(key)
        again = RUNNERS[CONFIGS[key].study](CONFIGS[key])
        same[key] = csv_text(first.csv_rows()).encode() == csv_text(again.csv_rows()).encode()
    ok = all(same.values())
    criterion("7 (byte-identical CSV reruns)", ok, " ".join(f"{k}={'same' if v else 'DIFF'}" for k, v in same.items()))
    assert ok


# ---------------------------------------------------------------- supplementary

def test_supplementary_3d_soliton_orbit_is_unstable_on_coarse_grid():
    """The discrete orbit grows away from exp(it)Q at rate ~5 per unit time on N=32, L=12."""
    Q = petviashvili_solve(SpectralGrid(3, 32, 12.0), 1e-8)
    run = evolve(Q.profile, (0.0, 1.5), 1e-3, None, 1.0, 100)
    err = np.array([(run.field(k) - soliton_orbit(Q, t)).l2_norm() for k, t in enumerate(run.times)])
    late = run.times >= 0.5
    rate = np.polyfit(run.times[late], np.log(err[late]), 1)[0]
    # an eps^b bound over a*log(1/eps) survives exp(rate*T) growth only when a*rate < 1
    assert rate > 2.0
    assert 0.5 * rate > 1.0


def test_supplementary_soliton_fidelity_reaches_target_at_smaller_step(soliton_1d):
    run = evolve(soliton_1d.profile, (0.0, 10.0), 2.5e-4, None, 1.0, 400)
    err = max((run.field(k) - soliton_orbit(soliton_1d, t)).l2_norm() for k, t in enumerate(run.times))
    assert err <= 1e-5
