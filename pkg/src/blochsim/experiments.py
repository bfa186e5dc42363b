"""Scenario presets, ensemble averaging, and observable analysis.

A scenario bundles a model, an initial state, a propagation plan, and the
analysis grid.  The named presets reproduce the headline oscillation,
revival, and breakdown regimes at desk scale; each one is addressable from
the CLI and immutable (preset accessors return fresh copies).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import analysis as obs
from .adiabatic import frame_times, instantaneous_frame
from .core import StateVector
from .errors import ConfigError, TruncationError
from .models import (
    Disorder,
    DrivenHOSpec,
    LZGridSpec,
    SingleBandSpec,
    build_model,
    initial_state,
)
from .propagate import PropagationPlan, Trajectory, propagate, validate_step

TAIL_GUARD_LEVELS = 50
TAIL_MASS_TOL = 1e-12
DEFAULT_STEPS_PER_PERIOD = 2000
DEFAULT_FRAMES_PER_PERIOD = 200
DEFAULT_PROBE_FRACTION = 20

TWO_PI = 2 * math.pi


# --- config handling -------------------------------------------------------

def model_spec_from_config(cfg: dict, seed_override: Optional[int] = None):
    d = dict(cfg)
    kind = d.pop("kind")
    dis = d.pop("disorder", None)
    disorder = None
    if dis is not None:
        seed = seed_override if seed_override is not None else dis.get("seed", 0)
        disorder = Disorder(std_dev=dis["std_dev"], seed=int(seed))
    if kind == "single_band":
        return SingleBandSpec(J=d["J"], omega=d["omega"], n_sites=int(d["n_sites"]),
                              disorder=disorder)
    if kind == "driven_ho":
        return DrivenHOSpec(omega=d["omega"], J=d["J"], Omega=d["Omega"],
                            n_fock=int(d["n_fock"]), disorder=disorder)
    if kind == "lz_grid":
        if disorder is not None:
            raise ConfigError("disorder is not supported for the LZ grid model")
        return LZGridSpec(omega=d["omega"], lam=d["lambda"], J=d["J"],
                          n_levels=int(d["n_levels"]))
    raise ConfigError(f"unknown model kind '{kind}'")


def resolve_config(cfg: dict) -> dict:
    """Fill defaults; returns a new dict (input untouched)."""
    cfg = copy.deepcopy(cfg)
    for key in ("name", "model", "initial_state", "time"):
        if key not in cfg:
            raise ConfigError(f"config missing required key '{key}'")
    model = build_model(model_spec_from_config(cfg["model"]))
    period = model.characteristic_period
    time = cfg["time"]
    if "dt" not in time or time["dt"] is None:
        time["dt"] = period / DEFAULT_STEPS_PER_PERIOD
    span = time["t1"] - time["t0"]
    n_steps = round(span / time["dt"])
    if n_steps < 1:
        raise ConfigError("time span shorter than one dt step")
    # snap the endpoint onto the integration grid (at most dt/2 away)
    time["t1"] = time["t0"] + n_steps * time["dt"]
    cfg.setdefault("frames", {}).setdefault("per_period", DEFAULT_FRAMES_PER_PERIOD)
    ana = cfg.setdefault("analysis", {})
    ana.setdefault("population_basis",
                   "bare" if model.kind == "single_band" else "adiabatic")
    ana.setdefault("probe_fraction", DEFAULT_PROBE_FRACTION)
    ana.setdefault("expected_period", None)
    ana.setdefault("fit_window", None)
    ana.setdefault("pr_min_window", None)
    ana.setdefault("revival_times", [])
    ana.setdefault("detuning_n_max", 5)
    ana.setdefault("convergence_check", True)
    cfg.setdefault("ensemble", None)
    cfg.setdefault("output_dir", None)
    return cfg


def scenario_hash(resolved_cfg: dict) -> str:
    blob = json.dumps(resolved_cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# --- presets ---------------------------------------------------------------

def _fig1(initial):
    return {
        "model": {"kind": "single_band", "J": 10.0, "omega": 1.0, "n_sites": 401},
        "initial_state": initial,
        "time": {"t0": 0.0, "t1": 3 * TWO_PI},
        "analysis": {
            "expected_period": TWO_PI,
            "revival_times": [TWO_PI, 2 * TWO_PI, 3 * TWO_PI],
        },
    }


def _fig2(initial):
    t_sbloch = 10 * math.pi
    return {
        "model": {"kind": "driven_ho", "omega": 1.0, "J": 0.5, "Omega": 1.2,
                  "n_fock": 400},
        "initial_state": initial,
        "time": {"t0": 0.0, "t1": 3 * t_sbloch},
        "analysis": {
            "expected_period": t_sbloch,
            "revival_times": [t_sbloch, 2 * t_sbloch, 3 * t_sbloch],
        },
    }


def _presets() -> dict:
    t_sbloch = 10 * math.pi
    fig2c = _fig2({"kind": "coherent", "alpha": math.sqrt(200.0)})
    fig2c["model"]["disorder"] = {"std_dev": math.sqrt(math.pi / 50), "seed": 0}
    fig2c["ensemble"] = {"n_realizations": 10, "master_seed": 20260823}
    fig2c["frames"] = {"per_period": 20}
    fig2c["analysis"]["fit_window"] = [t_sbloch, 3 * t_sbloch]
    fig2c["analysis"]["revival_times"] = [t_sbloch, 3 * t_sbloch]
    fig2c["analysis"]["convergence_check"] = False

    # LZ presets: diabatic indices sweep as lambda*t/omega, so n_levels must
    # cover the full simulated span plus the wave-packet width.
    tau_a = 0.5 / 1.0
    t0_a = -tau_a / 4
    t_bloch_a = 4 * math.pi / 0.5  # 8 pi
    fig4a = {
        "model": {"kind": "lz_grid", "omega": 0.5, "lambda": 1.0, "J": 0.2,
                  "n_levels": 227},
        "initial_state": {"kind": "adiabatic_index", "q": "middle"},
        "time": {"t0": t0_a, "t1": t0_a + 1.75 * t_bloch_a},
        "frames": {"per_period": 20},
        "analysis": {
            "pr_min_window": [0.5 * t_bloch_a, 1.5 * t_bloch_a],
            "fit_window": [0.3 * tau_a, 3 * tau_a],
            "revival_times": [t_bloch_a],
        },
    }

    tau_b = 5.0 / 1.0
    t0_b = -tau_b / 4
    t_super_b = 2300.0 / 5.0
    fig4b = {
        "model": {"kind": "lz_grid", "omega": 5.0, "lambda": 1.0, "J": 0.5,
                  "n_levels": 475},
        "initial_state": {"kind": "adiabatic_index", "q": "middle"},
        "time": {"t0": t0_b, "t1": t0_b + 2.3 * t_super_b},
        "frames": {"per_period": 2},
        "analysis": {"expected_period": t_super_b},
    }

    presets = {
        "fig1a": _fig1({"kind": "site_delta", "n": 0}),
        "fig1b": _fig1({"kind": "gaussian_sites", "center": 0.0, "sigma": 10.0}),
        "fig2a": _fig2({"kind": "fock", "n": 200}),
        "fig2b": _fig2({"kind": "coherent", "alpha": math.sqrt(200.0)}),
        "fig2c": fig2c,
        "fig4a": fig4a,
        "fig4b": fig4b,
    }
    for name, cfg in presets.items():
        cfg["name"] = name
    return presets


def preset_names() -> list[str]:
    return sorted(_presets().keys())


def preset_config(name: str) -> dict:
    presets = _presets()
    if name not in presets:
        raise ConfigError(
            f"unknown preset '{name}' (available: {', '.join(sorted(presets))})"
        )
    return copy.deepcopy(presets[name])


# --- scenario machinery ----------------------------------------------------

def _analysis_grid(model, cfg: dict) -> np.ndarray:
    t0, t1 = cfg["time"]["t0"], cfg["time"]["t1"]
    period = model.characteristic_period
    offset = model.kind == "lz_grid"  # avoid the exact-crossing instants
    return frame_times(t0, t1, period, cfg["frames"]["per_period"],
                       offset_half=offset)


def _build_plan(model, cfg: dict, grid: np.ndarray) -> PropagationPlan:
    t0, t1, dt = cfg["time"]["t0"], cfg["time"]["t1"], cfg["time"]["dt"]
    outputs = np.union1d(grid, [t0, t1])
    return PropagationPlan(t0, t1, dt, outputs)


def _check_initial_tail(model, psi0: StateVector):
    pops = psi0.populations()
    guard = min(TAIL_GUARD_LEVELS, model.dim // 4)
    tail = pops[-guard:].sum() if guard else 0.0
    if tail > TAIL_MASS_TOL:
        raise TruncationError(
            f"initial state carries tail mass {tail:.2e} in the top {guard} "
            f"levels; increase the basis dimension"
        )


def _energy_moments(model, t: float, psi: np.ndarray) -> tuple[float, float]:
    hv = model.apply_h(t, psi)
    mean = float(np.vdot(psi, hv).real)
    second = float(np.vdot(hv, hv).real)
    return mean, math.sqrt(max(second - mean * mean, 0.0))


def _run_single(resolved_cfg: dict, seed_override: Optional[int] = None) -> dict:
    """Propagate one realization and evaluate the per-frame series."""
    spec = model_spec_from_config(resolved_cfg["model"], seed_override)
    model = build_model(spec)
    init = dict(resolved_cfg["initial_state"])
    kind = init.pop("kind")
    if kind == "adiabatic_index":
        init.setdefault("t0", resolved_cfg["time"]["t0"])
    psi0 = initial_state(model, kind, **init)
    if model.kind == "driven_ho":
        _check_initial_tail(model, psi0)
    grid = _analysis_grid(model, resolved_cfg)
    plan = _build_plan(model, resolved_cfg, grid)
    validate_step(model, plan)
    traj = propagate(model, psi0, plan)

    adiabatic = resolved_cfg["analysis"]["population_basis"] == "adiabatic"
    n_t = grid.size
    pops = np.empty((n_t, model.dim))
    fid = np.empty(n_t)
    dE = np.empty(n_t)
    psi_ref = traj.state_at(plan.t0).amplitudes
    for j, t in enumerate(grid):
        psi = traj.states[traj.index_of(t)]
        if adiabatic:
            frame = instantaneous_frame(model.hamiltonian(t), t,
                                        check=(j % 50 == 0))
            pops[j] = np.abs(frame.states.conj().T @ psi) ** 2
        else:
            pops[j] = np.abs(psi) ** 2
        fid[j] = obs.amplitude_fidelity(psi_ref, psi)
        dE[j] = _energy_moments(model, t, psi)[1]
    out = {"times": grid, "pops": pops, "fidelity": fid, "deltaE": dE,
           "trajectory": traj, "model": model}
    if resolved_cfg["analysis"]["convergence_check"]:
        plan_half = PropagationPlan(plan.t0, plan.t1, plan.dt / 2, [plan.t1])
        traj_half = propagate(model, psi0, plan_half)
        ov = abs(np.vdot(traj.state_at(plan.t1).amplitudes,
                         traj_half.state_at(plan.t1).amplitudes))
        out["convergence_deficit"] = float(1.0 - ov)
    return out


def _realization_worker(args):
    resolved_cfg, seed = args
    r = _run_single(resolved_cfg, seed_override=seed)
    return r["times"], r["pops"], r["fidelity"], r["deltaE"]


@dataclass
class ScenarioResult:
    config: dict
    times: np.ndarray
    populations: np.ndarray
    observables: dict
    report: dict
    trajectory: Optional[Trajectory]
    seeds: list


def run_scenario(cfg: dict, threads: int = 1) -> ScenarioResult:
    """Run a scenario (single trajectory or disorder ensemble) and analyze it."""
    resolved = resolve_config(cfg)
    ens = resolved["ensemble"]
    seeds: list[int] = []
    trajectory = None
    convergence = None
    if ens is None:
        single = _run_single(resolved)
        times, pops = single["times"], single["pops"]
        fid, dE = single["fidelity"], single["deltaE"]
        trajectory = single["trajectory"]
        convergence = single.get("convergence_deficit")
        dis = resolved["model"].get("disorder")
        if dis is not None:
            seeds = [int(dis.get("seed", 0))]
    else:
        n_real = int(ens["n_realizations"])
        if n_real < 1:
            raise ConfigError("ensemble needs n_realizations >= 1")
        master = int(ens["master_seed"])
        seeds = [master + i for i in range(n_real)]
        jobs = [(resolved, s) for s in seeds]
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_realization_worker, jobs))
        else:
            results = [_realization_worker(j) for j in jobs]
        # fixed index order reduction for bit-stable averages
        times = results[0][0]
        pops = np.zeros_like(results[0][1])
        fid = np.zeros_like(results[0][2])
        dE = np.zeros_like(results[0][3])
        for _, p, f, d in results:
            pops += p
            fid += f
            dE += d
        pops /= n_real
        fid /= n_real
        dE /= n_real

    sigma = np.array([obs.index_width(p) for p in pops])
    pr = np.array([obs.participation_ratio(p) for p in pops])
    center = np.array([obs.index_center(p) for p in pops])
    pop_fid = np.array([obs.population_fidelity(pops[0], p) for p in pops])
    observables = {
        "fidelity": fid,
        "pop_fidelity": pop_fid,
        "sigma_idx": sigma,
        "deltaE": dE,
        "participation": pr,
        "center": center,
    }
    report = _build_report(resolved, times, pops, observables, seeds, convergence)
    return ScenarioResult(resolved, times, pops, observables, report,
                          trajectory, seeds)


def _build_report(resolved, times, pops, observables, seeds, convergence) -> dict:
    ana = resolved["analysis"]
    t0 = resolved["time"]["t0"]
    elapsed = times - t0
    report: dict = {
        "scenario": resolved["name"],
        "scenario_hash": scenario_hash(resolved),
        "dt": resolved["time"]["dt"],
        "seeds": seeds,
    }
    if convergence is not None:
        report["convergence_deficit_dt_halfdt"] = convergence

    sigma = observables["sigma_idx"]
    if ana["expected_period"] is not None:
        try:
            period, unc = obs.estimate_period(times, sigma)
            report["width_period"] = {"period": period, "uncertainty": unc,
                                      "expected": ana["expected_period"]}
        except Exception as exc:  # report, don't abort the whole scenario
            report["width_period"] = {"error": str(exc)}

    if ana["fit_window"] is not None:
        a, b = ana["fit_window"]
        try:
            gamma, resid = obs.fit_power_law(elapsed, sigma, (a, b))
            report["power_law"] = {"gamma": gamma, "residual": resid,
                                   "window": [a, b]}
        except Exception as exc:
            report["power_law"] = {"error": str(exc), "window": [a, b]}

    if ana["pr_min_window"] is not None:
        a, b = ana["pr_min_window"]
        mask = (elapsed >= a) & (elapsed <= b)
        if mask.any():
            pr = observables["participation"]
            j = int(np.flatnonzero(mask)[np.argmin(pr[mask])])
            report["pr_minimum"] = {"t_elapsed": float(elapsed[j]),
                                    "value": float(pr[j])}

    revivals = []
    for t_probe in ana["revival_times"]:
        j = int(np.argmin(np.abs(elapsed - t_probe)))
        revivals.append({
            "t_elapsed": float(elapsed[j]),
            "fidelity": float(observables["fidelity"][j]),
            "pop_fidelity": float(observables["pop_fidelity"][j]),
            "total_variation": obs.total_variation(pops[0], pops[j]),
        })
    if revivals:
        report["revivals"] = revivals

    report["width_max"] = {
        "value": float(sigma.max()),
        "t_elapsed": float(elapsed[int(np.argmax(sigma))]),
    }
    center = observables["center"]
    report["center_excursion"] = float(center.max() - center.min())

    if resolved["model"]["kind"] == "driven_ho":
        report["detunings"] = obs.detuning_table(
            resolved["model"]["Omega"], resolved["model"]["omega"],
            ana["detuning_n_max"])
    return report


def probe_indices(resolved_cfg: dict, times: np.ndarray) -> np.ndarray:
    """Indices of the coarser probe grid inside the analysis grid."""
    per_period = resolved_cfg["frames"]["per_period"]
    fraction = resolved_cfg["analysis"]["probe_fraction"]
    stride = max(1, int(round(per_period / fraction)))
    return np.arange(0, times.size, stride)
