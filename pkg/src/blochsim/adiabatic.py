"""Smooth tracking of the instantaneous eigenbasis and the adiabatic-frame
generator.

Conventions: adiabatic index = ascending-energy rank inside the truncated
matrix.  Continuity gauge makes the overlap of each eigenvector with its
predecessor real and positive, which discretely parallel-transports the
basis; the coupling matrix Theta then has zero diagonal by construction.
The Hermitian Theta returned here equals -1j times the real closed-form
convention of :func:`blochsim.models.ho_theta`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._expm import expm_apply
from .core import HermitianOperator, StateVector, eig_hermitian
from .errors import (
    ConfigError,
    DegenerateGapError,
    DimensionMismatchError,
    FrameStepError,
    NumericalConsistencyError,
)
from .models import (
    DrivenHOModel,
    LZGridModel,
    SingleBandModel,
    ho_adiabatic_energy,
    lz_adiabatic_energy,
)
from .propagate import PropagationPlan, Trajectory

MIN_CONTINUITY_OVERLAP = 0.9
THETA_HERMITICITY_RTOL = 1e-8
THETA_GAP_FLOOR = 1e-8
POPULATION_SUM_TOL = 1e-9
DEFAULT_FRAMES_PER_PERIOD = 200


@dataclass(frozen=True)
class AdiabaticFrame:
    """Ordered instantaneous eigenpairs at one time point."""

    t: float
    energies: np.ndarray
    states: np.ndarray  # columns
    gauge: str  # "canonical" or "continuity"
    phases: np.ndarray  # per-column phase applied on top of canonical
    degenerate: np.ndarray

    @property
    def dim(self) -> int:
        return self.energies.size


def instantaneous_frame(H, t: float, prev: Optional[AdiabaticFrame] = None,
                        min_overlap: float = MIN_CONTINUITY_OVERLAP,
                        check: bool = True) -> AdiabaticFrame:
    """Diagonalize H(t); gauge against ``prev`` when given."""
    dec = eig_hermitian(H, check=check)
    vectors = dec.vectors
    if prev is None:
        return AdiabaticFrame(t, dec.values, vectors, "canonical",
                              np.ones(dec.values.size, dtype=complex), dec.degenerate)
    if prev.dim != dec.values.size:
        raise DimensionMismatchError("frame dimension changed between time points")
    if t <= prev.t:
        raise ConfigError("continuity frames must advance in time")
    overlaps = np.einsum("ij,ij->j", prev.states.conj(), vectors)
    mags = np.abs(overlaps)
    if mags.min() <= min_overlap:
        k = int(np.argmin(mags))
        raise FrameStepError(
            f"overlap matrix not diagonally dominant at column {k} "
            f"(|<prev|new>| = {mags[k]:.3f} <= {min_overlap}); "
            "reduce the frame step"
        )
    phases = overlaps / mags
    vectors = vectors * phases.conj()[np.newaxis, :]
    return AdiabaticFrame(t, dec.values, vectors, "continuity",
                          phases.conj(), dec.degenerate)


def gauge_align(frame: AdiabaticFrame, reference_states: np.ndarray,
                min_overlap: float = 0.5) -> AdiabaticFrame:
    """Phase-align each frame column against a reference column.

    Used when comparing against closed-form eigenstates, whose phase
    convention need not match the canonical one.
    """
    ref = np.asarray(reference_states)
    if ref.shape != frame.states.shape:
        raise DimensionMismatchError("reference shape does not match the frame")
    overlaps = np.einsum("ij,ij->j", ref.conj(), frame.states)
    mags = np.abs(overlaps)
    if mags.min() <= min_overlap:
        k = int(np.argmin(mags))
        raise FrameStepError(
            f"reference overlap too small at column {k} ({mags[k]:.3f})"
        )
    phases = overlaps / mags
    return AdiabaticFrame(frame.t, frame.energies,
                          frame.states * phases.conj()[np.newaxis, :],
                          "aligned", frame.phases * phases.conj(),
                          frame.degenerate)


def frame_times(t0: float, t1: float, period: float,
                per_period: int = DEFAULT_FRAMES_PER_PERIOD,
                offset_half: bool = False) -> np.ndarray:
    """Uniform frame grid; offset_half shifts by half a step so that the
    grid avoids the model's exact-crossing instants."""
    if per_period < 1:
        raise ConfigError("per_period must be >= 1")
    step = period / per_period
    n = int(math.floor((t1 - t0) / step + 1e-9))
    base = t0 + step * np.arange(n + 1)
    if offset_half:
        base = base[:-1] + step / 2
    return base


def frame_series(model, times: Sequence[float], check_every: int = 50) -> list:
    """Continuity-gauged frames at increasing times (sequential sweep)."""
    frames = []
    prev = None
    for i, t in enumerate(times):
        H = model.hamiltonian(t)
        prev = instantaneous_frame(H, t, prev=prev, check=(i % check_every == 0))
        frames.append(prev)
    return frames


def adiabatic_populations(psi, frame: AdiabaticFrame) -> np.ndarray:
    """|<psi_n^(ad)|psi>|^2 over the adiabatic index n."""
    vec = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)
    if vec.size != frame.dim:
        raise DimensionMismatchError(
            f"state dim {vec.size} vs frame dim {frame.dim}"
        )
    pops = np.abs(frame.states.conj().T @ vec) ** 2
    total = float(np.linalg.norm(vec) ** 2)
    if abs(pops.sum() - total) > POPULATION_SUM_TOL * max(1.0, total):
        raise NumericalConsistencyError(
            f"population sum {pops.sum():.12f} deviates from |psi|^2 = {total:.12f}"
        )
    return pops


@dataclass(frozen=True)
class CouplingMatrix:
    """Hermitian non-adiabatic coupling matrix with zero diagonal."""

    t: float
    theta: np.ndarray

    def __post_init__(self):
        th = self.theta
        scale = np.abs(th).max()
        if scale > 0:
            herm = np.abs(th - th.conj().T).max()
            if herm > THETA_HERMITICITY_RTOL * scale:
                raise NumericalConsistencyError(
                    f"coupling matrix not Hermitian: residual {herm:.3e} "
                    f"vs scale {scale:.3e}"
                )
        if np.abs(np.diagonal(th)).max(initial=0.0) != 0.0:
            raise NumericalConsistencyError("coupling diagonal must be exactly zero")


def numeric_theta(model, t: float, frame: AdiabaticFrame,
                  gap_floor: float = THETA_GAP_FLOOR) -> CouplingMatrix:
    """Coupling matrix from the Hellmann-Feynman form.

    Theta_mn = i <psi_m|dV/dt|psi_n> / (E_n - E_m) for m != n; the diagonal
    is fixed to zero by the gauge.
    """
    V = frame.states
    W = V.conj().T @ (model.dv_dt(t) @ V)
    E = frame.energies
    denom = E[np.newaxis, :] - E[:, np.newaxis]  # E_n - E_m
    off = ~np.eye(frame.dim, dtype=bool)
    if np.abs(denom[off]).min() < gap_floor:
        raise DegenerateGapError(
            f"spectral gap below {gap_floor:.0e} at t = {t}; "
            "evaluate away from exact crossings"
        )
    theta = np.zeros_like(W, dtype=complex)
    theta[off] = 1j * W[off] / denom[off]
    # Symmetrize away the eigensolver round-off so the Hermiticity contract
    # is exact by construction.
    theta = (theta + theta.conj().T) / 2
    np.fill_diagonal(theta, 0.0)
    return CouplingMatrix(t, theta)


def time_averaged_energies(model, n_quad: int = 256, source: str = "analytic") -> np.ndarray:
    """Period-averaged adiabatic energies (trapezoid quadrature).

    ``source="analytic"`` integrates the closed-form instantaneous energies;
    ``source="numeric"`` diagonalizes at the quadrature points.
    """
    if n_quad < 8:
        raise ConfigError("n_quad must be >= 8")
    period = model.drive_period
    if period is None:
        raise ConfigError("time averaging requires a periodic model")
    ts = np.linspace(0.0, period, n_quad + 1)
    if source == "numeric":
        samples = np.array([np.sort(np.linalg.eigvalsh(model.hamiltonian(t))) for t in ts])
        return np.trapezoid(samples, ts, axis=0) / period
    if source != "analytic":
        raise ConfigError(f"unknown source '{source}'")
    if isinstance(model, DrivenHOModel):
        levels = np.arange(model.dim)
        samples = np.array([[ho_adiabatic_energy(n, t, model.spec) for n in levels] for t in ts])
    elif isinstance(model, LZGridModel):
        half = (model.spec.n_levels - 1) // 2
        pairs = [(m, b) for m in range(-half, half + 1) for b in (-1, +1)]
        samples = np.array([
            sorted(lz_adiabatic_energy(m, b, t, model.spec) for m, b in pairs)
            for t in ts
        ])
    else:
        raise ConfigError(f"no closed-form adiabatic energies for {model.kind}")
    return np.trapezoid(samples, ts, axis=0) / period


class FrameSeriesGenerator:
    """Effective adiabatic-frame generator G(t) = D(t) - Theta(t).

    Interpolates linearly between precomputed (frame, coupling) samples.
    ``mode="nearest"`` keeps only |m - n| = 1 coupling elements.
    """

    def __init__(self, frames: Sequence[AdiabaticFrame],
                 thetas: Sequence[CouplingMatrix], mode: str = "full"):
        if len(frames) != len(thetas) or len(frames) < 2:
            raise ConfigError("need matching frame and coupling series (>= 2 samples)")
        if mode not in ("full", "nearest"):
            raise ConfigError(f"unknown coupling mode '{mode}'")
        for f in frames[1:]:
            if f.gauge != "continuity":
                raise ConfigError("frame series must be continuity-gauged")
        self.times = np.array([f.t for f in frames])
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("frame times must be strictly increasing")
        dim = frames[0].dim
        self.energies = np.stack([f.energies for f in frames])
        theta = np.stack([c.theta for c in thetas])
        if mode == "nearest":
            mask = np.abs(np.subtract.outer(np.arange(dim), np.arange(dim))) == 1
            theta = theta * mask[np.newaxis, :, :]
        self.theta = theta
        self.mode = mode
        self.dim = dim

    def __call__(self, t: float) -> np.ndarray:
        ts = self.times
        if t < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
            raise ConfigError(f"t = {t} outside the frame series range")
        i = min(max(int(np.searchsorted(ts, t) - 1), 0), ts.size - 2)
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        d = (1 - w) * self.energies[i] + w * self.energies[i + 1]
        th = (1 - w) * self.theta[i] + w * self.theta[i + 1]
        G = -th.astype(complex)
        G[np.arange(self.dim), np.arange(self.dim)] += d
        return G

    # propagator model interface
    def apply_h(self, t: float, psi: np.ndarray) -> np.ndarray:
        return self(t) @ psi

    def h_norm_bound(self, t: float) -> float:
        G = self(t)
        return float(np.abs(G).sum(axis=0).max())


def adiabatic_generator(frame_series_, theta_series_, mode: str = "full") -> FrameSeriesGenerator:
    """Build the adiabatic-frame generator evaluator from sampled series."""
    return FrameSeriesGenerator(frame_series_, theta_series_, mode=mode)


def propagate_adiabatic(model, psi0: StateVector, plan: PropagationPlan,
                        mode: str = "full", check_every: int = 100) -> Trajectory:
    """Propagate in the adiabatic frame, frames diagonalized at step midpoints.

    Output states are rotated back to the model's bare basis, so the result
    is directly comparable with :func:`blochsim.propagate.propagate`.
    """
    if mode not in ("full", "nearest"):
        raise ConfigError(f"unknown coupling mode '{mode}'")
    if plan.t1 <= plan.t0:
        raise ConfigError("adiabatic-frame propagation runs forward only")
    dim = model.dim
    frame = instantaneous_frame(model.hamiltonian(plan.t0), plan.t0)
    psi_f = frame.states.conj().T @ psi0.amplitudes
    out_idx = {int(k): j for j, k in enumerate(plan._indices)}
    states = np.empty((len(plan._indices), dim), dtype=complex)
    if 0 in out_idx:
        states[out_idx[0]] = psi0.amplitudes
    nn_mask = None
    if mode == "nearest":
        nn_mask = np.abs(np.subtract.outer(np.arange(dim), np.arange(dim))) == 1
    dt = plan.dt
    for k in range(plan.n_steps):
        tm = plan.t0 + (k + 0.5) * dt
        frame = instantaneous_frame(model.hamiltonian(tm), tm, prev=frame,
                                    check=(k % check_every == 0))
        theta = numeric_theta(model, tm, frame).theta
        if nn_mask is not None:
            theta = theta * nn_mask
        G = -theta
        G[np.arange(dim), np.arange(dim)] += frame.energies
        bound = float(np.abs(G).sum(axis=0).max())
        psi_f = expm_apply(lambda v: G @ v, psi_f, -1j * dt, bound)
        if (k + 1) in out_idx:
            t_out = plan.t0 + (k + 1) * dt
            out_frame = instantaneous_frame(model.hamiltonian(t_out), t_out,
                                            prev=frame, check=False)
            states[out_idx[k + 1]] = out_frame.states @ psi_f
    return Trajectory(plan.output_times, states, model.basis, model.kind, plan)
