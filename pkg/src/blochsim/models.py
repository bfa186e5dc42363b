"""The three model Hamiltonians, their closed-form adiabatic data, and
initial-state constructors.

Models:
  * tilted single-band lattice (static; Wannier-Stark ladder),
  * sinusoidally driven harmonic oscillator in a truncated Fock basis,
  * Landau-Zener grid (two counter-swept diabatic ladders with all-to-all
    cross-branch coupling).

All matrices are real symmetric.  Disorder shifts are quenched: drawn once
from the spec's seed at model construction and frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from ._expm import expm_apply
from .core import Basis, HermitianOperator, StateVector, eig_hermitian
from .errors import ConfigError, TruncationError

SQRT2 = math.sqrt(2.0)
TAIL_MASS_TOL = 1e-12
DISPLACEMENT_TAIL_TOL = 1e-10

# Fraction of levels excluded at each spectral edge when a check is restricted
# to the "interior window" (the infinite-system results only hold away from
# the truncation boundary).
INTERIOR_EDGE_FRACTION = 0.15


def interior_slice(dim: int, edge_fraction: float = INTERIOR_EDGE_FRACTION) -> slice:
    """Index slice selecting levels away from both truncation edges."""
    skip = int(math.ceil(edge_fraction * dim))
    return slice(skip, dim - skip)


@dataclass(frozen=True)
class Disorder:
    """Quenched Gaussian diagonal shifts."""

    std_dev: float
    seed: int

    def __post_init__(self):
        if self.std_dev < 0:
            raise ConfigError("disorder std_dev must be >= 0")

    def shifts(self, dim: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.normal(0.0, self.std_dev, dim)


@dataclass(frozen=True)
class SingleBandSpec:
    J: float
    omega: float
    n_sites: int
    disorder: Optional[Disorder] = None

    def __post_init__(self):
        if self.J <= 0 or self.omega <= 0:
            raise ConfigError("single-band spec requires J > 0 and omega > 0")
        if self.n_sites < 3 or self.n_sites % 2 == 0:
            raise ConfigError("n_sites must be odd and >= 3 so site 0 is central")


@dataclass(frozen=True)
class DrivenHOSpec:
    omega: float
    J: float
    Omega: float
    n_fock: int
    disorder: Optional[Disorder] = None

    def __post_init__(self):
        if self.omega <= 0 or self.Omega <= 0:
            raise ConfigError("driven-HO spec requires omega > 0 and Omega > 0")
        if self.n_fock < 2:
            raise ConfigError("n_fock must be >= 2")


@dataclass(frozen=True)
class LZGridSpec:
    omega: float
    lam: float
    J: float
    n_levels: int

    def __post_init__(self):
        if self.omega <= 0 or self.lam <= 0:
            raise ConfigError("LZ-grid spec requires omega > 0 and lambda > 0")
        if self.n_levels < 3 or self.n_levels % 2 == 0:
            raise ConfigError("n_levels must be odd and >= 3")

    @property
    def tau_per(self) -> float:
        return self.omega / self.lam


class SingleBandModel:
    """Tilted tight-binding chain; -J hopping, n*omega (+xi_n) on site n."""

    kind = "single_band"
    basis = Basis.SITE

    def __init__(self, spec: SingleBandSpec):
        self.spec = spec
        half = (spec.n_sites - 1) // 2
        self.sites = np.arange(-half, half + 1)
        self.diag = spec.omega * self.sites.astype(float)
        if spec.disorder is not None:
            self.diag = self.diag + spec.disorder.shifts(spec.n_sites)
        self.dim = spec.n_sites
        self._offdiag = -spec.J * np.ones(self.dim - 1)

    # static model: t accepted for interface uniformity
    def hamiltonian(self, t: float = 0.0) -> np.ndarray:
        H = np.diag(self.diag)
        idx = np.arange(self.dim - 1)
        H[idx, idx + 1] = self._offdiag
        H[idx + 1, idx] = self._offdiag
        return H

    def hamiltonian_op(self, t: float = 0.0) -> HermitianOperator:
        return HermitianOperator(self.hamiltonian(t))

    def apply_h(self, t: float, psi: np.ndarray) -> np.ndarray:
        out = self.diag * psi
        out[:-1] += self._offdiag * psi[1:]
        out[1:] += self._offdiag * psi[:-1]
        return out

    def h_norm_bound(self, t: float) -> float:
        return float(np.abs(self.diag).max() + 2 * self.spec.J)

    def dv_dt(self, t: float) -> np.ndarray:
        return np.zeros((self.dim, self.dim))

    def diabatic_energies(self, t: float) -> np.ndarray:
        return self.diag.copy()

    @property
    def drive_period(self) -> Optional[float]:
        return None

    @property
    def characteristic_period(self) -> float:
        # Bloch period of the tilt
        return 2 * math.pi / self.spec.omega


class DrivenHOModel:
    """omega*n (+xi_n) diagonal, J*sqrt(n+1)/sqrt(2)*sin(Omega*t) off-diagonal."""

    kind = "driven_ho"
    basis = Basis.FOCK

    def __init__(self, spec: DrivenHOSpec):
        self.spec = spec
        self.dim = spec.n_fock
        n = np.arange(self.dim, dtype=float)
        self.diag = spec.omega * n
        if spec.disorder is not None:
            self.diag = self.diag + spec.disorder.shifts(self.dim)
        # <n+1|x|n> in the Fock basis
        self._x_offdiag = np.sqrt(n[1:]) / SQRT2

    def _drive(self, t: float) -> float:
        return self.spec.J * math.sin(self.spec.Omega * t)

    def hamiltonian(self, t: float) -> np.ndarray:
        H = np.diag(self.diag)
        e = self._drive(t) * self._x_offdiag
        idx = np.arange(self.dim - 1)
        H[idx, idx + 1] = e
        H[idx + 1, idx] = e
        return H

    def hamiltonian_op(self, t: float) -> HermitianOperator:
        return HermitianOperator(self.hamiltonian(t))

    def apply_h(self, t: float, psi: np.ndarray) -> np.ndarray:
        e = self._drive(t) * self._x_offdiag
        out = self.diag * psi
        out[:-1] += e * psi[1:]
        out[1:] += e * psi[:-1]
        return out

    def h_norm_bound(self, t: float) -> float:
        return float(
            np.abs(self.diag).max()
            + 2 * abs(self.spec.J) * self._x_offdiag[-1]
        )

    def dv_dt(self, t: float) -> np.ndarray:
        c = self.spec.J * self.spec.Omega * math.cos(self.spec.Omega * t)
        M = np.zeros((self.dim, self.dim))
        idx = np.arange(self.dim - 1)
        M[idx, idx + 1] = c * self._x_offdiag
        M[idx + 1, idx] = c * self._x_offdiag
        return M

    def diabatic_energies(self, t: float) -> np.ndarray:
        return self.diag.copy()

    @property
    def drive_period(self) -> float:
        return 2 * math.pi / self.spec.Omega

    @property
    def characteristic_period(self) -> float:
        return self.drive_period


class LZGridModel:
    """Two counter-swept ladders, every + level coupled to every - level by J.

    Diabatic ordering follows the block layout: first the + branch with m
    descending from +L to -L, then the - branch, again descending.
    """

    kind = "lz_grid"
    basis = Basis.DIABATIC_LZ

    def __init__(self, spec: LZGridSpec):
        self.spec = spec
        self.n_branch = spec.n_levels
        self.dim = 2 * spec.n_levels
        half = (spec.n_levels - 1) // 2
        self.m_desc = np.arange(half, -half - 1, -1)
        self.diag0 = np.concatenate(
            [spec.omega * self.m_desc, spec.omega * self.m_desc]
        ).astype(float)
        self.sweep_sign = np.concatenate(
            [np.ones(spec.n_levels), -np.ones(spec.n_levels)]
        )

    def hamiltonian(self, t: float) -> np.ndarray:
        n = self.n_branch
        H = np.full((self.dim, self.dim), 0.0)
        H[:n, n:] = self.spec.J
        H[n:, :n] = self.spec.J
        np.fill_diagonal(H, self.diag0 + self.sweep_sign * self.spec.lam * t)
        return H

    def hamiltonian_op(self, t: float) -> HermitianOperator:
        return HermitianOperator(self.hamiltonian(t))

    def apply_h(self, t: float, psi: np.ndarray) -> np.ndarray:
        n = self.n_branch
        out = (self.diag0 + self.sweep_sign * self.spec.lam * t) * psi
        out[:n] += self.spec.J * psi[n:].sum()
        out[n:] += self.spec.J * psi[:n].sum()
        return out

    def h_norm_bound(self, t: float) -> float:
        return float(
            np.abs(self.diag0 + self.sweep_sign * self.spec.lam * t).max()
            + abs(self.spec.J) * self.n_branch
        )

    def dv_dt(self, t: float) -> np.ndarray:
        return np.diag(self.spec.lam * self.sweep_sign)

    def diabatic_energies(self, t: float) -> np.ndarray:
        return self.diag0 + self.sweep_sign * self.spec.lam * t

    @property
    def drive_period(self) -> float:
        return self.spec.tau_per

    @property
    def characteristic_period(self) -> float:
        return self.spec.tau_per


def build_model(spec):
    if isinstance(spec, SingleBandSpec):
        return SingleBandModel(spec)
    if isinstance(spec, DrivenHOSpec):
        return DrivenHOModel(spec)
    if isinstance(spec, LZGridSpec):
        return LZGridModel(spec)
    raise ConfigError(f"unknown model spec {type(spec).__name__}")


# --- explicit builders -----------------------------------------------------

def build_single_band(spec: SingleBandSpec) -> HermitianOperator:
    return SingleBandModel(spec).hamiltonian_op()


def build_driven_ho(spec: DrivenHOSpec, t: float) -> HermitianOperator:
    return DrivenHOModel(spec).hamiltonian_op(t)


def build_lz_grid(spec: LZGridSpec, t: float) -> HermitianOperator:
    return LZGridModel(spec).hamiltonian_op(t)


# --- closed-form adiabatic data -------------------------------------------

def single_band_eigenstate_oracle(m: int, n: int, spec: SingleBandSpec) -> float:
    """Amplitude <n|psi_m> of the Wannier-Stark eigenstate: J_{n-m}(2J/omega).

    Independent of the dense eigensolver (Bessel series evaluation); only
    defined for the clean lattice.
    """
    if spec.disorder is not None and spec.disorder.std_dev > 0:
        raise ConfigError("Bessel eigenstate oracle requires a clean lattice")
    return float(special.jv(n - m, 2 * spec.J / spec.omega))


def ho_adiabatic_energy(n: int, t: float, spec: DrivenHOSpec) -> float:
    """omega*n - J^2 sin^2(Omega t) / (2 omega)."""
    if n < 0:
        raise ConfigError("level index must be >= 0")
    s = math.sin(spec.Omega * t)
    return spec.omega * n - spec.J**2 * s * s / (2 * spec.omega)


def ho_displacement(t: float, spec: DrivenHOSpec) -> float:
    """Coherent displacement amplitude of the instantaneous eigenstates.

    The adiabatic states are displaced Fock states D(-g)|n> with
    g = J sin(Omega t) / (sqrt(2) omega).
    """
    return spec.J * math.sin(spec.Omega * t) / (SQRT2 * spec.omega)


def displaced_fock_state(n: int, beta: float, dim: int) -> np.ndarray:
    """exp(beta*(a^dag) - beta*a)|n> in a dim-level truncated Fock space."""
    lower = np.sqrt(np.arange(1, dim))

    def gen(v):
        # (beta a^dag - beta a) v  for real beta
        out = np.zeros_like(v)
        out[1:] += beta * lower * v[:-1]
        out[:-1] -= beta * lower * v[1:]
        return out

    e_n = np.zeros(dim, dtype=complex)
    e_n[n] = 1.0
    # generator norm bound: 2*beta*sqrt(dim)
    psi = expm_apply(gen, e_n, 1.0, 2 * abs(beta) * math.sqrt(dim))
    tail = np.abs(psi[-10:]) ** 2
    if tail.sum() > DISPLACEMENT_TAIL_TOL:
        raise TruncationError(
            f"displacement pushes tail mass {tail.sum():.2e} above "
            f"{DISPLACEMENT_TAIL_TOL:.0e}; increase the Fock dimension"
        )
    return psi / np.linalg.norm(psi)


def ho_adiabatic_state(n: int, t: float, spec: DrivenHOSpec) -> StateVector:
    """Instantaneous eigenstate of the driven HO: a displaced Fock state."""
    if n < 0 or n >= spec.n_fock:
        raise ConfigError("level index outside the truncated Fock space")
    psi = displaced_fock_state(n, -ho_displacement(t, spec), spec.n_fock)
    return StateVector(psi, Basis.FOCK)


def ho_theta(m: int, n: int, t: float, spec: DrivenHOSpec) -> float:
    """Closed-form coupling element; non-zero only for |m - n| = 1.

    This is the real-valued convention of the closed form; the Hermitian
    Berry-connection matrix produced by the frame tracker equals -1j times
    these elements.
    """
    if m == n:
        raise ConfigError("coupling element undefined for m == n (gauge sets it to 0)")
    if abs(m - n) != 1:
        return 0.0
    c = spec.J * spec.Omega * math.cos(spec.Omega * t) / ((m - n) * spec.omega)
    if m == n - 1:
        return c * math.sqrt(n) / SQRT2
    return c * math.sqrt(n + 1) / SQRT2


def lz_adiabatic_energy(m: int, branch: int, t: float, spec: LZGridSpec) -> float:
    """Closed-form instantaneous energy of the LZ grid, branch = +1 or -1."""
    if branch not in (+1, -1):
        raise ConfigError("branch must be +1 or -1")
    w2 = spec.omega**2
    p2j2 = (math.pi * spec.J) ** 2
    arg = (w2 - p2j2) / (w2 + p2j2) * math.cos(2 * math.pi * spec.lam * t / spec.omega)
    return branch * spec.omega / (2 * math.pi) * math.acos(arg) + m * spec.omega


def lz_transition_probability(spec: LZGridSpec) -> float:
    """Probability of staying on the same diabatic level through one crossing.

    exp(-pi J^2 / lambda): the decaying Landau-Zener form for diagonal sweep
    rates +-lambda and coupling J.
    """
    return math.exp(-math.pi * spec.J**2 / spec.lam)


# --- initial states --------------------------------------------------------

def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Truncated coherent-state amplitudes exp(-|a|^2/2) a^n / sqrt(n!)."""
    n = np.arange(dim)
    if alpha == 0:
        amp = np.zeros(dim, dtype=complex)
        amp[0] = 1.0
        return amp
    log_mag = -abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * special.gammaln(n + 1)
    phase = np.exp(1j * n * np.angle(alpha))
    return np.exp(log_mag) * phase


def _check_tail(populations: np.ndarray, n_guard: int, what: str):
    tail = populations[-n_guard:].sum()
    if tail > TAIL_MASS_TOL:
        raise TruncationError(
            f"{what}: tail mass {tail:.2e} in the top {n_guard} levels exceeds "
            f"{TAIL_MASS_TOL:.0e}; increase the basis dimension"
        )


def initial_state(model, kind: str, **params) -> StateVector:
    """Construct a normalized initial state for the given model.

    Kinds: site_delta(n), gaussian_sites(center, sigma), fock(n),
    coherent(alpha), adiabatic_index(q, t0).
    """
    dim = model.dim
    if kind == "site_delta":
        if not isinstance(model, SingleBandModel):
            raise ConfigError("site_delta requires the single-band model")
        n = int(params["n"])
        idx = np.searchsorted(model.sites, n)
        if idx >= dim or model.sites[idx] != n:
            raise ConfigError(f"site {n} outside the lattice")
        amp = np.zeros(dim, dtype=complex)
        amp[idx] = 1.0
        return StateVector(amp, model.basis)
    if kind == "gaussian_sites":
        if not isinstance(model, SingleBandModel):
            raise ConfigError("gaussian_sites requires the single-band model")
        center = float(params["center"])
        sigma = float(params["sigma"])
        if sigma <= 0:
            raise ConfigError("sigma must be > 0")
        # probability density gets standard deviation sigma
        amp = np.exp(-((model.sites - center) ** 2) / (4 * sigma**2)).astype(complex)
        amp /= np.linalg.norm(amp)
        pops = np.abs(amp) ** 2
        edge = pops[:3].sum() + pops[-3:].sum()
        if edge > TAIL_MASS_TOL:
            raise TruncationError(
                f"gaussian tail mass {edge:.2e} at the lattice edges exceeds "
                f"{TAIL_MASS_TOL:.0e}; increase n_sites"
            )
        return StateVector(amp, model.basis)
    if kind == "fock":
        if not isinstance(model, DrivenHOModel):
            raise ConfigError("fock requires the driven-HO model")
        n = int(params["n"])
        if not 0 <= n < dim:
            raise ConfigError(f"Fock level {n} outside truncation {dim}")
        amp = np.zeros(dim, dtype=complex)
        amp[n] = 1.0
        return StateVector(amp, model.basis)
    if kind == "coherent":
        if not isinstance(model, DrivenHOModel):
            raise ConfigError("coherent requires the driven-HO model")
        alpha = complex(params["alpha"])
        amp = coherent_amplitudes(alpha, dim)
        _check_tail(np.abs(amp) ** 2, min(50, dim), "coherent state")
        amp = amp / np.linalg.norm(amp)
        return StateVector(amp, model.basis)
    if kind == "adiabatic_index":
        q = params["q"]
        t0 = float(params.get("t0", 0.0))
        if q == "middle":
            q = dim // 2
        q = int(q)
        if not 0 <= q < dim:
            raise ConfigError(f"adiabatic index {q} outside dimension {dim}")
        dec = eig_hermitian(model.hamiltonian_op(t0))
        return StateVector(dec.vectors[:, q].astype(complex), model.basis)
    raise ConfigError(f"unknown initial-state kind '{kind}'")
