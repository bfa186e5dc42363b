"""Dense complex linear algebra with fixed ordering and phase conventions.

Everything downstream (model builders, frame tracking, propagation) relies on
the conventions set here: eigenvalues ascending, eigenvectors column
orthonormal, canonical phase = largest-magnitude component real and positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonHermitianError,
    NumericalConsistencyError,
)

# Module-level tolerance defaults; overridable per call.
HERMITICITY_RTOL = 1e-12
EIG_RESIDUAL_RTOL = 1e-10
DEGENERACY_GAP = 1e-10
IMAG_RESIDUE_TOL = 1e-10
VARIANCE_FLOOR_RTOL = 1e-12


class Basis(str, Enum):
    SITE = "site"
    FOCK = "fock"
    DIABATIC_LZ = "diabatic_lz"
    ADIABATIC = "adiabatic_indexed"


@dataclass(frozen=True)
class StateVector:
    """Complex amplitude vector over a truncated basis."""

    amplitudes: np.ndarray
    basis: Basis

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.ndim != 1 or amp.size < 1:
            raise DimensionMismatchError("amplitudes must be a 1-d vector")
        if not np.all(np.isfinite(amp.view(float))):
            raise NumericalConsistencyError("non-finite amplitudes")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        if other.dim != self.dim:
            raise DimensionMismatchError(
                f"state dims differ: {self.dim} vs {other.dim}"
            )
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / self.norm, self.basis)


@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix, checked at construction."""

    matrix: np.ndarray
    hermiticity_rtol: float = HERMITICITY_RTOL

    def __post_init__(self):
        mat = np.asarray(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError(f"matrix must be square, got {mat.shape}")
        asym = np.abs(mat - mat.conj().T)
        scale = np.abs(mat).max()
        worst = asym.max()
        if worst > self.hermiticity_rtol * max(scale, 1e-300):
            i, j = np.unravel_index(np.argmax(asym), asym.shape)
            raise NonHermitianError(
                f"matrix not Hermitian: |H - H^dag| has max element "
                f"{worst:.3e} at ({i}, {j}), scale {scale:.3e}"
            )
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues with canonically phased orthonormal vectors.

    ``degenerate[k]`` is set when level k sits in a cluster with gap below
    DEGENERACY_GAP; continuity tracking may be ill-posed there.
    """

    values: np.ndarray
    vectors: np.ndarray
    phase_convention: str
    degenerate: np.ndarray


def _canonical_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude component is real positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    lead = vectors[idx, np.arange(vectors.shape[1])]
    phases = lead / np.abs(lead)
    return vectors * phases.conj()[np.newaxis, :]


def _order_degenerate(values, vectors, flags):
    """Lexicographic ordering of columns inside each degenerate cluster."""
    if not flags.any():
        return vectors
    vectors = vectors.copy()
    n = values.size
    k = 0
    while k < n:
        if not flags[k]:
            k += 1
            continue
        j = k
        while j + 1 < n and flags[j + 1] and values[j + 1] - values[j] < DEGENERACY_GAP:
            j += 1
        cols = list(range(k, j + 1))
        keys = [
            tuple(np.round(vectors[:, c].real, 10)) + tuple(np.round(vectors[:, c].imag, 10))
            for c in cols
        ]
        order = sorted(range(len(cols)), key=lambda i: keys[i])
        vectors[:, cols] = vectors[:, [cols[i] for i in order]]
        k = j + 1
    return vectors


def eig_hermitian(H, check: bool = True) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian operator with canonical conventions."""
    if isinstance(H, HermitianOperator):
        mat = H.matrix
    else:
        mat = HermitianOperator(H).matrix
    values, vectors = np.linalg.eigh(mat)
    gaps = np.diff(values)
    flags = np.zeros(values.size, dtype=bool)
    close = gaps < DEGENERACY_GAP
    flags[:-1] |= close
    flags[1:] |= close
    vectors = _canonical_phase(vectors)
    if flags.any():
        vectors = _order_degenerate(values, vectors, flags)
    if check:
        scale = max(np.abs(mat).max(), 1e-300)
        resid = np.abs(mat @ vectors - vectors * values[np.newaxis, :]).max()
        if resid > EIG_RESIDUAL_RTOL * scale:
            raise NumericalConsistencyError(
                f"eigendecomposition residual {resid:.3e} exceeds "
                f"{EIG_RESIDUAL_RTOL:.1e} * {scale:.3e}"
            )
    return EigenDecomposition(values, vectors, "canonical", flags)


def _as_matrix(H) -> np.ndarray:
    return H.matrix if isinstance(H, HermitianOperator) else np.asarray(H)


def _as_vector(psi) -> np.ndarray:
    return psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)


def expectation(psi, H) -> float:
    """<psi|H|psi>, asserted real up to a small imaginary residue."""
    vec = _as_vector(psi)
    mat = _as_matrix(H)
    if mat.shape[0] != vec.size:
        raise DimensionMismatchError(
            f"operator dim {mat.shape[0]} vs state dim {vec.size}"
        )
    val = complex(np.vdot(vec, mat @ vec))
    if abs(val.imag) > IMAG_RESIDUE_TOL * max(1.0, abs(val)):
        raise NumericalConsistencyError(
            f"expectation has imaginary residue {val.imag:.3e}"
        )
    return val.real


def energy_uncertainty(psi, H) -> float:
    """sqrt(<H^2> - <H>^2); tiny negative round-off variance is clamped to 0."""
    vec = _as_vector(psi)
    mat = _as_matrix(H)
    if mat.shape[0] != vec.size:
        raise DimensionMismatchError(
            f"operator dim {mat.shape[0]} vs state dim {vec.size}"
        )
    hv = mat @ vec
    mean = np.vdot(vec, hv).real
    second = np.vdot(hv, hv).real  # <H^2> via Hermiticity
    var = second - mean * mean
    # The floor scales with <H^2>: for large spectra the cancellation noise
    # exceeds any fixed absolute threshold.
    floor = -VARIANCE_FLOOR_RTOL * max(1.0, abs(second))
    if var < floor:
        raise NumericalConsistencyError(
            f"negative variance {var:.3e} below round-off floor {floor:.3e}"
        )
    return float(np.sqrt(max(var, 0.0)))
