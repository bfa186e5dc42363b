"""Matrix-exponential actions on vectors.

``expm_apply`` evaluates exp(z*A) @ psi to machine precision with a
substepped Taylor series; only matrix-vector products with A are needed, so
models can supply structure-aware (tridiagonal, low-rank) actions.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalConsistencyError

# Per-substep Taylor radius: ~35 terms at machine precision, good
# work-per-unit-norm trade-off without noticeable cancellation.
_THETA = 3.0
_MAX_TERMS = 64
_TOL = 1e-16


def expm_apply(matvec, psi: np.ndarray, z: complex, norm_bound: float) -> np.ndarray:
    """Return exp(z*A) @ psi, where matvec(v) = A @ v and ||A|| <= norm_bound."""
    scaled = abs(z) * max(norm_bound, 0.0)
    n_sub = max(1, int(np.ceil(scaled / _THETA)))
    w = z / n_sub
    out = np.asarray(psi, dtype=complex)
    for _ in range(n_sub):
        term = out
        acc = out.copy()
        ref = np.linalg.norm(acc)
        for j in range(1, _MAX_TERMS + 1):
            term = matvec(term) * (w / j)
            acc += term
            if np.linalg.norm(term) <= _TOL * ref:
                break
        else:
            raise NumericalConsistencyError(
                "Taylor series for expm_apply did not converge; "
                "norm bound likely underestimated"
            )
        out = acc
    return out


def expm_dense(A: np.ndarray) -> np.ndarray:
    """Dense exp(A) via scipy; used where the full matrix is required."""
    from scipy.linalg import expm

    return expm(A)
