"""Dense complex linear algebra at small operator dimensions (<= 32)."""

import numpy as np

MAX_DIM = 32

HERMITIAN_TOL = 1e-10
PSD_EIG_CLAMP = 1e-10
PSD_EIG_HARD = 1e-8


class DimensionError(ValueError):
    """Operand shapes are incompatible or exceed the configured cap."""


class NotHermitianError(ValueError):
    """Input matrix is not Hermitian within tolerance."""


class NotPsdError(ValueError):
    """Input matrix has an eigenvalue below the allowed negative floor."""


def as_complex_matrix(m):
    """Coerce to a 2-D complex128 array, rejecting non-finite entries."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError("matrix contains NaN or Inf entries")
    return a


def require_square(m):
    a = as_complex_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def matmul(a, b):
    a = as_complex_matrix(a)
    b = as_complex_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def tensor(a, b):
    """Kronecker product; left factor carries the high-order index."""
    a = as_complex_matrix(a)
    b = as_complex_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if max(rows, cols) > MAX_DIM:
        raise DimensionError(
            f"tensor product dimension {rows}x{cols} exceeds cap {MAX_DIM}"
        )
    return np.kron(a, b)


def adjoint(m):
    return as_complex_matrix(m).conj().T


def trace(m):
    return complex(np.trace(require_square(m)))


def frobenius_norm(m):
    return float(np.linalg.norm(as_complex_matrix(m)))


def hermiticity_defect(m):
    """Relative Frobenius deviation ||m - m^dag|| / (1 + ||m||)."""
    a = require_square(m)
    return float(np.linalg.norm(a - a.conj().T) / (1.0 + np.linalg.norm(a)))


def require_hermitian(m, tol=HERMITIAN_TOL):
    a = require_square(m)
    defect = hermiticity_defect(a)
    if defect > tol:
        raise NotHermitianError(f"hermiticity defect {defect:.3e} exceeds {tol:.1e}")
    return a


def hermitian_eig(m, tol=HERMITIAN_TOL):
    """Spectral decomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, eigenvector matrix with eigenvectors
    as columns). The input is symmetrized before factorization so roundoff
    asymmetry below `tol` cannot leak into the output.
    """
    a = require_hermitian(m, tol)
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return w, v


def sqrt_psd(m):
    """Positive semi-definite square root via the spectral decomposition.

    Eigenvalues in [-PSD_EIG_CLAMP, 0) are clamped to zero; anything below
    -PSD_EIG_HARD is a genuine non-PSD input and raises.
    """
    w, v = hermitian_eig(m)
    if w[0] < -PSD_EIG_HARD:
        raise NotPsdError(f"eigenvalue {w[0]:.3e} below -{PSD_EIG_HARD:.1e}")
    w = np.clip(w, 0.0, None)
    s = (v * np.sqrt(w)) @ v.conj().T
    return 0.5 * (s + s.conj().T)


def partial_trace(m, dims, keep):
    """Trace out one factor of a bipartite operator.

    `dims = (dA, dB)` with the A index high-order (index = a*dB + b);
    `keep` selects the surviving subsystem (0 for A, 1 for B).
    """
    a = require_square(m)
    d_a, d_b = dims
    if d_a * d_b != a.shape[0]:
        raise DimensionError(
            f"dims {dims} do not factor matrix dimension {a.shape[0]}"
        )
    if keep not in (0, 1):
        raise ValueError("keep must be 0 (subsystem A) or 1 (subsystem B)")
    t = a.reshape(d_a, d_b, d_a, d_b)
    if keep == 0:
        return np.einsum("abcb->ac", t)
    return np.einsum("abad->bd", t)
