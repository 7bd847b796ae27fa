"""Dense complex linear algebra kernels shared by all precoders and detectors.

Matrices are plain 2-D ``numpy`` arrays of dtype complex128.  Every inverse
in the precoder/detector formulas is realized as a linear solve against a
Cholesky factorization; explicit inverses are only formed column-by-column
when the inverse matrix itself is the deliverable.
"""

import numpy as np
from scipy.linalg import lapack

RANK_TOL = 1e-12


class NumericsError(Exception):
    """Base class for numerical failures in the linear algebra kernels."""


class SingularMatrixError(NumericsError):
    """A matrix that must be Hermitian positive-definite is not."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class RankDeficientError(NumericsError):
    """A matrix that must have full row rank does not."""


class ConvergenceError(NumericsError):
    """An iterative factorization failed to converge."""


def as_cmatrix(m, name="matrix"):
    """Validate and return ``m`` as a finite 2-D complex128 array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={a.ndim}")
    if a.size and not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def hermitian(m):
    """Conjugate transpose."""
    return as_cmatrix(m).conj().T


def matmul(a, b):
    """Matrix product with an explicit shape check."""
    a = as_cmatrix(a, "a")
    b = as_cmatrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch in matmul: {a.shape} @ {b.shape}"
        )
    return a @ b


def solve_hpd(a, b):
    """Solve ``a @ x = b`` for Hermitian positive-definite ``a``.

    Uses a Cholesky factorization (LAPACK potrf/potrs).  The caller
    guarantees the Hermitian structure, e.g. ``H H^H + gamma I``; a
    non-positive pivot encountered during factorization raises
    :class:`SingularMatrixError` naming the pivot index.
    """
    a = as_cmatrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"a must be square, got {a.shape}")
    b_arr = np.asarray(b, dtype=np.complex128)
    squeeze = b_arr.ndim == 1
    if squeeze:
        b_arr = b_arr[:, None]
    b_arr = as_cmatrix(b_arr, "b")
    if a.shape[0] != b_arr.shape[0]:
        raise ValueError(f"shape mismatch: a is {a.shape}, b is {b_arr.shape}")
    c, info = lapack.zpotrf(a, lower=1, clean=0, overwrite_a=0)
    if info > 0:
        raise SingularMatrixError(
            f"matrix is not positive definite (non-positive pivot at index {info - 1})",
            pivot=info - 1,
        )
    if info < 0:
        raise NumericsError(f"zpotrf: illegal argument {-info}")
    x, info = lapack.zpotrs(c, b_arr, lower=1)
    if info != 0:
        raise NumericsError(f"zpotrs: illegal argument {-info}")
    return x[:, 0] if squeeze else x


def lq_decompose(h):
    """Factor ``h = l @ q`` with lower-triangular ``l`` and orthonormal-row ``q``.

    ``h`` must have at least as many columns as rows and full row rank.
    The diagonal of ``l`` is made real and positive, which removes the
    unitary-factor ambiguity and makes the factorization unique.
    """
    h = as_cmatrix(h, "h")
    rows, cols = h.shape
    if rows > cols:
        raise ValueError(f"lq_decompose needs rows <= cols, got {h.shape}")
    # LQ of h is the conjugate transpose of the QR of h^H.
    qt, rt = np.linalg.qr(h.conj().T, mode="reduced")
    l = rt.conj().T
    q = qt.conj().T
    d = np.diagonal(l).copy()
    scale = max(np.abs(d).max(initial=0.0), np.linalg.norm(h, ord="fro"))
    small = np.abs(d) <= RANK_TOL * scale
    if np.any(small):
        raise RankDeficientError(
            f"rank-deficient matrix: zero pivot at row {int(np.flatnonzero(small)[0])}"
        )
    # Rotate unit-modulus phases so diag(l) is real positive: l D^-1, D q.
    phases = d / np.abs(d)
    l = l * phases.conj()[None, :]
    q = q * phases[:, None]
    return l, q


def svd(m, full_basis=False):
    """Singular value decomposition ``m = u @ diag(s) @ vh``.

    Reduced form by default; ``full_basis=True`` returns square ``u`` and
    ``vh`` whose extra rows/columns complete the orthonormal bases (needed
    by the block-diagonalizing precoder for null-space directions).
    """
    m = as_cmatrix(m, "m")
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=full_basis)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    return u, s, vh


def logdet2_hpd(a):
    """Base-2 log-determinant of a Hermitian positive-definite matrix.

    Computed from the Cholesky factor, never from an explicit determinant,
    so it stays finite and accurate for large well-conditioned matrices.
    """
    a = as_cmatrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"a must be square, got {a.shape}")
    c, info = lapack.zpotrf(a, lower=1, clean=0, overwrite_a=0)
    if info > 0:
        raise SingularMatrixError(
            f"matrix is not positive definite (non-positive pivot at index {info - 1})",
            pivot=info - 1,
        )
    if info < 0:
        raise NumericsError(f"zpotrf: illegal argument {-info}")
    return 2.0 * float(np.sum(np.log2(np.real(np.diagonal(c)))))
