#coding:utf-8
"""Dense linear-algebra kernels.

All routines are pure functions of their arguments. Model dimensions are
tiny (at most a few hundred unknowns after vectorization), so everything is
dense and direct.
"""
import numpy as np
import scipy.linalg

from .exceptions import DimensionError, StabilityError


def as_square(M, name="matrix"):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DimensionError(f"{name} has non-finite entries")
    return M


def vec(X):
    """Column-stacking vectorization."""
    return np.asarray(X).reshape(-1, order='F')


def unvec(v, rows, cols=None):
    cols = rows if cols is None else cols
    return np.asarray(v).reshape((rows, cols), order='F')


def expm(M):
    """Matrix exponential e^M (Pade scaling-and-squaring)."""
    M = as_square(M)
    if M.shape[0] == 0:
        return M.copy()
    return scipy.linalg.expm(M)


def solve_lyapunov(A_h, Q):
    """Solve A_h X + X A_h^* + Q = 0 by Kronecker vectorization.

    With column stacking, vec(A X) = (I kron A) vec X and
    vec(X A^*) = (conj(A) kron I) vec X.
    """
    A_h = as_square(A_h, "A_h")
    Q = as_square(Q, "Q")
    n = A_h.shape[0]
    if Q.shape != A_h.shape:
        raise DimensionError(f"Q has shape {Q.shape}, expected {A_h.shape}")

    dtype = np.result_type(A_h, Q, float)
    eye = np.eye(n, dtype=dtype)
    K = np.kron(eye, A_h) + np.kron(A_h.conj(), eye)
    try:
        lu, piv = scipy.linalg.lu_factor(K, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise StabilityError(f"Lyapunov operator is singular: {e}") from e
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e3 * np.finfo(float).eps * max(pivots.max(), 1.0):
        raise StabilityError("Lyapunov operator is singular; A_h is not Hurwitz")

    X = unvec(scipy.linalg.lu_solve((lu, piv), -vec(Q), check_finite=False), n)

    # keep the symmetry of the right-hand side
    if np.allclose(Q, Q.conj().T, rtol=0, atol=1e-14 * max(1.0, np.abs(Q).max())):
        X = 0.5 * (X + X.conj().T)
    return X


def spectral_abscissa(M):
    """Largest real part over the spectrum of M."""
    M = as_square(M)
    if M.shape[0] == 0:
        return -np.inf
    return float(np.max(scipy.linalg.eigvals(M).real))


def frobenius_inner(X, Y):
    """<X, Y> = sum conj(X_jk) Y_jk."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise DimensionError(f"shape mismatch {X.shape} vs {Y.shape}")
    value = np.vdot(X, Y)
    if np.isrealobj(X) and np.isrealobj(Y):
        return float(value.real)
    return value


def symmetrize(M):
    M = as_square(M)
    return 0.5 * (M + M.T)


def hermitize(M):
    M = as_square(M)
    return 0.5 * (M + M.conj().T)
