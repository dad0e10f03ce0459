#coding:utf-8
"""Open quantum system models.

Two system classes are supported:

* open quantum harmonic oscillators (OQHOs), either in physical mode from the
  CCR matrix, energy and coupling matrices, or in raw (analysis) mode from a
  drift/dispersion pair;
* finite-level systems given by a Hamiltonian, Hermitian coupling operators
  and an initial density matrix, whose reduced state obeys a Lindblad master
  equation.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from munch import Munch

from Modules.exceptions import ConfigError, DimensionError, ModelValidationError
from Modules.matops import vec, unvec
from Modules.utils import (all_finite, block_j, canonical_theta, hermitian_defect,
                           ito_matrix, min_eigenvalue)
from utils import matrix_to_list, parse_matrix, parse_matrix_list

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
RANK_TOL = 1e-10


def _frozen(M, dtype=float):
    M = np.array(M, dtype=dtype)
    M.setflags(write=False)
    return M


@dataclass(frozen=True)
class OqhoModel:
    n: int
    weight: np.ndarray         # F, s x n
    p0: np.ndarray             # P = Re S(0, 0)
    drift: np.ndarray          # A
    dispersion: np.ndarray     # B
    sigma_weight: np.ndarray   # Sigma = F^T F
    theta: Optional[np.ndarray] = None
    energy: Optional[np.ndarray] = None
    coupling: Optional[np.ndarray] = None

    @property
    def physical(self):
        return self.theta is not None

    @property
    def m(self):
        return self.dispersion.shape[1]

    @property
    def bbt(self):
        return self.dispersion @ self.dispersion.T


@dataclass(frozen=True)
class FiniteLevelModel:
    d: int
    hamiltonian: np.ndarray
    couplings: Tuple[np.ndarray, ...]
    ito: np.ndarray
    sigma0: np.ndarray

    @property
    def m(self):
        return len(self.couplings)


@dataclass(frozen=True)
class Lindbladian:
    """Column-stacking matrices of the GKSL generator and of its adjoint."""
    dim: int
    matrix: np.ndarray
    adjoint_matrix: np.ndarray

    def apply(self, X):
        return unvec(self.matrix @ vec(X), self.dim)

    def apply_adjoint(self, X):
        return unvec(self.adjoint_matrix @ vec(X), self.dim)


def _check_shape(name, M, shape):
    if M.ndim != 2 or M.shape != shape:
        raise DimensionError(f"{name} has shape {M.shape}, expected {shape}")
    if not all_finite(M):
        raise ModelValidationError(name, "non-finite entries")


def _check_weight_and_moment(F, P, n):
    if F.ndim != 2 or F.shape[1] != n:
        raise DimensionError(f"F has shape {F.shape}, expected (s, {n})")
    _check_shape("P", P, (n, n))
    if not all_finite(F):
        raise ModelValidationError("F", "non-finite entries")
    s = F.shape[0]
    if s == 0 or s > n:
        raise ModelValidationError("F", f"needs 1 <= s <= n rows, got {s}")
    sv = np.linalg.svd(F, compute_uv=False)
    if sv[-1] <= RANK_TOL * sv[0]:
        raise ModelValidationError("F", "weighting matrix is not of full row rank")
    if np.abs(P - P.T).max() > SYMMETRY_TOL * max(1.0, np.abs(P).max()):
        raise ModelValidationError("P", "second-moment matrix is not symmetric")
    if min_eigenvalue(P) < -PSD_TOL:
        raise ModelValidationError("P", "second-moment matrix is not positive semi-definite")


def build_oqho(theta, R, M, F, P):
    """Physical-mode OQHO with A = 2 Theta (R + M^T J M), B = 2 Theta M^T."""
    theta = np.asarray(theta, dtype=float)
    R = np.asarray(R, dtype=float)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    P = np.asarray(P, dtype=float)

    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise DimensionError(f"theta must be square, got shape {theta.shape}")
    n = theta.shape[0]
    if n == 0 or n % 2:
        raise ModelValidationError("theta", f"number of system variables must be even and positive, got {n}")
    _check_shape("theta", theta, (n, n))
    _check_shape("R", R, (n, n))
    if M.shape[1] != n:
        raise DimensionError(f"M has shape {M.shape}, expected (m, {n})")
    if not all_finite(M):
        raise ModelValidationError("M", "non-finite entries")
    m = M.shape[0]
    if m % 2:
        raise ModelValidationError("M", f"number of noise channels must be even, got {m}")
    if np.abs(theta + theta.T).max() > SYMMETRY_TOL:
        raise ModelValidationError("theta", "CCR matrix is not antisymmetric")
    if np.abs(R - R.T).max() > SYMMETRY_TOL * max(1.0, np.abs(R).max()):
        raise ModelValidationError("R", "energy matrix is not symmetric")
    _check_weight_and_moment(F, P, n)

    J = block_j(m)
    A = 2 * theta @ (R + M.T @ J @ M)
    B = 2 * theta @ M.T

    # Heisenberg uncertainty relation for the initial moments
    if min_eigenvalue(P + 1j * theta) < -PSD_TOL:
        logger.warning("P + i*theta is not positive semi-definite; initial moments violate the uncertainty relation")

    return OqhoModel(n=n, weight=_frozen(F), p0=_frozen(P), drift=_frozen(A),
                     dispersion=_frozen(B), sigma_weight=_frozen(F.T @ F),
                     theta=_frozen(theta), energy=_frozen(R), coupling=_frozen(M))


def build_oqho_raw(A, B, F, P):
    """Analysis-mode OQHO from a drift/dispersion pair."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    F = np.atleast_2d(np.asarray(F, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))

    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise DimensionError(f"A must be square and non-empty, got shape {A.shape}")
    n = A.shape[0]
    _check_shape("A", A, (n, n))
    if B.ndim != 2 or B.shape[0] != n:
        raise DimensionError(f"B has shape {B.shape}, expected ({n}, m)")
    if not all_finite(B):
        raise ModelValidationError("B", "non-finite entries")
    _check_weight_and_moment(F, P, n)

    return OqhoModel(n=n, weight=_frozen(F), p0=_frozen(P), drift=_frozen(A),
                     dispersion=_frozen(B), sigma_weight=_frozen(F.T @ F))


def build_finite_level(H0, couplings, sigma0):
    H0 = np.asarray(H0, dtype=complex)
    sigma0 = np.asarray(sigma0, dtype=complex)
    if H0.ndim != 2 or H0.shape[0] != H0.shape[1]:
        raise DimensionError(f"H0 must be square, got shape {H0.shape}")
    d = H0.shape[0]
    if d < 2:
        raise ModelValidationError("H0", f"Hilbert space dimension must be at least 2, got {d}")
    _check_shape("H0", H0, (d, d))
    if hermitian_defect(H0) > SYMMETRY_TOL:
        raise ModelValidationError("H0", "Hamiltonian is not Hermitian")

    Ls = []
    for k, L in enumerate(couplings):
        L = np.asarray(L, dtype=complex)
        _check_shape(f"L[{k}]", L, (d, d))
        if hermitian_defect(L) > SYMMETRY_TOL:
            raise ModelValidationError(f"L[{k}]", "coupling operator is not Hermitian")
        Ls.append(_frozen(L, complex))
    m = len(Ls)
    if m % 2:
        raise ModelValidationError("L", f"number of couplings must be even (pad with a zero coupling), got {m}")

    _check_shape("sigma0", sigma0, (d, d))
    if hermitian_defect(sigma0) > SYMMETRY_TOL:
        raise ModelValidationError("sigma0", "density matrix is not Hermitian")
    if abs(np.trace(sigma0) - 1) > SYMMETRY_TOL:
        raise ModelValidationError("sigma0", "density matrix does not have unit trace")
    if min_eigenvalue(sigma0) < -PSD_TOL:
        raise ModelValidationError("sigma0", "density matrix is not positive semi-definite")

    return FiniteLevelModel(d=d, hamiltonian=_frozen(H0, complex), couplings=tuple(Ls),
                            ito=_frozen(ito_matrix(m), complex), sigma0=_frozen(sigma0, complex))


def assemble_lindbladian(model):
    """Vectorize L(s) = -i[H0, s] + sum conj(W_jk) L_j s L_k - {K, s}/2, K = sum W_jk L_j L_k.

    W is the Ito matrix. The adjoint generator i[H0, s] + sum W_jk L_j s L_k - {K, s}/2
    is assembled independently and must coincide with the conjugate transpose.
    """
    d = model.d
    I = np.eye(d)
    H = model.hamiltonian
    W = model.ito
    Ls = model.couplings

    K = np.zeros((d, d), dtype=complex)
    jump = np.zeros((d * d, d * d), dtype=complex)
    jump_adj = np.zeros((d * d, d * d), dtype=complex)
    for j, Lj in enumerate(Ls):
        for k, Lk in enumerate(Ls):
            if W[j, k] == 0:
                continue
            K += W[j, k] * (Lj @ Lk)
            # vec(A X B) = (B^T kron A) vec(X)
            term = np.kron(Lk.T, Lj)
            jump += np.conj(W[j, k]) * term
            jump_adj += W[j, k] * term

    hamiltonian = np.kron(I, H) - np.kron(H.T, I)
    anticomm = np.kron(I, K) + np.kron(K.T, I)
    matrix = -1j * hamiltonian + jump - 0.5 * anticomm
    adjoint = 1j * hamiltonian + jump_adj - 0.5 * anticomm

    defect = np.abs(adjoint - matrix.conj().T).max() if matrix.size else 0.0
    if defect > 1e-10 * max(1.0, np.abs(matrix).max()):
        raise ModelValidationError("lindbladian", f"adjoint generator mismatch {defect:.3e}")

    return Lindbladian(dim=d, matrix=_frozen(matrix, complex), adjoint_matrix=_frozen(adjoint, complex))


def build_model(args):
    """Build a model from the `model` section of a run configuration."""
    if not isinstance(args, dict):
        raise ConfigError('model', f"expected a mapping, got {type(args).__name__}")
    args = Munch(args) if not isinstance(args, Munch) else args
    kind = args.get('kind', None)
    try:
        if kind == 'oqho-physical':
            R = parse_matrix(args.R, 'R')
            theta = args.get('theta', None)
            if theta is None or theta == 'canonical':
                theta = canonical_theta(R.shape[0])
            else:
                theta = parse_matrix(theta, 'theta')
            return build_oqho(theta, R, parse_matrix(args.M, 'M'),
                              parse_matrix(args.F, 'F'), parse_matrix(args.P, 'P'))
        if kind == 'oqho-raw':
            return build_oqho_raw(parse_matrix(args.A, 'A'), parse_matrix(args.B, 'B'),
                                  parse_matrix(args.F, 'F'), parse_matrix(args.P, 'P'))
        if kind == 'finite-level':
            Ls = parse_matrix_list(args.get('L', None), 'L')
            return build_finite_level(parse_matrix(args.H0, 'H0'), Ls, parse_matrix(args.sigma0, 'sigma0'))
    except AttributeError as e:
        raise ConfigError('model', f"missing entry ({e})") from e
    raise ConfigError('model.kind', f"unknown model kind {kind!r}; expected oqho-physical, oqho-raw or finite-level")


def model_to_config(model):
    """Inverse of build_model, producing a JSON-ready dict."""
    if isinstance(model, FiniteLevelModel):
        return {
            'kind': 'finite-level',
            'H0': matrix_to_list(model.hamiltonian),
            'L': [matrix_to_list(L) for L in model.couplings],
            'sigma0': matrix_to_list(model.sigma0),
        }
    if model.physical:
        return {
            'kind': 'oqho-physical',
            'theta': matrix_to_list(model.theta),
            'R': matrix_to_list(model.energy),
            'M': matrix_to_list(model.coupling),
            'F': matrix_to_list(model.weight),
            'P': matrix_to_list(model.p0),
        }
    return {
        'kind': 'oqho-raw',
        'A': matrix_to_list(model.drift),
        'B': matrix_to_list(model.dispersion),
        'F': matrix_to_list(model.weight),
        'P': matrix_to_list(model.p0),
    }
