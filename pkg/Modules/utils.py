import numpy as np

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
BJ = np.array([[0.0, 1.0], [-1.0, 0.0]])


def block_j(m):
    """J = I_{m/2} kron [[0, 1], [-1, 0]] for even m."""
    return np.kron(np.eye(m // 2), BJ)


def canonical_theta(n):
    return 0.5 * block_j(n)


def ito_matrix(m):
    """Quantum Ito matrix I_m + iJ of m vacuum noise channels."""
    return np.eye(m) + 1j * block_j(m)


def min_eigenvalue(M):
    """Smallest eigenvalue of the Hermitian part of M."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


def hermitian_defect(M):
    M = np.asarray(M)
    return float(np.abs(M - M.conj().T).max()) if M.size else 0.0


def all_finite(M):
    return bool(np.all(np.isfinite(np.asarray(M))))
