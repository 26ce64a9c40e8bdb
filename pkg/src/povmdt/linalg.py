"""Dense complex linear algebra helpers for small operators.

Everything in this package works on plain ``numpy`` arrays of dtype
``complex128``.  Dimensions never exceed a few dozen, so no sparse or
symbolic machinery is used anywhere.
"""

from __future__ import annotations

import numpy as np

DEFAULT_TOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
EYE2 = np.eye(2, dtype=complex)

#: Single-qubit Pauli operators keyed by lowercase letter.
PAULI = {"i": EYE2, "x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


def asoperator(m) -> np.ndarray:
    """Coerce input to a square complex matrix."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def tensor(*ops) -> np.ndarray:
    """Kronecker product of one or more operators.

    The first argument is the slow index; ``tensor(a, b)[i*db + k, j*db + l]
    == a[i, j] * b[k, l]``.  The whole package fixes the ordering
    system (x) meterB (x) meterA with this convention.
    """
    if not ops:
        raise ValueError("tensor() needs at least one operator")
    out = asoperator(ops[0])
    for op in ops[1:]:
        out = np.kron(out, asoperator(op))
    return out


def dag(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(m).conj().T


def ket(d: int, j: int) -> np.ndarray:
    """Computational basis column vector |j> in dimension d."""
    if not 0 <= j < d:
        raise IndexError(f"basis index {j} out of range for dimension {d}")
    v = np.zeros(d, dtype=complex)
    v[j] = 1.0
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    """Rank-one projector |v><v| (input need not be normalized)."""
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def is_hermitian(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    m = asoperator(m)
    return bool(np.abs(m - dag(m)).max() <= tol)


def is_positive_semidefinite(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    m = asoperator(m)
    if not is_hermitian(m, tol):
        return False
    w = np.linalg.eigvalsh((m + dag(m)) / 2)
    return bool(w.min() >= -tol)


def is_unitary(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    m = asoperator(m)
    return bool(np.abs(dag(m) @ m - np.eye(m.shape[0])).max() <= tol)


def is_density(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    m = asoperator(m)
    return (
        abs(np.trace(m) - 1.0) <= tol
        and is_hermitian(m, tol)
        and is_positive_semidefinite(m, tol)
    )


def partial_trace(m: np.ndarray, dims: tuple[int, int], keep: int) -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    ``dims`` gives the factor dimensions (slow, fast); ``keep`` selects the
    factor (0 or 1) that survives.
    """
    d0, d1 = dims
    m = asoperator(m)
    if m.shape[0] != d0 * d1:
        raise ValueError(f"dimension mismatch: {m.shape[0]} != {d0}*{d1}")
    r = m.reshape(d0, d1, d0, d1)
    if keep == 0:
        return np.einsum("ikjk->ij", r)
    if keep == 1:
        return np.einsum("kikj->ij", r)
    raise ValueError("keep must be 0 or 1")


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-like random unitary via QR of a complex Gaussian matrix.

    The R-diagonal phase fix makes the distribution phase-invariant and the
    result deterministic for a given generator state.
    """
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases
