"""Measurement-operator containers, constructors and the entry oracle.

A :class:`Povm` is an ordered list of positive operators with integer
outcome labels.  The matrix entry of element ``l`` in an orthonormal basis
``{|a_j>}`` is ``<a_j| Pi_l |a_k>``; :func:`matrix_entry_oracle` evaluates
it exactly and serves as the ground truth for every estimator in this
package.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    asoperator,
    dag,
    is_hermitian,
    is_positive_semidefinite,
    is_unitary,
    ket,
    partial_trace,
    projector,
    random_unitary,
)

POVM_SCHEMA_VERSION = 1


class Basis:
    """Orthonormal basis of a d-dimensional system, stored as ket columns."""

    def __init__(self, kets: np.ndarray, tol: float = 1e-12):
        k = np.asarray(kets, dtype=complex)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError(f"basis kets must form a square matrix, got {k.shape}")
        gram = dag(k) @ k
        resid = np.abs(gram - np.eye(k.shape[0])).max()
        if resid > tol:
            raise ValueError(f"basis is not orthonormal: Gram residual {resid:.3e}")
        self._kets = k
        self._kets.setflags(write=False)

    @classmethod
    def computational(cls, d: int) -> "Basis":
        return cls(np.eye(d, dtype=complex))

    @property
    def dim(self) -> int:
        return self._kets.shape[0]

    @property
    def kets(self) -> np.ndarray:
        return self._kets

    def ket(self, j: int) -> np.ndarray:
        if not 0 <= j < self.dim:
            raise IndexError(f"basis index {j} out of range for dimension {self.dim}")
        return self._kets[:, j]

    def is_computational(self) -> bool:
        return bool(np.abs(self._kets - np.eye(self.dim)).max() == 0.0)

    def rotate_operator(self, op: np.ndarray) -> np.ndarray:
        """Express an operator in this basis: entry (j,k) of the result is
        <a_j| op |a_k>."""
        return dag(self._kets) @ asoperator(op) @ self._kets


class Povm:
    """Ordered collection of measurement operators with outcome labels.

    Each element must be Hermitian and positive semidefinite within ``tol``.
    By default the elements must also sum to the identity; constructors of
    deliberately sub-complete collections pass ``check_complete=False`` and
    the residual stays queryable through :meth:`completeness_residual`.
    """

    def __init__(
        self,
        elements,
        labels=None,
        *,
        tol: float = DEFAULT_TOL,
        check_complete: bool = True,
    ):
        elems = [asoperator(e) for e in elements]
        if not elems:
            raise ValueError("a POVM needs at least one element")
        d = elems[0].shape[0]
        for i, e in enumerate(elems):
            if e.shape[0] != d:
                raise ValueError(f"element {i} has dimension {e.shape[0]} != {d}")
            if not is_hermitian(e, tol):
                raise ValueError(f"element {i} is not Hermitian within {tol}")
            if not is_positive_semidefinite(e, tol):
                raise ValueError(f"element {i} is not positive semidefinite within {tol}")
        if labels is None:
            labels = list(range(1, len(elems) + 1))
        labels = [int(l) for l in labels]
        if len(labels) != len(elems):
            raise ValueError("labels and elements must have equal length")
        if len(set(labels)) != len(labels):
            raise ValueError("outcome labels must be unique")
        self._elements = tuple(e.copy() for e in elems)
        for e in self._elements:
            e.setflags(write=False)
        self._labels = tuple(labels)
        self._dim = d
        if check_complete:
            resid = self.completeness_residual()
            if resid > max(tol, 1e-10):
                raise ValueError(f"elements do not sum to identity: residual {resid:.3e}")

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def labels(self) -> tuple:
        return self._labels

    @property
    def elements(self) -> tuple:
        return self._elements

    def __len__(self) -> int:
        return len(self._elements)

    def __iter__(self):
        return iter(zip(self._labels, self._elements))

    def element(self, label: int) -> np.ndarray:
        """Element for an outcome label."""
        try:
            idx = self._labels.index(int(label))
        except ValueError:
            raise KeyError(f"no outcome labelled {label}; labels are {self._labels}") from None
        return self._elements[idx]

    def completeness_residual(self) -> float:
        """Max-norm of (sum of elements - identity)."""
        total = sum(self._elements)
        return float(np.abs(total - np.eye(self._dim)).max())

    def to_dict(self) -> dict:
        return {
            "schema_version": POVM_SCHEMA_VERSION,
            "dim": self._dim,
            "labels": list(self._labels),
            "elements": [
                [[[float(z.real), float(z.imag)] for z in row] for row in e]
                for e in self._elements
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, *, check_complete: bool = True) -> "Povm":
        dim = int(data["dim"])
        elems = []
        for e in data["elements"]:
            m = np.array([[complex(re, im) for re, im in row] for row in e])
            if m.shape != (dim, dim):
                raise ValueError(f"element shape {m.shape} does not match dim {dim}")
            elems.append(m)
        return cls(elems, data.get("labels"), check_complete=check_complete)


def save_povm(povm: Povm, path: str) -> None:
    """Write a POVM to JSON, atomically (temp file + rename).

    Python's float repr round-trips doubles exactly, so the file preserves
    full precision.
    """
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(povm.to_dict(), fh, indent=1)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_povm(path: str, *, check_complete: bool = True) -> Povm:
    with open(path) as fh:
        return Povm.from_dict(json.load(fh), check_complete=check_complete)


def make_sic_povm() -> Povm:
    """Four rank-one elements (1/2)|psi_l><psi_l| on a qubit, labels 1..4.

    The state set is, over {|H>, |V>} = {|0>, |1>}:

        psi_1 = |H>
        psi_2 = (|H> - sqrt(2) |V>) / sqrt(3)
        psi_3 = (|H> + sqrt(2) e^{-i 2pi/3} |V>) / sqrt(3)
        psi_4 = (|H> + sqrt(2) e^{+i 2pi/3} |V>) / sqrt(3)

    Note: with the sign of psi_2 as written this set does not resolve the
    identity -- the element sum carries an off-diagonal excess of
    -sqrt(2)/3 in the (H,V) slot -- so the completeness check is waived
    here.  Per-element positivity still holds, and every per-outcome
    quantity in this package (post-selection, entry estimation, noise
    transforms) is well defined for it.
    """
    s2 = np.sqrt(2.0)
    s3 = np.sqrt(3.0)
    w = np.exp(2j * np.pi / 3)
    psis = [
        np.array([1.0, 0.0], dtype=complex),
        np.array([1.0, -s2], dtype=complex) / s3,
        np.array([1.0, s2 * w.conjugate()], dtype=complex) / s3,
        np.array([1.0, s2 * w], dtype=complex) / s3,
    ]
    elems = [0.5 * projector(p) for p in psis]
    return Povm(elems, labels=[1, 2, 3, 4], check_complete=False)


def make_parametric_element(theta: float, eta: float, e01: complex) -> np.ndarray:
    """General qubit measurement operator eta * [[cos^2 t, e01], [conj(e01), sin^2 t]].

    ``e01`` is the off-diagonal entry of the bracketed (efficiency-normalized)
    matrix; positivity requires |e01| <= |cos(theta) sin(theta)|.
    """
    if not 0 < eta <= 1:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    c, s = np.cos(theta), np.sin(theta)
    bound = abs(c * s)
    if abs(e01) > bound + 1e-12:
        raise ValueError(
            f"|e01| = {abs(e01):.6g} exceeds the positivity bound "
            f"|cos(theta) sin(theta)| = {bound:.6g}"
        )
    e01 = complex(e01)
    return eta * np.array([[c * c, e01], [e01.conjugate(), s * s]], dtype=complex)


def povm_from_walk(u_walk: np.ndarray, n_positions: int, coin_dim: int) -> Povm:
    """Extract the POVM realized by a walk unitary read out in position.

    The walker starts at position 0; detecting it at position ``l`` after
    the unitary implements the coin-space element

        Pi_l = Tr_W[ (|0><0| (x) I) U^dag (|l><l| (x) I) U ]

    which equals A_l^dag A_l with the Kraus block A_l = (<l| (x) I) U (|0> (x) I).
    Completeness is exact by unitarity.  Ordering is position (x) coin with
    position as the slow index.
    """
    u = asoperator(u_walk)
    if u.shape[0] != n_positions * coin_dim:
        raise ValueError(
            f"unitary dimension {u.shape[0]} != n_positions*coin_dim = "
            f"{n_positions * coin_dim}"
        )
    if not is_unitary(u, 1e-10):
        raise ValueError("walk operator is not unitary within 1e-10")
    # Kraus block A_l: rows (l, c'), cols (0, c) of U.
    blocks = u.reshape(n_positions, coin_dim, n_positions, coin_dim)[:, :, 0, :]
    elems = [dag(a) @ a for a in blocks]
    return Povm(elems, labels=list(range(n_positions)), check_complete=True)


def random_povm(d: int, n_outcomes: int, seed: int) -> Povm:
    """Complete random POVM from a Haar-like unitary dilation.

    The dilation acts on outcomes (x) system; completeness is exact by
    construction and the result is deterministic for a given seed.
    """
    if d < 2:
        raise ValueError(f"system dimension must be >= 2, got {d}")
    if n_outcomes < 1:
        raise ValueError(f"need at least one outcome, got {n_outcomes}")
    rng = np.random.default_rng(seed)
    u = random_unitary(d * n_outcomes, rng)
    p = povm_from_walk(u, n_outcomes, d)
    return Povm(p.elements, labels=list(range(1, n_outcomes + 1)), check_complete=True)


def matrix_entry_oracle(povm: Povm, label: int, j: int, k: int, basis: Basis | None = None) -> complex:
    """Exact matrix entry <a_j| Pi_l |a_k> of the element labelled ``label``.

    This is the ground truth every estimator is checked against.  ``basis``
    defaults to the computational basis.
    """
    e = povm.element(label)
    d = povm.dim
    if basis is None:
        basis = Basis.computational(d)
    if basis.dim != d:
        raise ValueError(f"basis dimension {basis.dim} != POVM dimension {d}")
    if not 0 <= j < d or not 0 <= k < d:
        raise IndexError(f"entry indices ({j}, {k}) out of range for dimension {d}")
    return complex(np.vdot(basis.ket(j), e @ basis.ket(k)))


def element_entry(pi_l: np.ndarray, j: int, k: int, basis: Basis | None = None) -> complex:
    """Exact entry <a_j| pi_l |a_k> of a bare operator (no Povm wrapper)."""
    m = asoperator(pi_l)
    d = m.shape[0]
    if basis is None:
        if not 0 <= j < d or not 0 <= k < d:
            raise IndexError(f"entry indices ({j}, {k}) out of range for dimension {d}")
        return complex(m[j, k])
    return complex(np.vdot(basis.ket(j), m @ basis.ket(k)))
