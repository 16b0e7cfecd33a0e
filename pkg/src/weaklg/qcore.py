"""Dense complex linear algebra and state types for registers of up to three qubits.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Qubit 0 is the most
significant factor of every tensor product, so ``|abc>`` has index ``4a + 2b + c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InvariantError, ShapeError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
NORM_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

for _m in (I2, X, Y, Z):
    _m.setflags(write=False)


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    return m


def _square(m: np.ndarray, name: str = "matrix") -> None:
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got {m.shape}")


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def kron(a, b) -> np.ndarray:
    """Tensor product with ``a`` as the more significant factor."""
    a, b = as_matrix(a), as_matrix(b)
    _square(a, "left factor")
    _square(b, "right factor")
    return np.kron(a, b)


def kron_all(factors: Sequence) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for f in factors:
        out = kron(out, f)
    return out


def dagger(a) -> np.ndarray:
    return as_matrix(a).conj().T


def trace_product(a, b) -> complex:
    """``Tr(a @ b)`` without forming the product."""
    a, b = as_matrix(a), as_matrix(b)
    _square(a)
    if a.shape != b.shape:
        raise ShapeError(f"trace of product needs equal square shapes, got {a.shape}, {b.shape}")
    return complex(np.einsum("ij,ji->", a, b))


def anticommutator(a, b) -> np.ndarray:
    return a @ b + b @ a


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = as_matrix(a)
    return a.shape[0] == a.shape[1] and bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_unitary(u, tol: float = 1e-12) -> bool:
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def operator_norm(a) -> float:
    return float(np.linalg.norm(as_matrix(a), 2))


def hermitian_eigh(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, symmetrising away round-off first."""
    a = as_matrix(a)
    _square(a)
    return np.linalg.eigh((a + a.conj().T) / 2)


def matrix_sqrt_psd(a, tol: float = PSD_TOL) -> np.ndarray:
    """Principal square root of a Hermitian positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are clipped to zero; anything more negative, or a
    non-Hermitian input, raises :class:`DomainError`.
    """
    a = as_matrix(a)
    _square(a)
    if not is_hermitian(a, tol):
        raise DomainError("matrix square root requires a Hermitian input")
    w, v = hermitian_eigh(a)
    if w.min(initial=0.0) < -tol:
        raise DomainError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    root = np.sqrt(np.clip(w, 0.0, None))
    return (v * root) @ v.conj().T


def function_of_hermitian(a, fn) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its spectrum."""
    w, v = hermitian_eigh(a)
    return (v * fn(w)) @ v.conj().T


def num_qubits_for_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ShapeError(f"dimension {dim} is not a power of two")
    return n


def embed_operator(op, qubits: Sequence[int], num_qubits: int) -> np.ndarray:
    """Lift ``op`` acting on ``qubits`` (first listed is most significant) to the full register."""
    op = as_matrix(op)
    k = len(qubits)
    if op.shape != (1 << k, 1 << k):
        raise ShapeError(f"operator of shape {op.shape} does not act on {k} qubit(s)")
    if len(set(qubits)) != k:
        raise ShapeError(f"repeated qubit in {tuple(qubits)}")
    if any(q < 0 or q >= num_qubits for q in qubits):
        raise ShapeError(f"qubit index out of range for {num_qubits}-qubit register: {tuple(qubits)}")
    rest = [q for q in range(num_qubits) if q not in qubits]
    n = num_qubits
    # reorder axes so that the acted-on qubits come first, apply kron(op, I), undo
    perm = list(qubits) + rest
    full = np.kron(op, np.eye(1 << len(rest), dtype=complex)).reshape([2] * (2 * n))
    inv = np.argsort(perm)
    axes = list(inv) + [n + i for i in inv]
    return full.transpose(axes).reshape(1 << n, 1 << n)


def partial_trace(rho, keep: Sequence[int], num_qubits: int) -> np.ndarray:
    """Reduced matrix on ``keep`` (in the listed order)."""
    rho = as_matrix(rho)
    n = num_qubits
    t = rho.reshape([2] * (2 * n))
    traced = [q for q in range(n) if q not in keep]
    # contract each traced qubit's row and column axes together
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for q in traced:
        cols[q] = rows[q]
    out = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
    red = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    d = 1 << len(keep)
    return red.reshape(d, d)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        num_qubits_for_dim(amp.size)
        if abs(np.linalg.norm(amp) - 1.0) > NORM_TOL:
            raise InvariantError(f"state norm is {np.linalg.norm(amp)!r}, expected 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated density matrix: Hermitian, unit trace, no eigenvalue below ``-PSD_TOL``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(as_matrix(self.matrix), dtype=complex)
        _square(m, "density matrix")
        num_qubits_for_dim(m.shape[0])
        if not is_hermitian(m, HERMITIAN_TOL):
            raise InvariantError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantError(f"density matrix trace is {tr!r}")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -PSD_TOL:
            raise InvariantError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_pure(cls, amplitudes) -> "DensityMatrix":
        return PureState(amplitudes).density_matrix()

    @classmethod
    def basis(cls, index: int, num_qubits: int) -> "DensityMatrix":
        v = np.zeros(1 << num_qubits, dtype=complex)
        v[index] = 1.0
        return cls.from_pure(v)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_qubits(self) -> int:
        return num_qubits_for_dim(self.dim)

    def expectation(self, op) -> float:
        return trace_product(self.matrix, op).real

    def probabilities(self) -> np.ndarray:
        return np.clip(np.diag(self.matrix).real, 0.0, None)


def apply_kraus(rho, kraus_ops: Sequence) -> np.ndarray:
    """``sum_k K rho K^dagger`` on raw matrices."""
    rho = as_matrix(rho)
    out = np.zeros_like(rho)
    for k in kraus_ops:
        out += k @ rho @ k.conj().T
    return out


def random_pure_states(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    """Haar-random unit vectors, one per row."""
    v = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2
