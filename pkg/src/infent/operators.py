"""Dense complex linear algebra used by every other module.

Operators are plain ``numpy`` arrays. Functions that need the tensor
factorization take it explicitly as ``dims``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import PreconditionError, SizeError

# Tolerances shared by all modules unless overridden locally.
STRUCT_TOL = 1e-12
SPECTRAL_TOL = 1e-10

# Cap on rows*cols of any operator built by ``tensor``.
MAX_ENTRIES = 2**20

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def tensor(*ops: np.ndarray, max_entries: int | None = None) -> np.ndarray:
    """Kronecker product of the operands, left factor first."""
    cap = MAX_ENTRIES if max_entries is None else max_entries
    rows = int(np.prod([np.shape(o)[0] for o in ops]))
    cols = int(np.prod([np.shape(o)[1] if np.ndim(o) == 2 else 1 for o in ops]))
    if rows * cols > cap:
        raise SizeError(f"tensor product of size {rows}x{cols} exceeds cap of {cap} entries")
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def tensor_dims(*dims: Sequence[int]) -> tuple[int, ...]:
    return tuple(d for ds in dims for d in ds)


def _check_bipartite(X: np.ndarray, dims: Sequence[int], which: int) -> tuple[int, int]:
    X = np.asarray(X)
    if len(dims) != 2:
        raise PreconditionError(f"expected two tensor factors, got dims={list(dims)}")
    if which not in (0, 1):
        raise PreconditionError(f"factor index must be 0 or 1, got {which}")
    dA, dB = dims
    if X.shape != (dA * dB, dA * dB):
        raise PreconditionError(f"operator of shape {X.shape} does not match dims {list(dims)}")
    return dA, dB


def partial_trace(X: np.ndarray, dims: Sequence[int], which: int = 1) -> np.ndarray:
    """Trace out factor ``which`` (0 = Alice, 1 = Bob) of a bipartite operator."""
    dA, dB = _check_bipartite(X, dims, which)
    T = np.asarray(X).reshape(dA, dB, dA, dB)
    if which == 1:
        return np.einsum("ijkj->ik", T)
    return np.einsum("ijil->jl", T)


def partial_transpose(X: np.ndarray, dims: Sequence[int], which: int = 1) -> np.ndarray:
    """Transpose factor ``which`` of a bipartite operator."""
    dA, dB = _check_bipartite(X, dims, which)
    T = np.asarray(X).reshape(dA, dB, dA, dB)
    if which == 1:
        T = T.transpose(0, 3, 2, 1)
    else:
        T = T.transpose(2, 1, 0, 3)
    return T.reshape(dA * dB, dA * dB)


def flip(d: int) -> np.ndarray:
    """Unitary exchanging the two factors of C^d (x) C^d."""
    F = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            F[j * d + i, i * d + j] = 1.0
    return F


def is_hermitian(X: np.ndarray, tol: float = STRUCT_TOL) -> bool:
    X = np.asarray(X)
    return X.shape[0] == X.shape[1] and np.max(np.abs(X - X.conj().T)) <= tol


def is_unitary(U: np.ndarray, tol: float = SPECTRAL_TOL) -> bool:
    U = np.asarray(U)
    return U.shape[0] == U.shape[1] and np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) <= tol


def assert_unitary(U: np.ndarray, tol: float = SPECTRAL_TOL) -> np.ndarray:
    if not is_unitary(U, tol):
        raise PreconditionError("operator is not unitary within tolerance")
    return U


def is_normal(X: np.ndarray, tol: float = SPECTRAL_TOL) -> bool:
    X = np.asarray(X)
    return np.linalg.norm(X @ X.conj().T - X.conj().T @ X, 2) <= tol * max(1.0, np.linalg.norm(X, 2) ** 2)


def is_density(rho: np.ndarray, tol: float = SPECTRAL_TOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or not is_hermitian(rho, tol):
        return False
    if abs(np.trace(rho) - 1) > tol:
        return False
    return np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0] >= -tol


def check_density(rho: np.ndarray, tol: float = SPECTRAL_TOL) -> np.ndarray:
    if not is_density(rho, tol):
        raise PreconditionError("input is not a density operator (Hermitian, PSD, unit trace)")
    return np.asarray(rho, dtype=complex)


def spectrum(X: np.ndarray) -> Spectrum:
    """Eigen-decomposition of a normal operator with orthonormal eigenvectors.

    Eigenvalues are sorted ascending by real part, then imaginary part.
    """
    X = np.asarray(X, dtype=complex)
    if is_hermitian(X, SPECTRAL_TOL):
        w, V = np.linalg.eigh((X + X.conj().T) / 2)
        return Spectrum(w.astype(float), V)
    if not is_normal(X):
        raise PreconditionError("spectral functional calculus requires a normal operator")
    # Complex Schur form is diagonal for normal X, and Z is unitary even on degenerate subspaces.
    T, Z = scipy.linalg.schur(X, output="complex")
    w = np.diag(T)
    order = np.lexsort((w.imag, w.real))
    return Spectrum(w[order], Z[:, order])


def spectral_fn(X: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply ``f`` to a normal operator through its eigen-decomposition."""
    s = spectrum(X)
    fw = np.asarray(f(s.eigenvalues), dtype=complex)
    V = s.eigenvectors
    return (V * fw) @ V.conj().T


def principal_arg(z: np.ndarray) -> np.ndarray:
    """Argument in (-pi, pi]; the negative real axis maps to +pi."""
    theta = np.angle(z)
    return np.where(theta <= -np.pi, np.pi, theta)


def root_d(z: np.ndarray, d: int) -> np.ndarray:
    """d-th root of unit-modulus numbers with the branch cut on the negative real axis."""
    return np.exp(1j * principal_arg(np.asarray(z)) / d)


def sign_psd(K: np.ndarray) -> np.ndarray:
    """Hermitian contraction sign(K) with zero eigenvalues sent to +1."""
    return spectral_fn(K, lambda w: np.where(np.real(w) >= 0, 1.0, -1.0))


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy in bits."""
    w = np.linalg.eigvalsh((rho + np.conj(rho).T) / 2)
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


def op_norm(X: np.ndarray) -> float:
    return float(np.linalg.norm(X, 2))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (Z + Z.conj().T) / 2


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    k = d if rank is None else rank
    G = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = G @ G.conj().T
    return rho / np.trace(rho)


def random_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)
