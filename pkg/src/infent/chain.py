"""Expectation functional of the infinite chain of singlet pairs.

Pair ``k`` carries one qubit for Alice and one for Bob; a local block is a
4x4 operator on (Alice_k, Bob_k). The infinite chain exists only through
sparse maps: every pair not mentioned carries the identity (observables) or
the singlet (states).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg

from .bipartite import singlet
from .errors import PreconditionError, UnsupportedError
from .operators import ID2, STRUCT_TOL, is_density

SINGLET_VECTOR = singlet().vector
SINGLET_DENSITY = np.outer(SINGLET_VECTOR, SINGLET_VECTOR.conj())
ID4 = np.eye(4, dtype=complex)


def _block(X) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if X.shape != (4, 4):
        raise PreconditionError(f"pair blocks must be 4x4, got {X.shape}")
    return X


@dataclass(frozen=True)
class ChainObservable:
    """Finitely supported product observable; identity off ``support``."""

    support: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        blocks = {}
        for k, X in self.support.items():
            if int(k) < 0:
                raise PreconditionError("pair indices are nonnegative")
            blocks[int(k)] = _block(X)
        object.__setattr__(self, "support", dict(sorted(blocks.items())))

    @classmethod
    def alice(cls, k: int, A: np.ndarray) -> "ChainObservable":
        return cls({k: np.kron(A, ID2)})

    @classmethod
    def bob(cls, k: int, B: np.ndarray) -> "ChainObservable":
        return cls({k: np.kron(ID2, B)})

    @classmethod
    def pair(cls, k: int, A: np.ndarray, B: np.ndarray) -> "ChainObservable":
        return cls({k: np.kron(A, B)})

    def __matmul__(self, other: "ChainObservable") -> "ChainObservable":
        keys = set(self.support) | set(other.support)
        return ChainObservable(
            {k: self.support.get(k, ID4) @ other.support.get(k, ID4) for k in keys}
        )

    def adjoint(self) -> "ChainObservable":
        return ChainObservable({k: X.conj().T for k, X in self.support.items()})

    def norm(self) -> float:
        return float(np.prod([np.linalg.norm(X, 2) for X in self.support.values()]))

    def to_json(self) -> dict:
        return {"support": _blocks_to_json(self.support)}

    @classmethod
    def from_json(cls, data: dict | str) -> "ChainObservable":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(_blocks_from_json(data["support"]))


@dataclass(frozen=True)
class ChainState:
    """Singlet on every pair except the finitely many ``overrides``."""

    overrides: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        blocks = {}
        for k, rho in self.overrides.items():
            rho = _block(rho)
            if not is_density(rho):
                raise PreconditionError(f"override at pair {k} is not a density operator")
            blocks[int(k)] = rho
        object.__setattr__(self, "overrides", dict(sorted(blocks.items())))

    def to_json(self) -> dict:
        return {"overrides": _blocks_to_json(self.overrides)}

    @classmethod
    def from_json(cls, data: dict | str) -> "ChainState":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(_blocks_from_json(data.get("overrides", {})))


def _blocks_to_json(blocks: Mapping[int, np.ndarray]) -> dict:
    return {
        str(k): [[float(z.real), float(z.imag)] for z in X.reshape(-1)]
        for k, X in sorted(blocks.items())
    }


def _blocks_from_json(data: Mapping[str, list]) -> dict[int, np.ndarray]:
    out = {}
    for k, entries in data.items():
        arr = np.array([complex(re, im) for re, im in entries])
        if arr.size != 16:
            raise PreconditionError(f"block for pair {k} must have 16 entries")
        out[int(k)] = arr.reshape(4, 4)
    return out


def restrict(s: ChainState, k: int) -> np.ndarray:
    """Exact density of pair ``k``."""
    return s.overrides.get(int(k), SINGLET_DENSITY)


def expect(s: ChainState, A: ChainObservable) -> complex:
    """omega(A): the windowed expectation is constant once the window covers A."""
    value = 1.0 + 0.0j
    for k in sorted(A.support):
        value *= np.trace(restrict(s, k) @ A.support[k])
    return complex(value)


def split_even_odd(s: ChainState) -> tuple[ChainState, ChainState]:
    """Halves made of the even and odd pairs; pair j of a half is pair 2j(+1) of ``s``."""
    if s.overrides:
        raise UnsupportedError("even/odd splitting is only defined for the default chain")
    return ChainState(), ChainState()


def lift_from_half(A: ChainObservable, parity: int) -> ChainObservable:
    """Observable on a half-chain, relabeled to the parent chain."""
    if parity not in (0, 1):
        raise ValueError("parity must be 0 (even) or 1 (odd)")
    return ChainObservable({2 * k + parity: X for k, X in A.support.items()})


def _window_pair_vectors(s: ChainState, M: int) -> list[np.ndarray]:
    vecs = []
    for k in range(M):
        rho = restrict(s, k)
        w, V = np.linalg.eigh(rho)
        if w[-1] < 1 - 1e-10:
            raise UnsupportedError(f"pair {k} is mixed; dense window vectors need pure pairs")
        vecs.append(V[:, -1])
    return vecs


def window_vector(s: ChainState, M: int) -> np.ndarray:
    """Phi_M: tensor product of the first M pair vectors, axes (A0, B0, A1, B1, ...)."""
    vec = np.ones(1, dtype=complex)
    for v in _window_pair_vectors(s, M):
        vec = np.kron(vec, v)
    return vec


def apply_on_pairs(X_blocks: Mapping[int, np.ndarray], vec: np.ndarray, M: int) -> np.ndarray:
    T = vec.reshape((4,) * M)
    for k, X in X_blocks.items():
        if k >= M:
            raise PreconditionError(f"support index {k} lies outside the window of {M} pairs")
        T = np.moveaxis(np.tensordot(X, T, axes=([1], [k])), 0, k)
    return T.reshape(-1)


def window_expect(s: ChainState, A: ChainObservable, M: int) -> complex:
    """<Phi_M, A Phi_M> computed on the dense 4^M vector."""
    phi = window_vector(s, M)
    return complex(np.vdot(phi, apply_on_pairs(A.support, phi, M)))


def apply_alice_window(A: np.ndarray, vec: np.ndarray, M: int) -> np.ndarray:
    """Apply a (non-product) operator on Alice's first M qubits to a window vector."""
    T = vec.reshape((2,) * (2 * M))
    alice_axes = list(range(0, 2 * M, 2))
    T = np.tensordot(A.reshape((2,) * (2 * M)), T, axes=(list(range(M, 2 * M)), alice_axes))
    # tensordot puts the new Alice axes first; move them back into the interleaved slots.
    T = np.moveaxis(T, list(range(M)), alice_axes)
    return T.reshape(-1)


def _interleave_perm(M: int) -> np.ndarray:
    """Permutation matrix from (A0..A_{M-1}, B0..B_{M-1}) ordering to interleaved ordering."""
    dim = 4**M
    P = np.zeros((dim, dim))
    for idx in range(dim):
        bits = [(idx >> (2 * M - 1 - j)) & 1 for j in range(2 * M)]
        a, b = bits[:M], bits[M:]
        inter = [x for pair in zip(a, b) for x in pair]
        jdx = int("".join(map(str, inter)), 2)
        P[jdx, idx] = 1
    return P


def alice_window_commutant(M: int) -> np.ndarray:
    """Orthonormal basis (as rows of vec(X)) of the commutant of Alice's M-qubit algebra.

    Computed by solving [X, G] = 0 for all single-qubit Pauli generators on Alice's
    qubits, inside the full 4^M dimensional window algebra.
    """
    P = _interleave_perm(M)
    dim = 4**M
    gens = []
    for j in range(M):
        for s in (np.array([[0, 1], [1, 0]]), np.array([[1, 0], [0, -1]])):
            ops = [np.eye(2)] * M
            ops[j] = s
            G = np.eye(1)
            for o in ops:
                G = np.kron(G, o)
            gens.append(P @ np.kron(G, np.eye(2**M)) @ P.T)
    eye = np.eye(dim)
    K = np.vstack([np.kron(G, eye) - np.kron(eye, G.T) for G in gens])
    ns = scipy.linalg.null_space(K)
    return ns.T


def bob_window_algebra_basis(M: int) -> np.ndarray:
    P = _interleave_perm(M)
    n = 2**M
    basis = []
    for i in range(n):
        for j in range(n):
            E = np.zeros((n, n))
            E[i, j] = 1
            basis.append((P @ np.kron(np.eye(n), E) @ P.T).reshape(-1))
    return np.array(basis)


def is_singlet(rho: np.ndarray, tol: float = STRUCT_TOL) -> bool:
    return float(np.max(np.abs(rho - SINGLET_DENSITY))) <= tol
