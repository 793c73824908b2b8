"""Finite-dimensional modular theory for bipartite pure states and EPR doubles.

Anti-linear operators are stored as a matrix ``W`` with the action
``psi -> W @ conj(psi)`` in computational coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bipartite import BipartitePureState, SchmidtData, schmidt
from .errors import NotCyclicError, PreconditionError
from .operators import flip, partial_trace, spectral_fn

FULL_RANK_TOL = 1e-8
CENTRALIZER_TOL = 1e-9


@dataclass(frozen=True)
class ModularData:
    rho_A: np.ndarray
    rho_B: np.ndarray
    delta: np.ndarray
    conj_J: np.ndarray  # J psi = conj_J @ conj(psi)
    omega_vec: np.ndarray
    schmidt: SchmidtData

    @property
    def d(self) -> int:
        return self.rho_A.shape[0]

    def delta_power(self, z: complex) -> np.ndarray:
        """Delta**z through the functional calculus (Delta > 0)."""
        return spectral_fn(self.delta, lambda w: np.exp(z * np.log(np.real(w))))

    def apply_J(self, psi: np.ndarray) -> np.ndarray:
        return self.conj_J @ np.conj(psi)

    def apply_S(self, psi: np.ndarray) -> np.ndarray:
        return self.apply_J(self.delta_power(0.5) @ psi)

    def conjugate_by_J(self, X: np.ndarray) -> np.ndarray:
        """The linear operator J X J."""
        return self.conj_J @ np.conj(X) @ np.conj(self.conj_J)


def modular_data(psi: BipartitePureState) -> ModularData:
    """Delta, J and the reduced densities of a full-Schmidt-rank pure state."""
    dA, dB = psi.dims
    if dA != dB:
        raise PreconditionError("modular data needs equal local dimensions")
    sd = schmidt(psi)
    if sd.coefficients[-1] < FULL_RANK_TOL:
        raise NotCyclicError(
            f"vector is not cyclic: smallest Schmidt coefficient {sd.coefficients[-1]:.3g}"
        )
    d = dA
    rho_A = psi.reduced_alice()
    rho_B = psi.reduced_bob()
    rho_B_inv = spectral_fn(rho_B, lambda w: 1.0 / np.real(w))
    delta = np.kron(rho_A, rho_B_inv)
    # J(e_a (x) f_b) = e_b (x) f_a, antilinear, in the Schmidt bases (U columns, R columns).
    U, R = sd.left, sd.right
    L = np.kron(U, R)
    W = L @ flip(d) @ L.T
    return ModularData(rho_A, rho_B, delta, W, psi.vector, sd)


def tomita_from_definition(psi: BipartitePureState) -> np.ndarray:
    """Anti-linear S defined by S (A (x) 1) Omega = (A^dag (x) 1) Omega, as its matrix M.

    Built from matrix units only, without any Schmidt data, so it serves as an
    independent route to Delta = M^T conj(M).
    """
    d = psi.dims[0]
    omega = psi.vector
    src, dst = [], []
    eye = np.eye(d)
    for b in range(d):
        for c in range(d):
            E = np.outer(eye[b], eye[c])
            src.append(np.kron(E, eye) @ omega)
            dst.append(np.kron(E.T, eye) @ omega)
    Src = np.array(src).T
    Dst = np.array(dst).T
    # M conj(Src) = Dst; Src spans the full space when omega is cyclic.
    return Dst @ np.linalg.inv(np.conj(Src))


def delta_from_tomita(M: np.ndarray) -> np.ndarray:
    return M.T @ np.conj(M)


def alice_block(X: np.ndarray, d: int) -> np.ndarray:
    """A with X = A (x) 1 on C^d (x) C^d."""
    return partial_trace(X, [d, d], 1) / d


def bob_block(X: np.ndarray, d: int) -> np.ndarray:
    """B with X = 1 (x) B on C^d (x) C^d."""
    return partial_trace(X, [d, d], 0) / d


def modular_flow(md: ModularData, A: np.ndarray, t: float) -> np.ndarray:
    """Delta^{it} (A (x) 1) Delta^{-it}, returned as the Alice operator."""
    d = md.d
    X = md.delta_power(1j * t) @ np.kron(A, np.eye(d)) @ md.delta_power(-1j * t)
    return alice_block(X, d)


def _as_density(omega: np.ndarray | BipartitePureState) -> np.ndarray:
    if isinstance(omega, BipartitePureState):
        return omega.density()
    omega = np.asarray(omega)
    if omega.ndim == 1:
        return np.outer(omega, omega.conj())
    return omega


def double_defect(omega, A: np.ndarray, B: np.ndarray) -> tuple[float, float]:
    """(omega((A-B)^dag (A-B)), omega((A-B)(A-B)^dag)) with A on Alice, B on Bob."""
    rho = _as_density(omega)
    D = np.kron(A, np.eye(B.shape[0])) - np.kron(np.eye(A.shape[0]), B)
    first = np.real(np.trace(rho @ D.conj().T @ D))
    second = np.real(np.trace(rho @ D @ D.conj().T))
    return float(first), float(second)


def find_double(md: ModularData, A: np.ndarray, tol: float = CENTRALIZER_TOL) -> np.ndarray | None:
    """J A^dag J as a Bob operator if A commutes with rho_A, else None."""
    if np.linalg.norm(A @ md.rho_A - md.rho_A @ A, 2) > tol:
        return None
    d = md.d
    X = md.conjugate_by_J(np.kron(A.conj().T, np.eye(d)))
    return bob_block(X, d)


def restricted_commutator_defect(md: ModularData, A1: np.ndarray, A2: np.ndarray) -> float:
    """|omega(A1 A2) - omega(A2 A1)| for the state restricted to Alice."""
    return float(abs(np.trace(md.rho_A @ (A1 @ A2 - A2 @ A1))))
