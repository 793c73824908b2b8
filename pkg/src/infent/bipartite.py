"""Schmidt analysis, entanglement entropy and the PPT fidelity bound."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .operators import (
    SPECTRAL_TOL,
    STRUCT_TOL,
    check_density,
    partial_transpose,
    random_vector,
)


@dataclass(frozen=True)
class BipartitePureState:
    """Psi = sum_ij coeff[i, j] e_i (x) f_j."""

    coeff: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeff, dtype=complex)
        if c.ndim != 2:
            raise PreconditionError("coefficient matrix must be two-dimensional")
        object.__setattr__(self, "coeff", c)

    @classmethod
    def from_vector(cls, psi: np.ndarray, dims: tuple[int, int]) -> "BipartitePureState":
        return cls(np.asarray(psi).reshape(dims))

    @property
    def dims(self) -> tuple[int, int]:
        return self.coeff.shape

    @property
    def vector(self) -> np.ndarray:
        return self.coeff.reshape(-1)

    def density(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    def reduced_alice(self) -> np.ndarray:
        return self.coeff @ self.coeff.conj().T

    def reduced_bob(self) -> np.ndarray:
        return self.coeff.T @ self.coeff.conj()

    def is_normalized(self, tol: float = STRUCT_TOL) -> bool:
        return abs(np.linalg.norm(self.coeff) - 1) <= tol

    def normalized(self) -> "BipartitePureState":
        return BipartitePureState(self.coeff / np.linalg.norm(self.coeff))


@dataclass(frozen=True)
class SchmidtData:
    coefficients: np.ndarray  # descending, nonnegative
    left: np.ndarray | None = None  # columns are Alice's Schmidt vectors
    right: np.ndarray | None = None  # columns are Bob's Schmidt vectors

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.coefficients) @ self.right.T

    @property
    def rank(self) -> int:
        return int(np.sum(self.coefficients > SPECTRAL_TOL))


def schmidt(psi: BipartitePureState) -> SchmidtData:
    """Schmidt decomposition via the SVD of the coefficient matrix."""
    if not psi.is_normalized():
        raise PreconditionError("state is not normalized")
    U, s, Vh = np.linalg.svd(psi.coeff)
    # coeff = sum_n s_n U[:, n] Vh[n, :], so Bob's n-th vector has coordinates Vh[n, :].
    return SchmidtData(s, U, Vh.T)


def entropy(s: SchmidtData) -> float:
    """Entanglement entropy in bits; zero coefficients contribute nothing."""
    p = np.asarray(s.coefficients, dtype=float) ** 2
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def nopa_entropy_closed_form(lam: float) -> float:
    """Entropy of the untruncated two-mode squeezed state, in bits."""
    if lam == 0:
        return 0.0
    l2 = lam * lam
    return float(-np.log2(1 - l2) - l2 / (1 - l2) * np.log2(l2))


def divergent_family(N: int, kind: str = "amplitude") -> SchmidtData:
    """First ``N`` Schmidt coefficients of the slowly decaying family, renormalized.

    ``kind="amplitude"`` takes c_n proportional to 1/((n+2) log2(n+2)^2).
    ``kind="probability"`` takes c_n**2 proportional to the same expression,
    which is the reading whose entropy diverges as N grows.
    """
    if N < 2:
        raise ValueError("truncation N must be at least 2")
    n = np.arange(N, dtype=float)
    w = 1.0 / ((n + 2) * np.log2(n + 2) ** 2)
    if kind == "amplitude":
        c = w
    elif kind == "probability":
        c = np.sqrt(w)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    c = c / np.linalg.norm(c)
    return SchmidtData(c)


def max_entangled(d: int) -> BipartitePureState:
    """Omega_d = d^{-1/2} sum_k |kk>."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    return BipartitePureState(np.eye(d, dtype=complex) / np.sqrt(d))


def max_entangled_projector(d: int) -> np.ndarray:
    return max_entangled(d).density()


def singlet() -> BipartitePureState:
    """(|01> - |10>)/sqrt(2)."""
    return BipartitePureState(np.array([[0, 1], [-1, 0]], dtype=complex) / np.sqrt(2))


def product_state(u: np.ndarray, v: np.ndarray) -> BipartitePureState:
    return BipartitePureState(np.outer(u, v))


def fidelity(rho: np.ndarray, d: int) -> float:
    """Singlet fraction tr(rho p_d) against Omega_d."""
    rho = check_density(rho)
    if rho.shape != (d * d, d * d):
        raise PreconditionError(f"density of shape {rho.shape} is not on dims [{d}, {d}]")
    omega = max_entangled(d).vector
    return float(np.real(omega.conj() @ rho @ omega))


def isotropic_state(F: float, d: int) -> np.ndarray:
    """Mixture of p_d and white noise with singlet fraction F."""
    p = max_entangled_projector(d)
    rest = (np.eye(d * d) - p) / (d * d - 1)
    return F * p + (1 - F) * rest


@dataclass(frozen=True)
class PPTReport:
    is_ppt: bool
    fidelity: float
    bound_respected: bool
    min_pt_eigenvalue: float


def ppt_fidelity_bound_check(rho: np.ndarray, d: int, tol: float = SPECTRAL_TOL) -> PPTReport:
    """Check that a PPT density has singlet fraction at most 1/d."""
    rho = check_density(rho)
    F = fidelity(rho, d)
    pt = partial_transpose(rho, [d, d], 1)
    lam_min = float(np.linalg.eigvalsh((pt + pt.conj().T) / 2)[0])
    is_ppt = lam_min >= -tol
    return PPTReport(is_ppt, F, (not is_ppt) or F <= 1 / d + tol, lam_min)


def random_product_state(d: int, rng: np.random.Generator) -> BipartitePureState:
    return product_state(random_vector(d, rng), random_vector(d, rng))


def max_product_fidelity(d: int, samples: int, rng: np.random.Generator, refine: bool = True) -> float:
    """Largest tr(sigma p_d) over ``samples`` random pure product states.

    With ``refine`` each sample gets one alternating-maximization step: Bob's
    vector is replaced by the best partner for Alice's, which is conj(phi).
    """
    omega = max_entangled(d).vector
    best = 0.0
    for _ in range(samples):
        phi, psi = random_vector(d, rng), random_vector(d, rng)
        best = max(best, abs(omega.conj() @ np.kron(phi, psi)) ** 2)
        if refine:
            psi = phi.conj()
            best = max(best, abs(omega.conj() @ np.kron(phi, psi)) ** 2)
    return float(best)
