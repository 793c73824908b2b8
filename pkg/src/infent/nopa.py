"""Two-mode squeezed (NOPA) states in truncated Fock space.

Quadratures follow Q = (a + a^dag)/sqrt(2), P = -i (a - a^dag)/sqrt(2), so the
vacuum has Var(Q) = Var(P) = 1/2. The Fock expansion
sqrt(1 - lam^2) sum_n lam^n |n, n> is canonical; for lam > 0 it squeezes
Q1 - Q2 and P1 + P2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .bipartite import BipartitePureState, entropy, max_entangled, schmidt
from .errors import TruncationError


@dataclass(frozen=True)
class NopaParams:
    lam: float
    r: float
    trunc: int

    def __post_init__(self):
        if not 0 <= self.lam < 1:
            raise ValueError(f"lambda must lie in [0, 1), got {self.lam}")
        if self.r < 0:
            raise ValueError("squeezing r must be nonnegative")
        if abs(math.tanh(self.r) - self.lam) > 1e-12:
            raise ValueError("lambda and r are inconsistent: need lambda = tanh(r)")
        if self.trunc < 2:
            raise ValueError("truncation must be at least 2")

    @classmethod
    def from_lambda(cls, lam: float, trunc: int) -> "NopaParams":
        if not 0 <= lam < 1:
            raise ValueError(f"lambda must lie in [0, 1), got {lam}")
        return cls(float(lam), float(math.atanh(lam)), int(trunc))

    @classmethod
    def from_r(cls, r: float, trunc: int) -> "NopaParams":
        lam = math.tanh(r)
        if lam >= 1:
            raise ValueError(f"r = {r} is too large: tanh(r) rounds to 1")
        return cls(lam, float(r), int(trunc))

    @property
    def tail_weight(self) -> float:
        """Weight (1 - lam^2) sum_{n >= N} lam^{2n} = lam^{2N} dropped by truncation."""
        return self.lam ** (2 * self.trunc)

    def check_tolerance(self, tol: float | None) -> None:
        if tol is not None and tol < self.tail_weight:
            raise TruncationError(
                f"tolerance {tol:g} is below the truncation tail {self.tail_weight:.3g}; "
                f"need trunc >= {required_trunc(self.lam, tol)}"
            )


def required_trunc(lam: float, tol: float) -> int:
    """Smallest N with lam^{2N} <= tol."""
    if lam == 0:
        return 2
    return max(2, math.ceil(math.log(tol) / (2 * math.log(lam))))


def nopa_coefficients(lam: float, n: np.ndarray) -> np.ndarray:
    """Untruncated Schmidt amplitudes sqrt(1 - lam^2) lam^n."""
    return math.sqrt(1 - lam * lam) * np.power(lam, np.asarray(n, dtype=float))


def nopa_state(params: NopaParams, tol: float | None = None) -> BipartitePureState:
    """Psi_lam truncated at ``params.trunc`` and renormalized."""
    params.check_tolerance(tol)
    c = nopa_coefficients(params.lam, np.arange(params.trunc))
    c = c / np.linalg.norm(c)
    return BipartitePureState(np.diag(c).astype(complex))


# ---------------------------------------------------------------- extraction


@dataclass(frozen=True)
class QuditExtraction:
    coarse: BipartitePureState
    qudit: BipartitePureState
    residual: float
    coarse_params: NopaParams


def qudit_state(lam: float, d: int) -> BipartitePureState:
    """Normalized sum_{r=0}^{d-1} lam^r |r, r>."""
    c = np.power(float(lam), np.arange(d))
    return BipartitePureState(np.diag(c / np.linalg.norm(c)).astype(complex))


def split_index_map(N: int, d: int) -> np.ndarray:
    """U_d as a table: row n holds (k, r) with e_n = e_{dk + r} -> e_k (x) e_r."""
    n = np.arange(N)
    return np.stack([n // d, n % d], axis=1)


def extract_qudit(params: NopaParams, d: int) -> QuditExtraction:
    """Apply U_d (x) U_d and split Psi_lam into Psi_{lam^d} (x) Psi^{(d)}_lam."""
    if d < 2:
        raise ValueError("d must be at least 2")
    N = params.trunc
    if N % d:
        raise ValueError(f"truncation {N} is not a multiple of d = {d}")
    psi = nopa_state(params).coeff
    K = N // d
    kr = split_index_map(N, d)
    # T[k1, r1, k2, r2] = <(e_k1 e_r1) (x) (e_k2 e_r2) | (U_d (x) U_d) psi>
    T = np.zeros((K, d, K, d), dtype=complex)
    rows, cols = np.nonzero(psi)
    for i, j in zip(rows, cols):
        T[kr[i, 0], kr[i, 1], kr[j, 0], kr[j, 1]] = psi[i, j]
    # Regroup into (coarse Alice, coarse Bob) x (qudit Alice, qudit Bob).
    regrouped = T.transpose(0, 2, 1, 3).reshape(K * K, d * d)

    coarse_params = NopaParams.from_lambda(params.lam**d, K)
    coarse = nopa_state(coarse_params)
    qudit = qudit_state(params.lam, d)
    residual = float(np.linalg.norm(regrouped - np.outer(coarse.vector, qudit.vector)))
    return QuditExtraction(coarse, qudit, residual, coarse_params)


def extraction_fidelity_closed_form(lam: float, d: int) -> float:
    """|<Omega_d, Psi^{(d)}_lam>|^2 from the geometric sums."""
    if lam == 0:
        return 1.0 / d
    return float((1 / d) * ((1 - lam**d) / (1 - lam)) ** 2 * (1 - lam**2) / (1 - lam ** (2 * d)))


def extraction_fidelity(lam: float, d: int) -> float:
    psi = qudit_state(lam, d).vector
    return float(abs(np.vdot(max_entangled(d).vector, psi)) ** 2)


# ------------------------------------------------------------ permutations


@dataclass(frozen=True)
class PermIsometry:
    """V_p e_n = e_{p(n)} for an injective p on the nonnegative integers."""

    p: Callable[[int], int]
    ell: int | None  # finite distance bound, None for unbounded
    name: str = "custom"

    def image(self, N: int) -> np.ndarray:
        img = np.array([self.p(n) for n in range(N)], dtype=np.int64)
        if len(set(img.tolist())) != N:
            raise ValueError(f"map {self.name} is not injective on 0..{N - 1}")
        if np.any(img < 0):
            raise ValueError(f"map {self.name} leaves the nonnegative integers")
        if self.ell is not None and np.any(np.abs(img - np.arange(N)) > self.ell):
            raise ValueError(f"map {self.name} violates its distance bound {self.ell}")
        return img

    def matrix(self, N: int) -> np.ndarray:
        """V_p restricted to {n : p(n) < N}, as an N x |domain| matrix."""
        img = self.image(N)
        dom = np.nonzero(img < N)[0]
        V = np.zeros((N, len(dom)))
        V[img[dom], np.arange(len(dom))] = 1.0
        return V


def shift(ell: int = 1) -> PermIsometry:
    return PermIsometry(lambda n: n + ell, ell, f"shift{ell}")


def local_swaps() -> PermIsometry:
    """Exchange 2k and 2k+1."""
    return PermIsometry(lambda n: n ^ 1, 1, "swaps")


def v_even() -> PermIsometry:
    return PermIsometry(lambda n: 2 * n, None, "even")


def v_odd() -> PermIsometry:
    return PermIsometry(lambda n: 2 * n + 1, None, "odd")


def perm_defect(params: NopaParams, V: PermIsometry, tol: float | None = None) -> float:
    """||(V_p (x) 1 - 1 (x) V_p^dag) Psi_lam||^2 summed over n < trunc.

    The two terms are accumulated as sparse vectors keyed by basis label
    (a, b) and subtracted, using the untruncated amplitudes.
    """
    params.check_tolerance(tol)
    N = params.trunc
    img = V.image(N)
    c = nopa_coefficients(params.lam, np.arange(N))
    vec: dict[tuple[int, int], float] = {}
    # (V_p (x) 1) Psi = sum_n c_n e_{p(n)} (x) e_n
    for n in range(N):
        key = (int(img[n]), n)
        vec[key] = vec.get(key, 0.0) + c[n]
    # (1 (x) V_p^dag) Psi = sum_m c_{p(m)} e_{p(m)} (x) e_m
    cp = nopa_coefficients(params.lam, img)
    for m in range(N):
        key = (int(img[m]), m)
        vec[key] = vec.get(key, 0.0) - cp[m]
    return float(sum(v * v for v in vec.values()))


def perm_defect_bound(lam: float, ell: int) -> float:
    return float(abs(1 - lam ** (-ell)) ** 2)


def shift_defect_closed_form(lam: float, ell: int = 1) -> float:
    return float((1 - lam**ell) ** 2)


def even_defect_closed_form(lam: float) -> float:
    """(1 - lam^2) [1/(1 - lam^2) - 2/(1 - lam^3) + 1/(1 - lam^4)], tends to 1/6."""
    return float((1 - lam**2) * (1 / (1 - lam**2) - 2 / (1 - lam**3) + 1 / (1 - lam**4)))


# ------------------------------------------------------------ Hamiltonians


def hamiltonian_double_check(
    params: NopaParams,
    f: Callable[[np.ndarray], np.ndarray],
    psi: BipartitePureState | None = None,
) -> float:
    """||(f(H1) - f(H2)) psi|| with f evaluated on the number labels n."""
    psi = nopa_state(params) if psi is None else psi
    C = psi.coeff
    fa = np.asarray(f(np.arange(C.shape[0])), dtype=complex)
    fb = np.asarray(f(np.arange(C.shape[1])), dtype=complex)
    return float(np.linalg.norm(fa[:, None] * C - C * fb[None, :]))


# ------------------------------------------------------------ Gaussian data


def covariance_matrix(r: float) -> np.ndarray:
    """Symmetrized covariance of (Q1, Q2, P1, P2), vacuum variance 1/2."""
    c, s = math.cosh(2 * r) / 2, math.sinh(2 * r) / 2
    return np.array([[c, s, 0, 0], [s, c, 0, 0], [0, 0, c, -s], [0, 0, -s, c]])


def epr_covariance(r: float) -> dict[str, float]:
    if r < 0:
        raise ValueError("r must be nonnegative")
    return {
        "var_qdiff": math.exp(-2 * r),
        "var_psum": math.exp(-2 * r),
        "var_qsum": math.exp(2 * r),
        "var_pdiff": math.exp(2 * r),
    }


def ladder(N: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, N)), 1).astype(complex)


def quadratures(N: int) -> tuple[np.ndarray, np.ndarray]:
    a = ladder(N)
    return (a + a.conj().T) / np.sqrt(2), -1j * (a - a.conj().T) / np.sqrt(2)


def fock_quadrature_variances(params: NopaParams, tol: float | None = None) -> dict[str, float]:
    """Second moments of the truncated Fock vector, computed exactly.

    The vector is embedded in one extra level so a^dag never leaves the space.
    """
    params.check_tolerance(tol)
    N = params.trunc
    C = np.zeros((N + 1, N + 1), dtype=complex)
    C[:N, :N] = nopa_state(params).coeff
    Q, P = quadratures(N + 1)

    def var(op1, op2, sign):
        # (op1 (x) 1 + sign 1 (x) op2) psi, acting on coefficient matrices.
        X = op1 @ C + sign * C @ op2.T
        mean = np.vdot(C, X)
        return float(np.real(np.vdot(X, X) - abs(mean) ** 2))

    return {
        "var_qdiff": var(Q, Q, -1),
        "var_psum": var(P, P, +1),
        "var_qsum": var(Q, Q, +1),
        "var_pdiff": var(P, P, -1),
    }


def _weyl_vector(xi1, xi2, eta1, eta2) -> np.ndarray:
    """Coefficients of (Q1, Q2, P1, P2) in xi.P - eta.Q."""
    return np.array([-eta1, -eta2, xi1, xi2], dtype=float)


def characteristic_fn(r: float, xi1: float, xi2: float, eta1: float, eta2: float) -> complex:
    """<Psi_lam| exp(i(xi.P - eta.Q)) |Psi_lam> from the Gaussian covariance."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    v = _weyl_vector(xi1, xi2, eta1, eta2)
    return complex(math.exp(-0.5 * v @ covariance_matrix(r) @ v))


def characteristic_fn_fock(params: NopaParams, xi1, xi2, eta1, eta2, pad: int = 40) -> complex:
    """Same expectation from truncated Fock matrices (padded for the exponential)."""
    N = params.trunc
    M = N + pad
    Q, P = quadratures(M)
    W1 = scipy.linalg.expm(1j * (xi1 * P - eta1 * Q))
    W2 = scipy.linalg.expm(1j * (xi2 * P - eta2 * Q))
    C = np.zeros((M, M), dtype=complex)
    C[:N, :N] = nopa_state(params).coeff
    return complex(np.vdot(C, W1 @ C @ W2.T))


def in_isotropic_subspace(xi: Sequence[float], eta: Sequence[float], tol: float = 1e-12) -> bool:
    """(xi, eta) in S: xi1 = xi2 and eta1 = -eta2."""
    return abs(xi[0] - xi[1]) <= tol and abs(eta[0] + eta[1]) <= tol


def off_subspace_component(xi1, xi2, eta1, eta2) -> float:
    """Euclidean norm of the projection of (xi, eta) onto the complement of S."""
    return math.hypot((xi1 - xi2) / math.sqrt(2), (eta1 + eta2) / math.sqrt(2))


def reduced_purity(lam: float) -> float:
    """tr(rho_1^2) of the single-mode thermal marginal."""
    return (1 - lam**2) / (1 + lam**2)


def entropy_bits(params: NopaParams) -> float:
    return entropy(schmidt(nopa_state(params)))
