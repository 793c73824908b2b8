"""CHSH correlations, see-saw maximization and the per-pair test operators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import ChainObservable
from .errors import PreconditionError
from .operators import (
    SX,
    SZ,
    check_density,
    op_norm,
    partial_trace,
    random_hermitian,
    sign_psd,
)

CIRELSON = float(np.sqrt(2))
CONTRACTION_TOL = 1e-10


@dataclass(frozen=True)
class ChshWitness:
    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    beta: float = float("nan")
    history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        for name in ("A1", "A2", "B1", "B2"):
            X = np.asarray(getattr(self, name), dtype=complex)
            if np.max(np.abs(X - X.conj().T)) > 1e-12:
                raise PreconditionError(f"{name} is not Hermitian")
            w = np.linalg.eigvalsh((X + X.conj().T) / 2)
            if w[0] < -1 - CONTRACTION_TOL or w[-1] > 1 + CONTRACTION_TOL:
                raise PreconditionError(f"{name} is not a contraction")
            object.__setattr__(self, name, X)

    @property
    def dims(self) -> tuple[int, int]:
        return self.A1.shape[0], self.B1.shape[0]

    def chsh_operator(self) -> np.ndarray:
        """A1 (B1 + B2) + A2 (B1 - B2), without the 1/2."""
        return np.kron(self.A1, self.B1 + self.B2) + np.kron(self.A2, self.B1 - self.B2)

    def with_beta(self, beta: float, history=()) -> "ChshWitness":
        return ChshWitness(self.A1, self.A2, self.B1, self.B2, float(beta), tuple(history))


def tsirelson_witness(dA: int = 2, dB: int = 2) -> ChshWitness:
    """Optimal singlet observables, embedded in the top-left 2x2 blocks."""

    def embed(X, d):
        out = np.zeros((d, d), dtype=complex)
        out[:2, :2] = X
        return out

    r = 1 / np.sqrt(2)
    return ChshWitness(
        embed(SX, dA),
        embed(SZ, dA),
        embed(-(SX + SZ) * r, dB),
        embed((SZ - SX) * r, dB),
    )


def random_witness(dA: int, dB: int, rng: np.random.Generator) -> ChshWitness:
    def contraction(d):
        H = random_hermitian(d, rng)
        return H / op_norm(H)

    return ChshWitness(contraction(dA), contraction(dA), contraction(dB), contraction(dB))


def chsh_expectation(rho: np.ndarray, w: ChshWitness) -> float:
    """omega(T) for the CHSH test operator T."""
    return float(np.real(np.trace(rho @ w.chsh_operator())))


def beta_eval(rho: np.ndarray, w: ChshWitness) -> float:
    """beta = omega(T) / 2."""
    dA, dB = w.dims
    if rho.shape != (dA * dB, dA * dB):
        raise PreconditionError(f"density of shape {rho.shape} does not match witness dims {w.dims}")
    return 0.5 * chsh_expectation(rho, w)


def _alice_update(rho, dims, B1, B2):
    dA, dB = dims
    K1 = partial_trace(rho @ np.kron(np.eye(dA), B1 + B2), dims, 1)
    K2 = partial_trace(rho @ np.kron(np.eye(dA), B1 - B2), dims, 1)
    # tr(rho (A (x) X)) = tr(A K) with K Hermitian up to rounding.
    return sign_psd((K1 + K1.conj().T) / 2), sign_psd((K2 + K2.conj().T) / 2)


def _bob_update(rho, dims, A1, A2):
    dA, dB = dims
    K1 = partial_trace(rho @ np.kron(A1 + A2, np.eye(dB)), dims, 0)
    K2 = partial_trace(rho @ np.kron(A1 - A2, np.eye(dB)), dims, 0)
    return sign_psd((K1 + K1.conj().T) / 2), sign_psd((K2 + K2.conj().T) / 2)


def seesaw(rho: np.ndarray, init: ChshWitness, max_iters: int = 200, tol: float = 1e-12) -> ChshWitness:
    """Alternating maximization from ``init``; ``history`` holds beta after every half-step."""
    dims = init.dims
    A1, A2, B1, B2 = init.A1, init.A2, init.B1, init.B2
    w = init
    beta = beta_eval(rho, w)
    history = [beta]
    for _ in range(max_iters):
        A1, A2 = _alice_update(rho, dims, B1, B2)
        history.append(beta_eval(rho, ChshWitness(A1, A2, B1, B2)))
        B1, B2 = _bob_update(rho, dims, A1, A2)
        w = ChshWitness(A1, A2, B1, B2)
        new = beta_eval(rho, w)
        history.append(new)
        if new - beta < tol:
            beta = max(beta, new)
            break
        beta = new
    return w.with_beta(history[-1], history)


def beta_optimize(
    rho: np.ndarray,
    init: ChshWitness | None = None,
    max_iters: int = 200,
    tol: float = 1e-12,
    restarts: int = 8,
    seed: int = 0,
    dims: tuple[int, int] | None = None,
) -> ChshWitness:
    """Best see-saw result over ``init`` (default: embedded Tsirelson witness) and random restarts.

    Ties are broken in favour of the earlier start (``init`` first, then restart index).
    """
    rho = check_density(rho)
    if dims is None:
        if init is None:
            d = int(round(np.sqrt(rho.shape[0])))
            if d * d != rho.shape[0]:
                raise PreconditionError("cannot infer local dimensions; pass dims")
            dims = (d, d)
        else:
            dims = init.dims
    starts = [init if init is not None else tsirelson_witness(*dims)]
    rng = np.random.default_rng(seed)
    starts += [random_witness(*dims, rng) for _ in range(restarts)]
    best = None
    for start in starts:
        w = seesaw(rho, start, max_iters, tol)
        if best is None or w.beta > best.beta:
            best = w
    return best


def test_operator_sequence(M: int, k: int, w: ChshWitness | None = None) -> ChainObservable:
    """CHSH test operator T_k on pair ``k`` of an M-pair window."""
    if not 0 <= k <= M:
        raise ValueError(f"pair index {k} outside window of size {M}")
    w = tsirelson_witness() if w is None else w
    if w.dims != (2, 2):
        raise PreconditionError("chain test operators need a qubit witness")
    return ChainObservable({k: w.chsh_operator()})


test_operator_sequence.__test__ = False  # keep pytest from collecting it
