"""Discrete Weyl systems on Z_d x Z_d and the Weyl-sum fidelity."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .operators import assert_unitary


@dataclass(frozen=True)
class WeylIndex:
    n1: int
    m1: int
    n2: int
    m2: int
    d: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be at least 2")
        for name in ("n1", "m1", "n2", "m2"):
            object.__setattr__(self, name, getattr(self, name) % self.d)

    @property
    def zeta(self) -> complex:
        return np.exp(2j * np.pi / self.d)

    def __add__(self, other: "WeylIndex") -> "WeylIndex":
        return WeylIndex(self.n1 + other.n1, self.m1 + other.m1, self.n2 + other.n2, self.m2 + other.m2, self.d)


def zeta_power(k, d: int):
    """zeta**k evaluated from the reduced exponent, so equal exponents give equal floats."""
    return np.exp(2j * np.pi * (np.asarray(k) % d) / d)


def weyl_op(idx: WeylIndex) -> np.ndarray:
    """w|k, l> = zeta^{n1 (k - m1) + n2 (l - m2)} |k - m1, l - m2> on C^d (x) C^d."""
    d = idx.d
    W = np.zeros((d * d, d * d), dtype=complex)
    for k in range(d):
        for l in range(d):
            k2, l2 = (k - idx.m1) % d, (l - idx.m2) % d
            W[k2 * d + l2, k * d + l] = zeta_power(idx.n1 * k2 + idx.n2 * l2, d)
    return assert_unitary(W)


def single_weyl(n: int, m: int, d: int) -> np.ndarray:
    """One-factor Weyl operator u^n v^m ordering-equivalent: |k> -> zeta^{n(k-m)} |k-m>."""
    W = np.zeros((d, d), dtype=complex)
    for k in range(d):
        k2 = (k - m) % d
        W[k2, k] = zeta_power(n * k2, d)
    return W


def generators(d: int) -> dict[str, np.ndarray]:
    """u1, v1, u2, v2 on C^d (x) C^d."""
    return {
        "u1": weyl_op(WeylIndex(1, 0, 0, 0, d)),
        "v1": weyl_op(WeylIndex(0, 1, 0, 0, d)),
        "u2": weyl_op(WeylIndex(0, 0, 1, 0, d)),
        "v2": weyl_op(WeylIndex(0, 0, 0, 1, d)),
    }


def max_ent_projector_weyl(d: int) -> np.ndarray:
    """(1/d^2) sum_{n,m} w(n, m, -n, m)."""
    if d < 2:
        raise ValueError("d must be at least 2")
    P = sum(weyl_op(WeylIndex(n, m, -n, m, d)) for n in range(d) for m in range(d))
    return P / d**2


def _inverse(X):
    if isinstance(X, np.ndarray):
        return np.linalg.inv(X)
    return X.inv()


def _power(X, n: int):
    if isinstance(X, np.ndarray):
        return np.linalg.matrix_power(X, n)
    return X**n


def _shape(X):
    return X.shape if isinstance(X, np.ndarray) else getattr(X, "shape", None)


def relation_residuals(U: Any, V: Any, d: int, apply: Callable | None = None, psi=None) -> dict[str, float]:
    """How far (U, V) are from V U = zeta U V and U^d = V^d = 1.

    Dense matrices are checked in operator norm; other operators on the test
    vector ``psi`` through ``apply(op, psi)``.
    """
    z = np.exp(2j * np.pi / d)
    if isinstance(U, np.ndarray):
        eye = np.eye(U.shape[0])
        return {
            "commutation": float(np.linalg.norm(V @ U - z * U @ V, 2)),
            "u_period": float(np.linalg.norm(_power(U, d) - eye, 2)),
            "v_period": float(np.linalg.norm(_power(V, d) - eye, 2)),
        }
    lhs = apply(V @ U, psi)
    rhs = z * apply(U @ V, psi)
    return {
        "commutation": float(np.linalg.norm(lhs - rhs)),
        "u_period": float(np.linalg.norm(apply(U**d, psi) - psi)),
        "v_period": float(np.linalg.norm(apply(V**d, psi) - psi)),
    }


def weyl_fidelity(expect: Callable[[Any], complex], U1, V1, U2, V2, d: int) -> complex:
    """(1/d^2) sum_{n,m} omega((U1 U2^{-1})^n (V1 V2)^m).

    ``expect`` maps an operator word to its expectation. The operators may be
    dense matrices or any objects with ``@``, ``**`` and ``inv()``.
    """
    shapes = {_shape(X) for X in (U1, V1, U2, V2)}
    if len(shapes) != 1:
        raise ValueError(f"operators have mismatched shapes {shapes}")
    X = U1 @ _inverse(U2)
    Y = V1 @ V2
    total = 0.0 + 0.0j
    for n in range(d):
        Xn = _power(X, n)
        for m in range(d):
            total += expect(Xn @ _power(Y, m))
    return complex(total / d**2)


def density_evaluator(rho: np.ndarray) -> Callable[[np.ndarray], complex]:
    return lambda X: complex(np.trace(rho @ X))


def vector_evaluator(psi: np.ndarray) -> Callable[[np.ndarray], complex]:
    return lambda X: complex(np.vdot(psi, X @ psi))
