"""Position-grid model of two canonical modes and the branch-cut qudit extraction.

The grid is periodic with points x_i = -X + i dx, i < L. Momentum is
diagonal after ``numpy.fft.fft`` with the usual wavenumber ordering.
Operators whose spectrum lies in the d-th roots of unity carry integer
labels (exponents of zeta), so their powers are exact.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ExtentTooSmallError
from .nopa import epr_covariance
from .weyl import weyl_fidelity

DEFAULT_L = 512
DEFAULT_X = 12 * math.pi


# ------------------------------------------------------------------ spec


@dataclass(frozen=True)
class GridSpec:
    L: int
    X: float

    def __post_init__(self):
        if self.L < 2 or self.L & (self.L - 1):
            raise ValueError(f"L must be a power of two, got {self.L}")
        if self.X <= 0:
            raise ValueError("extent X must be positive")

    @property
    def dx(self) -> float:
        return 2 * self.X / self.L

    @property
    def dp(self) -> float:
        return math.pi / self.X

    @property
    def x(self) -> np.ndarray:
        return -self.X + self.dx * np.arange(self.L)

    @property
    def pi_multiple(self) -> int | None:
        """n when X = n pi exactly (up to rounding), else None."""
        n = round(self.X / math.pi)
        return n if n > 0 and abs(self.X - n * math.pi) <= 1e-12 * self.X else None

    @property
    def freq_index(self) -> np.ndarray:
        """Signed integer wavenumbers j, ordered 0..L/2-1, -L/2..-1."""
        return np.rint(np.fft.fftfreq(self.L) * self.L).astype(np.int64)

    @property
    def p(self) -> np.ndarray:
        return self.freq_index * self.dp

    def shift_steps(self, d: int) -> int:
        """Grid steps in a translation by 2 pi / d; raises if not a whole number."""
        steps = (2 * math.pi / d) / self.dx
        s = round(steps)
        if abs(steps - s) > 1e-9 * max(1.0, steps) or s == 0:
            raise ValueError(
                f"2*pi/{d} = {2 * math.pi / d:.6g} is not a multiple of dx = {self.dx:.6g}"
            )
        return s

    @classmethod
    def for_d(cls, d: int, L: int = DEFAULT_L, X: float = DEFAULT_X) -> tuple["GridSpec", float]:
        """Spec compatible with d, moving X as little as possible; returns (spec, X change).

        Preferred extents are X = n pi with n dividing L/d: then 2 pi / d is a grid
        multiple and translation by 2 pi commutes with the position labels across
        the periodic seam, which makes V U = zeta U V hold to rounding. When d does
        not divide L no such n exists and X only makes 2 pi / d a grid multiple.
        """
        if L % d == 0:
            ns = [n for n in range(1, L // d + 1) if (L // d) % n == 0]
            n = min(ns, key=lambda n: (abs(n * math.pi - X), -n))
            new_X = n * math.pi
        else:
            k = max(1, round(math.pi * L / (d * X)))
            new_X = math.pi * L / (d * k)
        spec = cls(L, new_X)
        spec.shift_steps(d)
        return spec, new_X - X

    @property
    def commensurate(self) -> bool:
        return self.pi_multiple is not None


# -------------------------------------------------------------- operators


class _Factor:
    def apply(self, psi: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class DiagonalPhase(_Factor):
    """Multiplication by ``values`` along one mode, in position or momentum representation.

    When ``labels`` is set the values are zeta^labels exactly.
    """

    mode: int
    basis: str  # "x" or "p"
    values: np.ndarray
    labels: np.ndarray | None = None
    d: int | None = None

    @classmethod
    def from_labels(cls, mode: int, basis: str, labels: np.ndarray, d: int) -> "DiagonalPhase":
        labels = np.mod(labels, d)
        return cls(mode, basis, np.exp(2j * np.pi * labels / d), labels, d)

    def apply(self, psi):
        if self.labels is not None and not self.labels.any():
            return psi  # zeta^0: exact identity, no Fourier round trip
        shape = [1, 1]
        shape[self.mode] = -1
        v = self.values.reshape(shape)
        if self.basis == "x":
            return psi * v
        return np.fft.ifft(np.fft.fft(psi, axis=self.mode) * v, axis=self.mode)

    def power(self, n: int) -> "DiagonalPhase":
        if self.labels is not None:
            return DiagonalPhase.from_labels(self.mode, self.basis, self.labels * n, self.d)
        return DiagonalPhase(self.mode, self.basis, self.values**n)

    def inv(self) -> "DiagonalPhase":
        if self.labels is not None:
            return DiagonalPhase.from_labels(self.mode, self.basis, -self.labels, self.d)
        return DiagonalPhase(self.mode, self.basis, np.conj(self.values))

    def is_identity(self) -> bool:
        if self.labels is not None:
            return bool(np.all(self.labels == 0))
        return bool(np.all(self.values == 1))


@dataclass(frozen=True)
class Translation(_Factor):
    """(T psi)(x) = psi(x + steps*dx) along one mode, as an exact periodic roll."""

    mode: int
    steps: int
    L: int

    def apply(self, psi):
        return np.roll(psi, -self.steps, axis=self.mode)

    def power(self, n: int) -> "Translation":
        return Translation(self.mode, self.steps * n, self.L)

    def inv(self) -> "Translation":
        return Translation(self.mode, -self.steps, self.L)

    def is_identity(self) -> bool:
        return self.steps % self.L == 0


@dataclass(frozen=True)
class GridOperator:
    """Product of factors; ``factors[0]`` is leftmost (applied last)."""

    factors: tuple[_Factor, ...]
    L: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.L * self.L, self.L * self.L)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        for f in reversed(self.factors):
            psi = f.apply(psi)
        return psi

    def __matmul__(self, other):
        if isinstance(other, GridOperator):
            return GridOperator(self.factors + other.factors, self.L)
        return self.apply(other)

    def __pow__(self, n: int) -> "GridOperator":
        if n < 0:
            return self.inv() ** (-n)
        if len(self.factors) == 1:
            return GridOperator((self.factors[0].power(n),), self.L)
        return GridOperator(self.factors * n, self.L)

    def inv(self) -> "GridOperator":
        return GridOperator(tuple(f.inv() for f in reversed(self.factors)), self.L)

    def is_identity(self) -> bool:
        return all(f.is_identity() for f in self.factors)


def _op(factor: _Factor, L: int) -> GridOperator:
    return GridOperator((factor,), L)


def _nearest_label(q: np.ndarray) -> np.ndarray:
    """Integer k with q - k in [-1/2, 1/2): the label picked by the branch cut."""
    return np.ceil(q - 0.5).astype(np.int64)


def _position_labels(spec: GridSpec, d: int, offset: float) -> np.ndarray:
    """Branch-cut labels of d*x/(2 pi); exact integer arithmetic on commensurate grids.

    Grid points can sit exactly on a cut, so float rounding would give x and
    x + 2 pi inconsistent labels there.
    """
    n = spec.pi_multiple
    if n is None or offset != 0.0:
        return _nearest_label(d * (spec.x - offset) / (2 * np.pi))
    L = spec.L
    # d x / (2 pi) = d n (2i - L) / (2L); label = ceil(that - 1/2).
    num = d * n * (2 * np.arange(L, dtype=np.int64) - L) - L
    return -((-num) // (2 * L))


@dataclass(frozen=True)
class GridOps:
    d: int
    a: float
    spec: GridSpec
    Utilde1: GridOperator
    Utilde2: GridOperator
    Vtilde1: GridOperator
    Vtilde2: GridOperator
    Uhat1: GridOperator
    Uhat2: GridOperator
    Vhat1: GridOperator
    Vhat2: GridOperator
    U1: GridOperator
    U2: GridOperator
    V1: GridOperator
    V2: GridOperator
    adjustment: float = field(default=0.0)

    @property
    def zeta(self) -> complex:
        return np.exp(2j * np.pi / self.d)


def build_ops(spec: GridSpec, d: int, a: float = 0.0) -> GridOps:
    """Weyl operators e^{iQ}, e^{i xi P}, their branch-cut d-th roots and the periodic U_k, V_k."""
    s = spec.shift_steps(d)
    L = spec.L
    x = spec.x
    ops = {}
    for mode, offset in ((0, 0.0), (1, a)):
        k = mode + 1
        q = x - offset
        ops[f"Utilde{k}"] = _op(DiagonalPhase(mode, "x", np.exp(1j * q)), L)
        # e^{i d q} = e^{i theta} zeta^{d m}, theta in (-pi, pi]: m is the root-of-unity label of U_k.
        m = _position_labels(spec, d, offset)
        theta = d * q - 2 * np.pi * m
        ops[f"Uhat{k}"] = _op(DiagonalPhase(mode, "x", np.exp(1j * theta / d)), L)
        ops[f"U{k}"] = _op(DiagonalPhase.from_labels(mode, "x", m, d), L)

        ops[f"Vtilde{k}"] = _op(Translation(mode, s, L), L)
        # Translation by s steps has eigenvalue exp(2 pi i j s / L); its d-th power has phase
        # 2 pi j s d / L, whose branch-cut label is computed in exact integer arithmetic.
        j = spec.freq_index
        num = 2 * j * s * d - L  # label = ceil((j s d / L) - 1/2) = ceil(num / (2L))
        kp = -((-num) // (2 * L))
        phase_d = 2 * np.pi * (j * s * d - kp * L) / L
        ops[f"Vhat{k}"] = _op(DiagonalPhase(mode, "p", np.exp(1j * phase_d / d)), L)
        ops[f"V{k}"] = _op(DiagonalPhase.from_labels(mode, "p", kp, d), L)
    return GridOps(d=d, a=a, spec=spec, **ops)


# ------------------------------------------------------------------ states


@dataclass(frozen=True)
class GridState:
    spec: GridSpec
    psi: np.ndarray  # psi[i1, i2] ~ Psi(x_i1, x_i2)
    boundary_mass: float
    flagged: bool

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2)) * self.spec.dx)

    def expect(self, op) -> complex:
        return complex(np.vdot(self.psi, op @ self.psi) * self.spec.dx**2)

    def probability(self) -> np.ndarray:
        return np.abs(self.psi) ** 2 * self.spec.dx**2


def boundary_mass(spec: GridSpec, psi: np.ndarray, frac: float = 0.05) -> float:
    edge = np.abs(spec.x) >= (1 - frac) * spec.X
    prob = np.abs(psi) ** 2 * spec.dx**2
    inner = prob[~edge][:, ~edge].sum()
    return float(prob.sum() - inner)


def required_extent(r: float, a: float = 0.0, sigmas: float = 7.0) -> float:
    """Extent that holds the wide (Q1 + Q2) direction to ``sigmas`` standard deviations."""
    sd = math.sqrt(math.cosh(2 * r) / 2)
    return (sigmas * sd + abs(a)) / 0.95


def gaussian_wavefunction(spec: GridSpec, lam: float, a: float = 0.0, convention: str = "fock") -> np.ndarray:
    """Unnormalized two-mode Gaussian on the grid, mode 2 displaced by ``a``.

    ``convention="fock"`` squeezes q1 - q2, matching the Fock expansion with
    lam > 0; ``convention="literal"`` swaps the roles of q1 - q2 and q1 + q2.
    """
    x1 = spec.x[:, None]
    x2 = spec.x[None, :] - a
    u, v = x1 - x2, x1 + x2
    narrow = (1 + lam) / (4 * (1 - lam))
    wide = (1 - lam) / (4 * (1 + lam))
    if convention == "fock":
        return np.exp(-narrow * u**2 - wide * v**2).astype(complex)
    if convention == "literal":
        return np.exp(-wide * u**2 - narrow * v**2).astype(complex)
    raise ValueError(f"unknown convention {convention!r}")


def grid_nopa(
    spec: GridSpec,
    lam: float,
    a: float = 0.0,
    convention: str = "fock",
    boundary_threshold: float = 1e-8,
    hard_limit: float = 1e-2,
) -> GridState:
    """Normalized Psi_lam on the grid; flags boundary mass above ``boundary_threshold``."""
    if not 0 <= lam < 1:
        raise ValueError("lambda must lie in [0, 1)")
    psi = gaussian_wavefunction(spec, lam, a, convention)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2)) * spec.dx
    mass = boundary_mass(spec, psi)
    if mass > hard_limit:
        r = math.atanh(lam)
        raise ExtentTooSmallError(
            f"extent too small: boundary mass {mass:.3g}; need X >= {required_extent(r, a):.4g}"
        )
    return GridState(spec, psi, mass, mass > boundary_threshold)


def grid_moments(state: GridState) -> dict[str, float]:
    """Variances of Q1 - Q2 and Q1 + Q2 from the position probabilities."""
    prob = state.probability()
    x1 = state.spec.x[:, None]
    x2 = state.spec.x[None, :]
    out = {}
    for name, z in (("var_qdiff", x1 - x2), ("var_qsum", x1 + x2), ("var_q1", x1 + 0 * x2), ("var_q2", x2 + 0 * x1)):
        mean = np.sum(prob * z)
        out[name] = float(np.sum(prob * z * z) - mean**2)
    return out


def hermite_functions(x: np.ndarray, N: int) -> np.ndarray:
    """Oscillator eigenfunctions psi_0..psi_{N-1} at ``x`` (rows), by the stable recurrence."""
    H = np.zeros((N, len(x)))
    H[0] = np.pi**-0.25 * np.exp(-x * x / 2)
    if N > 1:
        H[1] = np.sqrt(2) * x * H[0]
    for n in range(1, N - 1):
        H[n + 1] = np.sqrt(2 / (n + 1)) * x * H[n] - np.sqrt(n / (n + 1)) * H[n - 1]
    return H


def fock_to_grid(spec: GridSpec, coeff: np.ndarray) -> np.ndarray:
    """Map Fock coefficients c[n1, n2] to Psi(x1, x2) on the grid."""
    H = hermite_functions(spec.x, coeff.shape[0])
    return H.T @ coeff @ H


def grid_overlap(state: GridState, other: np.ndarray) -> float:
    """|<state, other>| with ``other`` normalized on the grid."""
    dx = state.spec.dx
    other = other / (np.sqrt(np.sum(np.abs(other) ** 2)) * dx)
    return float(abs(np.vdot(state.psi, other)) * dx**2)


# -------------------------------------------------------------- diagnostics


def commutation_residual(ops: GridOps, psi: np.ndarray, dx: float, mode: int = 1) -> float:
    """||V U psi - zeta U V psi|| for mode 1 or 2, with psi normalized on the grid."""
    U = ops.U1 if mode == 1 else ops.U2
    V = ops.V1 if mode == 1 else ops.V2
    diff = V @ (U @ psi) - ops.zeta * (U @ (V @ psi))
    return float(np.sqrt(np.sum(np.abs(diff) ** 2)) * dx)


def hat_defects(ops: GridOps, state: GridState) -> dict[str, float]:
    """omega(|Uhat1 - Uhat2|^2) and omega(|Vhat1 - Vhat2^dag|^2)."""
    psi, dx = state.psi, state.spec.dx
    du = ops.Uhat1 @ psi - ops.Uhat2 @ psi
    dv = ops.Vhat1 @ psi - ops.Vhat2.inv() @ psi
    return {
        "uhat": float(np.sum(np.abs(du) ** 2) * dx**2),
        "vhat": float(np.sum(np.abs(dv) ** 2) * dx**2),
    }


def grid_extraction_fidelity(
    spec: GridSpec, lam: float, d: int, a: float = 0.0, state: GridState | None = None
) -> complex:
    """(1/d^2) sum_{n,m} <Psi|(U1 U2^{-1})^n (V1 V2)^m|Psi> on the grid."""
    ops = build_ops(spec, d, a)
    state = grid_nopa(spec, lam, a) if state is None else state
    return weyl_fidelity(state.expect, ops.U1, ops.V1, ops.U2, ops.V2, d)


def covariance_check(state: GridState, r: float) -> float:
    """|grid Var(Q1 - Q2) - closed form|."""
    return abs(grid_moments(state)["var_qdiff"] - epr_covariance(r)["var_qdiff"])


# ----------------------------------------------------------------- file IO

MAGIC = b"EPRG"
VERSION = 1
_HEADER = struct.Struct("<4sIId")


def write_grid_state(path: str | Path, state: GridState) -> None:
    """Header (magic, version u32, L u32, X f64) then row-major complex64, little-endian."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, state.spec.L, state.spec.X))
        fh.write(np.ascontiguousarray(state.psi, dtype="<c8").tobytes())


def read_grid_state(path: str | Path, boundary_threshold: float = 1e-8) -> GridState:
    data = Path(path).read_bytes()
    magic, version, L, X = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"not a grid state file (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"unsupported grid file version {version}")
    expected = _HEADER.size + 8 * L * L
    if len(data) != expected:
        raise ValueError(f"grid file has {len(data)} bytes, expected {expected}")
    psi = np.frombuffer(data, dtype="<c8", offset=_HEADER.size).reshape(L, L).astype(complex)
    spec = GridSpec(L, X)
    mass = boundary_mass(spec, psi)
    return GridState(spec, psi, mass, mass > boundary_threshold)


def sweep_fidelity(spec: GridSpec, rs: Sequence[float], d: int) -> list[float]:
    return [grid_extraction_fidelity(spec, math.tanh(r), d).real for r in rs]
