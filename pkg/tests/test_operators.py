import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infent.errors import PreconditionError, SizeError
from infent.operators import (
    ID2,
    SX,
    SZ,
    flip,
    is_density,
    partial_trace,
    partial_transpose,
    random_density,
    random_hermitian,
    random_unitary,
    root_d,
    sign_psd,
    spectral_fn,
    spectrum,
    tensor,
)
from infent.bipartite import max_entangled_projector


def test_tensor_identity_and_action():
    assert np.array_equal(tensor(np.eye(2), np.eye(3)), np.eye(6))
    ket10 = np.zeros(4)
    ket10[2] = 1
    assert np.allclose(tensor(SZ, ID2) @ ket10, -ket10)


def test_tensor_mixed_product(rng):
    A, B, C, D = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4))
    lhs = tensor(A, B) @ tensor(C, D)
    assert np.max(np.abs(lhs - tensor(A @ C, B @ D))) <= 1e-12


def test_tensor_size_cap():
    with pytest.raises(SizeError):
        tensor(np.eye(64), np.eye(64), max_entries=1000)


def test_partial_trace_examples(rng):
    assert np.allclose(partial_trace(max_entangled_projector(2), [2, 2]), np.eye(2) / 2)
    rho, sigma = random_density(3, rng), random_density(2, rng)
    assert np.allclose(partial_trace(np.kron(rho, sigma), [3, 2], 1), rho)
    ket01 = np.zeros(4)
    ket01[1] = 1
    assert np.allclose(partial_trace(np.outer(ket01, ket01), [2, 2], 0), np.diag([0, 1]))


def test_partial_trace_rejects_bad_dims():
    with pytest.raises(PreconditionError):
        partial_trace(np.eye(6), [2, 2])
    with pytest.raises(PreconditionError):
        partial_trace(np.eye(4), [2, 2], which=2)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_partial_transpose_of_projector_is_flip(d):
    pt = partial_transpose(max_entangled_projector(d), [d, d])
    assert np.max(np.abs(pt - flip(d) / d)) <= 1e-12


def test_partial_transpose_product(rng):
    rho, sigma = random_density(2, rng), random_density(3, rng)
    assert np.allclose(partial_transpose(np.kron(rho, sigma), [2, 3]), np.kron(rho, sigma.T))


def test_spectral_fn_square():
    assert np.allclose(spectral_fn(np.diag([1.0, 2.0, 3.0]), lambda w: w**2), np.diag([1, 4, 9]))


def test_spectral_fn_unitary_degenerate(rng):
    # normal but not Hermitian, with a repeated eigenvalue
    V = random_unitary(4, rng)
    U = V @ np.diag([1j, 1j, -1, 1]) @ V.conj().T
    s = spectrum(U)
    assert np.allclose(s.reconstruct(), U)
    assert np.allclose(s.eigenvectors.conj().T @ s.eigenvectors, np.eye(4))


def test_spectrum_rejects_non_normal():
    with pytest.raises(PreconditionError):
        spectrum(np.array([[1.0, 1.0], [0.0, 1.0]]))


@pytest.mark.parametrize("theta", [-3.0, -1.0, 0.0, 0.5, 3.1, np.pi])
@pytest.mark.parametrize("d", [2, 3, 5])
def test_root_d_branch(theta, d):
    z = np.exp(1j * theta) * np.ones(3)
    assert np.allclose(root_d(z, d), np.exp(1j * theta / d))


def test_root_d_tie_goes_to_plus_pi():
    assert np.isclose(root_d(np.array([-1.0 + 0j]), 2)[0], 1j)
    assert np.isclose(root_d(np.array([complex(-1.0, -0.0)]), 2)[0], 1j)


def test_sign_function_matches_polar(rng):
    H = random_hermitian(5, rng)
    w, V = np.linalg.eigh(H)
    absH_inv = V @ np.diag(1 / np.abs(w)) @ V.conj().T
    assert np.max(np.abs(sign_psd(H) - H @ absH_inv)) <= 1e-9


def test_sign_zero_goes_to_plus():
    assert np.allclose(sign_psd(np.diag([0.0, -2.0])), np.diag([1.0, -1.0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_random_density_is_density(d, seed):
    rho = random_density(d, np.random.default_rng(seed))
    assert is_density(rho)
    assert np.isclose(np.trace(partial_trace(np.kron(rho, rho), [d, d])), 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_partial_transpose_is_involution(dA, dB, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(dA * dB, dA * dB))
    for which in (0, 1):
        assert np.allclose(partial_transpose(partial_transpose(X, [dA, dB], which), [dA, dB], which), X)
    full = partial_transpose(partial_transpose(X, [dA, dB], 0), [dA, dB], 1)
    assert np.allclose(full, X.T)


def test_pauli_relations():
    assert np.allclose(SX @ SZ, -SZ @ SX)
