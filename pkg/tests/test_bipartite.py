import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infent.bipartite import (
    BipartitePureState,
    divergent_family,
    entropy,
    fidelity,
    isotropic_state,
    max_entangled,
    max_entangled_projector,
    max_product_fidelity,
    nopa_entropy_closed_form,
    ppt_fidelity_bound_check,
    product_state,
    random_product_state,
    schmidt,
    singlet,
)
from infent.errors import PreconditionError
from infent.operators import partial_transpose, random_vector


def test_schmidt_diagonal():
    s = schmidt(BipartitePureState(np.diag([1, 1]) / math.sqrt(2)))
    assert np.allclose(s.coefficients, [1 / math.sqrt(2)] * 2)


def test_schmidt_product(rng):
    u, v = random_vector(3, rng), random_vector(3, rng)
    s = schmidt(product_state(u, v.conj()))
    assert np.allclose(s.coefficients, [1, 0, 0])
    assert s.rank == 1


def test_schmidt_matches_reduced_spectrum(rng):
    psi = BipartitePureState.from_vector(random_vector(16, rng), (4, 4))
    s = schmidt(psi)
    assert abs(np.sum(s.coefficients**2) - 1) <= 1e-12
    eig = np.sort(np.linalg.eigvalsh(psi.reduced_alice()))[::-1]
    assert np.max(np.abs(s.coefficients**2 - eig)) <= 1e-10
    assert np.allclose(s.reconstruct(), psi.coeff)


def test_schmidt_requires_normalized():
    with pytest.raises(PreconditionError):
        schmidt(BipartitePureState(np.eye(2)))


def test_entropy_examples(rng):
    assert math.isclose(entropy(schmidt(max_entangled(2))), 1.0)
    assert entropy(schmidt(random_product_state(3, rng))) == pytest.approx(0.0, abs=1e-12)
    expected = -math.log2(0.75) - (1 / 3) * math.log2(0.25)
    assert math.isclose(nopa_entropy_closed_form(0.5), expected, rel_tol=1e-14)
    assert expected == pytest.approx(1.0817041659455104, abs=1e-12)


def test_nopa_entropy_direct_sum():
    lam = 0.5
    n = np.arange(200)
    p = (1 - lam**2) * lam ** (2 * n)
    assert math.isclose(-np.sum(p * np.log2(p)), nopa_entropy_closed_form(lam), rel_tol=1e-13)


@pytest.mark.parametrize("kind", ["amplitude", "probability"])
def test_divergent_family_monotone(kind):
    values = [entropy(divergent_family(N, kind)) for N in (100, 1000, 10000)]
    assert values[0] < values[1] < values[2]
    for N in (100, 1000, 10000):
        c = divergent_family(N, kind).coefficients
        assert abs(np.sum(c**2) - 1) <= 1e-12
        assert np.all(np.diff(c) < 0)


def test_divergent_family_frozen_values():
    # direct summation oracle, frozen
    assert entropy(divergent_family(100)) == pytest.approx(0.5648176223501664, abs=1e-12)
    assert entropy(divergent_family(10000, "probability")) == pytest.approx(3.56860999225953, abs=1e-10)


def test_divergent_family_rejects_small_N():
    with pytest.raises(ValueError):
        divergent_family(1)


@pytest.mark.parametrize("d", range(2, 9))
def test_projector_identities(d):
    p = max_entangled_projector(d)
    assert np.allclose(p @ p, p)
    assert math.isclose(np.trace(p).real, 1.0)
    w = np.linalg.eigvalsh(partial_transpose(p, [d, d]))
    assert np.allclose(np.abs(w), 1 / d)


def test_fidelity_examples(rng):
    d = 3
    assert math.isclose(fidelity(max_entangled_projector(d), d), 1.0)
    assert math.isclose(fidelity(np.eye(d * d) / d**2, d), 1 / d**2)
    for _ in range(50):
        assert fidelity(random_product_state(d, rng).density(), d) <= 1 / d + 1e-12
    u = random_vector(d, rng)
    assert math.isclose(fidelity(product_state(u, u.conj()).density(), d), 1 / d)


def test_fidelity_rejects_wrong_dims():
    with pytest.raises(PreconditionError):
        fidelity(np.eye(4) / 4, 3)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_ppt_examples(d, rng):
    assert not ppt_fidelity_bound_check(isotropic_state(1 / d + 0.1, d), d).is_ppt
    assert ppt_fidelity_bound_check(isotropic_state(1 / d, d), d).is_ppt
    assert not ppt_fidelity_bound_check(max_entangled_projector(d), d).is_ppt
    for _ in range(1000):
        rep = ppt_fidelity_bound_check(random_product_state(d, rng).density(), d)
        assert rep.is_ppt and rep.bound_respected


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_ppt_states_respect_bound(d, F, seed):
    rho = isotropic_state(F, d)
    rep = ppt_fidelity_bound_check(rho, d)
    assert rep.bound_respected
    assert rep.is_ppt == (F <= 1 / d + 1e-10)


def test_max_product_fidelity_is_tight(rng):
    for d in (2, 3, 4):
        best = max_product_fidelity(d, 1000, rng)
        assert best <= 1 / d + 1e-9
        assert best >= 1 / d - 1e-3


def test_singlet_sign():
    v = singlet().vector
    assert np.allclose(v, np.array([0, 1, -1, 0]) / math.sqrt(2))
