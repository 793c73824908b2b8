import math

import numpy as np
import pytest

from infent.errors import ExtentTooSmallError
from infent.grid import (
    GridSpec,
    build_ops,
    commutation_residual,
    fock_to_grid,
    grid_extraction_fidelity,
    grid_moments,
    grid_nopa,
    grid_overlap,
    hat_defects,
    read_grid_state,
    required_extent,
    write_grid_state,
)
from infent.nopa import NopaParams, nopa_state
from infent.weyl import relation_residuals

# grid oracle, frozen: d = 2 on the adjusted default spec (L = 512, X = 16 pi)
FROZEN_FIDELITY = {0: 0.4763556588048363, 1: 0.6416075870004863, 2: 0.8582499836771327, 3: 0.9346752188476455}

SPEC12 = GridSpec(512, 12 * math.pi)


@pytest.fixture(scope="module")
def default2():
    spec, _ = GridSpec.for_d(2)
    return spec, build_ops(spec, 2)


def test_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(500, 10.0)
    with pytest.raises(ValueError):
        GridSpec(512, -1.0)
    with pytest.raises(ValueError):
        SPEC12.shift_steps(2)  # pi is not a multiple of dx = 3 pi / 64


def test_for_d_adjustments():
    for d in (2, 4):
        spec, adj = GridSpec.for_d(d)
        assert spec.commensurate and spec.X == 16 * math.pi
        assert adj == pytest.approx(4 * math.pi)
    spec3, adj3 = GridSpec.for_d(3)
    assert not spec3.commensurate
    assert spec3.shift_steps(3) == 14
    assert abs(adj3) < 1


@pytest.mark.parametrize("d", [2, 3, 4])
def test_periodicity_exact(d):
    spec, _ = GridSpec.for_d(d)
    ops = build_ops(spec, d)
    for U, V in ((ops.U1, ops.V1), (ops.U2, ops.V2)):
        assert (U**d).is_identity() and (V**d).is_identity()
    psi = grid_nopa(spec, 0.5).psi
    assert np.array_equal((ops.U1**d) @ psi, psi)
    assert np.array_equal((ops.V2**d) @ psi, psi)


def test_U_values_are_roots_of_unity(default2):
    spec, ops = default2
    psi = np.ones((spec.L, spec.L), dtype=complex)
    vals = (ops.U1 @ psi)[:, 0]
    assert np.allclose(vals**2, 1)
    assert set(np.round(vals.real).astype(int)) == {-1, 1}


def test_hat_commutes_with_tilde(default2):
    spec, ops = default2
    # both diagonal in position; complex products differ only in the last bit
    a, b = ops.Uhat1.factors[0], ops.Utilde1.factors[0]
    assert a.basis == b.basis == "x"
    psi = grid_nopa(spec, 0.7).psi
    lhs = ops.Uhat1 @ (ops.Utilde1 @ psi)
    rhs = ops.Utilde1 @ (ops.Uhat1 @ psi)
    assert np.max(np.abs(lhs - rhs)) <= 1e-15


@pytest.mark.parametrize("d", [2, 4])
@pytest.mark.parametrize("r", [0.0, 1.0, 3.0])
def test_commutation_on_commensurate_grid(d, r):
    spec, _ = GridSpec.for_d(d)
    ops = build_ops(spec, d)
    st = grid_nopa(spec, math.tanh(r))
    for mode in (1, 2):
        assert commutation_residual(ops, st.psi, spec.dx, mode) <= 1e-3
    res = relation_residuals(ops.U1, ops.V1, d, apply=lambda op, v: op @ v, psi=st.psi)
    assert res["u_period"] == 0 and res["v_period"] == 0


def test_vacuum_moments():
    m = grid_moments(grid_nopa(SPEC12, 0.0))
    assert abs(m["var_q1"] - 0.5) <= 1e-6 and abs(m["var_q2"] - 0.5) <= 1e-6


def test_squeezed_moments():
    lam = 0.9
    m = grid_moments(grid_nopa(SPEC12, lam))
    assert abs(m["var_qdiff"] - (1 - lam) / (1 + lam)) <= 1e-4
    assert (1 - lam) / (1 + lam) == pytest.approx(0.052632, abs=1e-6)


def test_fock_overlap_settles_convention():
    c = nopa_state(NopaParams.from_lambda(0.5, 64)).coeff
    target = fock_to_grid(SPEC12, c)
    assert grid_overlap(grid_nopa(SPEC12, 0.5), target) >= 1 - 1e-6
    literal = grid_overlap(grid_nopa(SPEC12, 0.5, convention="literal"), target)
    assert literal == pytest.approx((1 - 0.25) / (1 + 0.25), abs=1e-9)


def test_extent_errors():
    small = GridSpec(64, 4.0)
    with pytest.raises(ExtentTooSmallError, match="extent too small"):
        grid_nopa(small, math.tanh(3.0))
    st = grid_nopa(SPEC12, math.tanh(3.0))
    assert st.flagged and st.boundary_mass < 1e-2
    assert required_extent(3.0) > 7 * math.sqrt(math.cosh(6) / 2)


def test_fidelity_regression(default2):
    spec, _ = default2
    values = {r: grid_extraction_fidelity(spec, math.tanh(r), 2).real for r in FROZEN_FIDELITY}
    for r, v in values.items():
        assert v == pytest.approx(FROZEN_FIDELITY[r], abs=1e-9)
    assert values[0] < 0.75
    assert values[1] <= values[2] <= values[3]
    assert values[3] >= 0.9


def test_hat_defects_decrease(default2):
    spec, ops = default2
    u, v = [], []
    for r in (1.0, 2.0, 3.0):
        h = hat_defects(ops, grid_nopa(spec, math.tanh(r)))
        u.append(h["uhat"])
        v.append(h["vhat"])
    assert u[0] > u[1] > u[2]
    assert v[0] > v[1] > v[2]


def test_displacement_keeps_doubles():
    spec, _ = GridSpec.for_d(2)
    a = 1.3
    F0 = grid_extraction_fidelity(spec, math.tanh(2.0), 2, a=0.0).real
    Fa = grid_extraction_fidelity(spec, math.tanh(2.0), 2, a=a).real
    assert Fa > 0.5 and abs(Fa - F0) < 0.2


def test_binary_round_trip(tmp_path):
    spec = GridSpec(64, 4 * math.pi)
    st = grid_nopa(spec, 0.4)
    path = tmp_path / "state.eprg"
    write_grid_state(path, st)
    raw = path.read_bytes()
    assert raw[:4] == b"EPRG" and len(raw) == 4 + 4 + 4 + 8 + 8 * 64 * 64
    back = read_grid_state(path)
    assert back.spec == spec
    assert np.allclose(back.psi, st.psi, atol=1e-6)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        read_grid_state(path)
