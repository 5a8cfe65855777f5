import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vdsample.density import (DensityError, DensityGrid, K_value, bound_iid, bound_markov,
                              bound_mixed, deterministic_set, optimal_density,
                              polynomial_density, restrict_and_renormalize)
from vdsample.transforms import AcquisitionModel, WaveletSpec

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def haar8():
    return AcquisitionModel.build((8, 8), WaveletSpec("haar", 2))


@pytest.fixture(scope="module")
def sym16():
    return AcquisitionModel.build((16, 16), WaveletSpec("sym10", 3))


def test_density_invariants():
    with pytest.raises(DensityError):
        DensityGrid((2, 2), [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(DensityError):
        DensityGrid((2, 2), [0.25, 0.25, 0.25, 0.26])
    p = DensityGrid.from_weights((2, 2), [1, 1, 1, 1])
    assert p.mass.sum() == 1.0
    with pytest.raises(ValueError):
        p.mass[0, 0] = 3.0


def test_density_vdsg_round_trip(tmp_path):
    p = polynomial_density((8, 16), 1.5)
    p.save(tmp_path / "p.vdsg")
    q = DensityGrid.load(tmp_path / "p.vdsg")
    np.testing.assert_array_equal(p.mass, q.mass)


def test_identity_wavelet_uniform_optimum():
    model = AcquisitionModel.build((16, 16), WaveletSpec.identity())
    pi = optimal_density(model)
    np.testing.assert_allclose(pi.mass, 1 / 256, atol=1e-17)
    assert K_value(model, pi) == pytest.approx(1.0, abs=1e-12)
    assert K_value(model, DensityGrid.uniform((16, 16))) == pytest.approx(1.0, abs=1e-12)


def test_optimal_density_haar_n2():
    # both rows of the 2x2 Haar acquisition matrix have sup-norm 1
    model = AcquisitionModel.build((2,), WaveletSpec("haar", 1))
    np.testing.assert_allclose(optimal_density(model).mass, [0.5, 0.5])


def test_K_of_optimum_is_sum_of_squares(haar8, sym16):
    for model in (haar8, sym16):
        total = float((model.row_infnorms ** 2).sum())
        assert K_value(model, optimal_density(model)) == pytest.approx(total, abs=1e-12)


def test_optimum_beats_random_densities(sym16, rng):
    k_opt = K_value(sym16, optimal_density(sym16))
    for _ in range(100):
        q = DensityGrid.from_weights(sym16.dims, rng.random(sym16.dims.shape) + 1e-3)
        assert K_value(sym16, q) >= k_opt - 1e-12


def test_K_rejects_zero_mass_on_live_row(haar8):
    w = np.ones(64)
    w[5] = 0
    with pytest.raises(DensityError):
        K_value(haar8, DensityGrid.from_weights((8, 8), w))


def test_polynomial_density_examples():
    np.testing.assert_allclose(polynomial_density((8, 8), 0).mass, 1 / 64)
    p = polynomial_density((4, 4), 2)
    # centered layout: DC at (2, 2); (2, 3) has |k| = 1 and (2, 0) has |k| = 2
    assert p.mass[2, 3] / p.mass[2, 0] == pytest.approx(4.0)
    assert p.mass[2, 2] == p.mass[2, 3]
    golden = json.loads((DATA / "poly_density_4x4_exp2.json").read_text())
    np.testing.assert_allclose(p.mass, golden["mass"], rtol=0, atol=1e-15)
    with pytest.raises(DensityError):
        polynomial_density((4, 4), -1)


def test_deterministic_set(haar8):
    assert deterministic_set(haar8, 0).size == 0
    assert sorted(deterministic_set(haar8, 64)) == list(range(64))
    top = deterministic_set(haar8, 4)
    norms = haar8.row_infnorms.ravel()
    assert np.all(norms[top] >= np.sort(norms)[-4] - 1e-15)
    # ties broken by ascending index
    order = sorted(range(64), key=lambda i: (-norms[i], i))
    assert top.tolist() == order[:4]
    with pytest.raises(DensityError):
        deterministic_set(haar8, 65)


def test_deterministic_set_nested(sym16):
    prev = set()
    for m1 in range(0, 40):
        cur = set(deterministic_set(sym16, m1).tolist())
        assert prev <= cur
        prev = cur


def test_restrict_and_renormalize(haar8):
    u = DensityGrid.uniform((8, 8))
    assert restrict_and_renormalize(u, []) is u
    q = restrict_and_renormalize(u, range(32))
    np.testing.assert_allclose(q.flat[32:], 2 / 64)
    assert q.flat[:32].sum() == 0
    with pytest.raises(DensityError):
        restrict_and_renormalize(u, range(64))
    pi = optimal_density(haar8)
    omega1 = deterministic_set(haar8, 6)
    K = K_value(haar8, restrict_and_renormalize(pi, omega1), excluded=omega1)
    rest = np.delete(haar8.row_infnorms.ravel() ** 2, omega1).sum()
    assert K == pytest.approx(rest, rel=1e-12)


def test_bound_formulas():
    n, eta = 256, 0.5
    L = math.log(6 * n / eta)
    r = bound_iid(1.0, 1, eta, n)
    assert r.m_required / L ** 2 == pytest.approx(26.25, rel=1e-14)
    assert bound_iid(2.0, 3, eta, n).m_required == pytest.approx(26.25 * 6 * L ** 2)
    mixed = bound_mixed(1.0, 0, 1, eta, n)
    assert mixed.m_required / L ** 2 == pytest.approx(7 / 3, rel=1e-14)
    assert bound_mixed(1.0, 10, 1, eta, n).m_required == pytest.approx(10 + 7 / 3 * L ** 2)
    mk = bound_markov(1.0, 1, eta, 1.0, n)
    assert mk.m_required / math.log(2 * n ** 2 / eta) == pytest.approx(12.0, rel=1e-14)
    assert bound_markov(2.0, 2, eta, 0.5, n).m_required == pytest.approx(
        24 * 4 * 4 * math.log(2 * n ** 2 / eta))


def test_bound_input_errors():
    with pytest.raises(DensityError):
        bound_iid(1.0, 0, 0.5, 10)
    with pytest.raises(DensityError):
        bound_iid(1.0, 1, 1.5, 10)
    with pytest.raises(DensityError):
        bound_markov(1.0, 1, 0.5, 0.0, 10)
    with pytest.raises(DensityError):
        bound_mixed(-1.0, 1, 1, 0.5, 10)


@given(st.floats(0.1, 100), st.integers(1, 50), st.floats(1e-6, 0.99), st.integers(1, 10 ** 6))
def test_mixed_reduces_to_iid_shape(K, s, eta, n):
    a = bound_mixed(K, 0, s, eta, n).m_required / (7 / 3)
    b = bound_iid(K, s, eta, n).m_required / 26.25
    assert a == pytest.approx(b, rel=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_minimality_property(seed):
    model = AcquisitionModel.build((8, 8), WaveletSpec("haar", 3))
    q = DensityGrid.from_weights((8, 8), np.random.default_rng(seed).random((8, 8)) + 1e-6)
    assert K_value(model, q) >= K_value(model, optimal_density(model)) - 1e-12
    assert abs(q.mass.sum() - 1) < 1e-12 and q.mass.min() >= 0
