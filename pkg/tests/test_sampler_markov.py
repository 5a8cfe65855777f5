import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy import stats

from vdsample.density import DensityGrid, polynomial_density
from vdsample.empirical import empirical_measure, tv_distance
from vdsample.sampler_iid import draw_iid
from vdsample.sampler_markov import (CERTIFICATE_MAX_N, ChainBudgetExceeded, KernelError,
                                     TransitionKernel, juditsky_certificate, metropolis_kernel,
                                     mix_with_jumps, proposal_kernel, read_kernel, run_chain,
                                     spectral_gap, verify_cheeger_bound, weyl_check, write_kernel)
from vdsample.transforms import AcquisitionModel, WaveletSpec

from oracles import dense_A, haar_analysis_1d


def _kernel(local, p, alpha=0.0):
    p = np.asarray(p, dtype=float)
    return TransitionKernel(sp.csr_matrix(np.asarray(local, dtype=float)),
                            DensityGrid((p.size,), p), alpha)


def test_uniform_target_keeps_proposal():
    k = metropolis_kernel(DensityGrid.uniform((8, 8)), periodic=True)
    np.testing.assert_allclose(k.local.toarray(), proposal_kernel((8, 8), periodic=True).toarray())


def test_two_state_full_neighborhood():
    k = metropolis_kernel(DensityGrid((2,), [1 / 3, 2 / 3]), neighborhood="full")
    np.testing.assert_allclose(k.to_dense(), [[0, 1], [0.5, 0.5]], atol=1e-15)


def test_detailed_balance_inverse_square():
    k = metropolis_kernel(polynomial_density((8, 8), 2))
    P = k.to_dense()
    p = k.stationary.flat
    flow = p[:, None] * P
    assert np.abs(flow - flow.T).max() < 1e-12
    assert np.abs(P.sum(axis=1) - 1).max() < 1e-12
    assert P.min() >= 0


@given(st.integers(0, 10 ** 6), st.sampled_from([0.0, 0.01, 0.1, 0.5, 1.0]))
def test_kernel_invariants(seed, alpha):
    w = np.random.default_rng(seed).random((4, 8)) + 0.01
    k = mix_with_jumps(metropolis_kernel(DensityGrid.from_weights((4, 8), w)), alpha)
    P = k.to_dense()
    p = k.stationary.flat
    assert np.abs(P.sum(axis=1) - 1).max() < 1e-12
    assert np.abs(p @ P - p).max() < 1e-12
    assert np.abs(p[:, None] * P - (p[:, None] * P).T).max() < 1e-12
    assert spectral_gap(k).gap >= alpha - 1e-12


def test_alpha_extremes():
    p = polynomial_density((4, 4), 1)
    base = metropolis_kernel(p)
    np.testing.assert_allclose(mix_with_jumps(base, 0).to_dense(), base.to_dense())
    np.testing.assert_allclose(mix_with_jumps(base, 1).to_dense(), np.tile(p.flat, (16, 1)))
    # composing mixtures: (1 - a)(1 - b) survives
    twice = mix_with_jumps(mix_with_jumps(base, 0.5), 0.5)
    assert twice.alpha == pytest.approx(0.75)
    with pytest.raises(KernelError):
        mix_with_jumps(base, 1.5)


def test_metropolis_rejects_zero_mass():
    with pytest.raises(KernelError):
        metropolis_kernel(DensityGrid((4,), [0.5, 0.25, 0.25, 0.0]))


def test_alpha_one_chain_matches_iid():
    p = polynomial_density((4, 4), 1)
    k = mix_with_jumps(metropolis_kernel(p), 1.0)
    chain = run_chain(k, steps=10 ** 4, seed=1).draw_log
    iid = draw_iid(p, 10 ** 4, seed=2).draw_log
    table = np.stack([np.bincount(chain, minlength=16), np.bincount(iid, minlength=16)])
    assert stats.chi2_contingency(table)[1] > 1e-3
    assert stats.ks_2samp(chain, iid).pvalue > 1e-3


def test_single_state_chain():
    # identity kernel started from a point mass never moves
    k = _kernel(np.eye(4), [0, 0, 0, 1.0])
    s = run_chain(k, target=1, seed=0)
    assert s.omega.tolist() == [3]
    assert run_chain(k, steps=100, seed=0).omega.tolist() == [3]


def test_chain_tv_converges():
    p = polynomial_density((16, 16), 2)
    k = metropolis_kernel(p)
    log = run_chain(k, steps=10 ** 5, seed=3).draw_log
    assert tv_distance(empirical_measure(log, p.dims), p) < 0.05


def test_chain_target_and_omega1():
    p = polynomial_density((8, 8), 1)
    k = mix_with_jumps(metropolis_kernel(p), 0.1)
    s = run_chain(k, target=20, seed=4, omega1=[0, 63])
    assert s.m == 20
    assert s.omega[:2].tolist() == [0, 63]
    assert set(s.omega.tolist()) == {0, 63} | set(s.draw_log.tolist())
    assert run_chain(k, target=20, seed=4, omega1=[0, 63]) == s


def test_chain_budget():
    # a two-state chain that never leaves its start cannot reach two indices
    k = _kernel(np.eye(2), [0.5, 0.5])
    with pytest.raises(ChainBudgetExceeded) as info:
        run_chain(k, target=2, seed=0, max_steps=50)
    assert info.value.scheme.m == 1
    assert info.value.scheme.draw_log.size == 50


def test_gap_closed_forms():
    p = DensityGrid.uniform((8,))
    jump = mix_with_jumps(metropolis_kernel(p, "full"), 1.0)
    assert spectral_gap(jump).gap == pytest.approx(1.0)
    assert spectral_gap(jump).lambda2 == pytest.approx(0.0, abs=1e-12)
    assert spectral_gap(_kernel(np.eye(4), np.full(4, 0.25))).gap == pytest.approx(0.0, abs=1e-12)
    for beta in (0.1, 0.3, 0.5):
        k = _kernel([[1 - beta, beta], [beta, 1 - beta]], [0.5, 0.5])
        assert spectral_gap(k).gap == pytest.approx(2 * beta)


def test_dense_and_lanczos_agree():
    k = mix_with_jumps(metropolis_kernel(polynomial_density((16, 16), 2)), 0.05)
    dense = spectral_gap(k, "dense-symmetric-eig")
    lanczos = spectral_gap(k, "lanczos")
    assert lanczos.gap == pytest.approx(dense.gap, rel=1e-6)


def test_non_reversible_rejected():
    # cyclic walk on four states is stochastic with uniform stationary law but not reversible
    k = _kernel(np.roll(np.eye(4), 1, axis=1), np.full(4, 0.25))
    with pytest.raises(KernelError):
        spectral_gap(k)


@pytest.mark.parametrize("side,bound", [(8, 0.25), (16, 0.125)])
def test_cheeger_bound(side, bound):
    rep = verify_cheeger_bound((side, side))
    assert rep.bound == pytest.approx(bound)
    assert rep.holds
    assert 0 < rep.gap <= rep.bound
    # spectral gap vs conductance of the half split: gap <= 2 Phi
    assert rep.gap <= 2 * rep.half_split_conductance
    with pytest.raises(KernelError):
        verify_cheeger_bound((side, 2 * side))


def test_weyl():
    k = metropolis_kernel(polynomial_density((8, 8), 2))
    for alpha, gap, ok in weyl_check(k, [0.01, 0.1, 0.5]):
        assert ok and gap >= alpha


def test_certificate_full_sampling():
    model = AcquisitionModel.build((4, 4), WaveletSpec("haar", 1))
    rep = juditsky_certificate(model, DensityGrid.uniform((4, 4)), np.arange(16), s_max=8)
    assert rep.infnorm_residual == 0
    assert rep.max_certified_s == 8


def test_certificate_single_visit_oracle():
    model = AcquisitionModel.build((4, 4), WaveletSpec("haar", 1))
    p = polynomial_density((4, 4), 1)
    A = dense_A((4, 4), 1, haar_analysis_1d)
    j = 5
    a = A[j]
    theta = np.real(np.outer(a.conj(), a)) / p.flat[j]
    expected = np.abs(np.eye(16) - theta).max()
    rep = juditsky_certificate(model, p, [j], s_max=4)
    assert rep.infnorm_residual == pytest.approx(expected, rel=1e-12)
    assert rep.max_certified_s == (int(1 / (2 * expected)) if expected < 0.5 else 0)


def test_certificate_improves_with_m():
    model = AcquisitionModel.build((16, 16), WaveletSpec("haar", 2))
    p = polynomial_density((16, 16), 1)
    means = []
    for m in (100, 1000, 10000):
        means.append(np.mean([juditsky_certificate(model, p, draw_iid(p, m, seed=s).draw_log, 8)
                              .infnorm_residual for s in range(3)]))
    assert means[0] > means[1] > means[2]


def test_certificate_size_guard():
    side = int(np.sqrt(CERTIFICATE_MAX_N)) * 2
    model = AcquisitionModel.build((side, side), WaveletSpec("haar", 1))
    with pytest.raises(KernelError):
        juditsky_certificate(model, DensityGrid.uniform((side, side)), [0], 1)


def test_kernel_text_round_trip(tmp_path):
    k = mix_with_jumps(metropolis_kernel(polynomial_density((4, 4), 2)), 0.2)
    write_kernel(tmp_path / "k.txt", k)
    back = read_kernel(tmp_path / "k.txt")
    assert back.alpha == k.alpha
    np.testing.assert_array_equal(back.to_dense(), k.to_dense())
    np.testing.assert_array_equal(back.stationary.mass, k.stationary.mass)
