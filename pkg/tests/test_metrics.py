import numpy as np
import pytest
from scipy import stats

from risrcc.errors import EstimationError, InvalidArgumentError, RisSimError
from risrcc.gbsm import Cir, rician_envelope
from risrcc.metrics import (
    Pdp,
    coherence_bandwidth,
    estimate_k_factor,
    estimate_k_factor_detail,
    fit_ci_ple,
    fit_cluster_decay,
    fit_fading_distribution,
    mimo_capacity,
    pdp_from_cir,
    rank_families,
    rms_delay_spread,
    select_codebook_min_ds,
    snr,
    throughput_mbps,
)
from risrcc.propagation import LinkBudget, PathLossParams, ci_path_loss
from risrcc.scenario import Scenario
from risrcc.tracking import index_to_angle

from oracles import moment_k_db, rms_spread

LAM = 0.0857
NS = 1e-9


def test_pdp_single_tap_bin():
    p = pdp_from_cir(Cir.scalar([10 * NS], [1.0]))
    assert p.power[8] == pytest.approx(1.0) and p.power.sum() == pytest.approx(1.0)


def test_pdp_same_bin_sums():
    p = pdp_from_cir(Cir.scalar([10 * NS, 10.2 * NS], [1.0, 1.0]))
    assert p.power[8] == pytest.approx(2.0)


def test_pdp_identity_at_matching_resolution():
    cir = Cir.scalar([0, 10 * NS, 30 * NS], np.sqrt([0.5, 0.3, 0.2]))
    p = pdp_from_cir(cir, resolution=10 * NS)
    np.testing.assert_allclose(p.power, [0.5, 0.3, 0.0, 0.2], atol=1e-12)
    assert pdp_from_cir(cir, normalize=True).total == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        pdp_from_cir(Cir.empty())
    with pytest.raises(InvalidArgumentError):
        pdp_from_cir(cir, resolution=0)


def test_rms_examples():
    assert rms_delay_spread(Pdp([0, NS, 2 * NS], [0, 1, 0])) == 0.0
    assert rms_delay_spread(Pdp([0, 10 * NS], [1, 1])) == pytest.approx(5 * NS)
    d, p = [0, 10 * NS, 30 * NS], [0.5, 0.3, 0.2]
    assert rms_delay_spread(Pdp(d, p)) == pytest.approx(11.357816691600547 * NS, rel=1e-12)
    assert rms_delay_spread(Pdp(d, p)) == pytest.approx(rms_spread(d, p), rel=1e-12)
    with pytest.raises(RisSimError):
        rms_delay_spread(Pdp([0, NS], [0, 0]))


def test_rms_floor_drops_weak_bins():
    pdp = Pdp([0, 10 * NS, 500 * NS], [1.0, 1.0, 1e-4])
    assert rms_delay_spread(pdp) == pytest.approx(5 * NS)
    assert rms_delay_spread(pdp, floor_db=None) > 5 * NS


@pytest.mark.parametrize("seed", range(5))
def test_rms_shift_and_scale_invariance(seed):
    rng = np.random.default_rng(seed)
    p = Pdp(np.arange(40) * 1.25 * NS, rng.exponential(size=40))
    base = rms_delay_spread(p, None)
    assert rms_delay_spread(p.shifted(37 * NS), None) == pytest.approx(base, rel=1e-12)
    assert rms_delay_spread(Pdp(p.delay_bins, 7.3 * p.power), None) == pytest.approx(base, rel=1e-12)


def test_coherence_bandwidth():
    assert coherence_bandwidth(11.5 * NS) / 1e6 == pytest.approx(17.391304, abs=1e-6)
    assert coherence_bandwidth(25.9 * NS) / 1e6 == pytest.approx(7.722008, abs=1e-6)
    assert coherence_bandwidth(3.7e-8) * 5 * 3.7e-8 == pytest.approx(1.0, abs=1e-15)
    assert coherence_bandwidth(0.0) == float("inf")


def test_k_factor_examples():
    k, capped = estimate_k_factor_detail(np.full(200, 0.7))
    assert k == 60.0 and capped
    rng = np.random.default_rng(0)
    ray = np.abs(rng.standard_normal(100_000) + 1j * rng.standard_normal(100_000))
    assert estimate_k_factor(ray) <= -10
    env = rician_envelope(10.0, 100_000, rng)
    assert 9.0 <= estimate_k_factor(env) <= 11.0
    assert estimate_k_factor(env[:5000]) == pytest.approx(moment_k_db(env[:5000].tolist()), abs=1e-9)


def test_k_factor_recovers_ris_on_value():
    env = rician_envelope(12.6, 100_000, np.random.default_rng(1))
    assert estimate_k_factor(env) == pytest.approx(12.6, abs=1.0)


def test_k_factor_input_checks():
    with pytest.raises(InvalidArgumentError):
        estimate_k_factor(np.ones(50))
    with pytest.raises(InvalidArgumentError):
        estimate_k_factor(np.r_[np.ones(150), 0.0])


def test_snr_examples():
    link = LinkBudget(p_tx=10.0, noise_var=2.0)
    assert snr(Cir.empty(), link) == 0.0
    c = Cir.scalar([0, NS, 2 * NS], [1, 1, 1])
    assert snr(c, link) == pytest.approx(10 / 2 * 9)
    assert snr(c.scaled(2.0), link) == pytest.approx(4 * snr(c, link))
    assert snr(c, link, coherent=False) == pytest.approx(10 / 2 * 3)
    assert snr(c, link, pl_db=10.0) == pytest.approx(snr(c, link) / 10)


def test_capacity_examples():
    assert mimo_capacity(np.zeros((2, 2)), 10.0) == 0.0
    assert mimo_capacity(np.eye(2), 2.0) == pytest.approx(2.0)
    rank1 = np.ones((2, 2))
    orth = np.eye(2) * np.sqrt(2)
    assert np.linalg.norm(rank1) == pytest.approx(np.linalg.norm(orth))
    assert mimo_capacity(orth, 5.0) > mimo_capacity(rank1, 5.0)


def test_throughput_cap():
    assert throughput_mbps(2.0, 100e6) == pytest.approx(200.0)
    assert throughput_mbps(20.0, 100e6) == pytest.approx(571.1)


def test_weibull_shape_two_is_rayleigh():
    rng = np.random.default_rng(2)
    x = stats.weibull_min.rvs(2.0, scale=1.5, size=100_000, random_state=rng)
    w = fit_fading_distribution(x, "weibull")
    r = fit_fading_distribution(x, "rayleigh")
    assert 1.95 <= w.params["shape"] <= 2.05
    assert r.params["sigma"] == pytest.approx(1.5 / np.sqrt(2), rel=0.01)
    assert 0 <= w.ks_stat <= 1


def test_lognormal_sigma_recovered():
    x = np.random.default_rng(3).lognormal(0.0, 0.5, 100_000)
    assert 0.49 <= fit_fading_distribution(x, "lognormal").params["sigma"] <= 0.51


def test_weibull_preferred_over_rayleigh():
    rng = np.random.default_rng(4)
    wins = 0
    for _ in range(100):
        x = stats.weibull_min.rvs(1.4, size=2000, random_state=rng)
        fits = {f.family: f for f in rank_families(x, ("rayleigh", "weibull"))}
        wins += fits["weibull"].log_likelihood > fits["rayleigh"].log_likelihood
    assert wins >= 95


def test_distribution_input_checks():
    with pytest.raises(InvalidArgumentError):
        fit_fading_distribution(np.ones(10), "weibull")
    with pytest.raises(InvalidArgumentError):
        fit_fading_distribution(np.r_[np.ones(2000), -1.0], "lognormal")
    with pytest.raises(InvalidArgumentError):
        fit_fading_distribution(np.ones(2000), "gamma")
    with pytest.raises(EstimationError):
        fit_fading_distribution(np.ones(2000), "weibull")


def test_ple_noiseless_recovery():
    p = PathLossParams(gamma1=2.4, gamma2=1.8)
    d2 = np.linspace(1, 10, 10)
    d1 = np.linspace(3, 12, 10)[::-1]
    pts = [(a, b, ci_path_loss(p, LAM, a, b)) for a, b in zip(d1, d2)]
    f = fit_ci_ple(pts, LAM)
    assert f.gamma2 == pytest.approx(1.8, abs=0.01)
    assert f.gamma1 == pytest.approx(2.4, abs=0.01)
    assert f.sigma_sf == pytest.approx(0.0, abs=1e-9)


def test_ple_recovery_from_100_samples():
    p = PathLossParams(gamma1=3.1, gamma2=1.7)
    rng = np.random.default_rng(6)
    d1, d2 = rng.uniform(1, 20, 100), rng.uniform(1, 20, 100)
    pts = np.stack([d1, d2, [ci_path_loss(p, LAM, a, b) for a, b in zip(d1, d2)]], axis=1)
    f = fit_ci_ple(pts, LAM)
    assert abs(f.gamma1 - 3.1) < 0.05 and abs(f.gamma2 - 1.7) < 0.05


def test_ple_offset_leaves_exponents():
    p = PathLossParams(gamma1=2.0, gamma2=1.6)
    rng = np.random.default_rng(7)
    d1, d2 = rng.uniform(1, 10, 30), rng.uniform(1, 10, 30)
    pl = np.array([ci_path_loss(p, LAM, a, b) for a, b in zip(d1, d2)]) + rng.normal(0, 1, 30)
    pts = np.stack([d1, d2, pl], axis=1)
    a = fit_ci_ple(pts, LAM, fit_offset=True)
    shifted = pts.copy()
    shifted[:, 2] += 17.0
    b = fit_ci_ple(shifted, LAM, fit_offset=True)
    assert b.gamma1 == pytest.approx(a.gamma1, abs=1e-9)
    assert b.gamma2 == pytest.approx(a.gamma2, abs=1e-9)
    assert b.offset - a.offset == pytest.approx(17.0)


def test_ple_rank_deficient():
    with pytest.raises(EstimationError):
        fit_ci_ple([(5, 2, 80.0)] * 4, LAM)
    with pytest.raises(InvalidArgumentError):
        fit_ci_ple([(5, 2, 80.0)] * 2, LAM)


def _decay_pdp(a, b, c, n=60):
    tau = np.arange(n) * 1.25 * NS
    return Pdp(tau, a * np.exp(-b * tau * 1e9) + c)


def test_decay_fit_recovers_generator():
    a, b, c = fit_cluster_decay(_decay_pdp(10.0, 1.9, 1e-3))
    assert a == pytest.approx(10.0, rel=0.05) and b == pytest.approx(1.9, rel=0.05)


def test_decay_fit_scaling():
    a, b, c = fit_cluster_decay(_decay_pdp(10.0, 0.3, 0.05))
    a2, b2, c2 = fit_cluster_decay(_decay_pdp(70.0, 0.3, 0.35))
    assert a2 == pytest.approx(7 * a, rel=1e-6) and c2 == pytest.approx(7 * c, rel=1e-4)
    assert b2 == pytest.approx(b, rel=1e-6)


def test_decay_fit_flat_profile_fails():
    with pytest.raises(EstimationError):
        fit_cluster_decay(Pdp(np.arange(20) * NS, np.full(20, 1e-3)))


@pytest.fixture(scope="module")
def scenario():
    sc = Scenario()
    return sc


def test_select_single_codebook(scenario):
    cb = scenario.bank()[3]
    i, got, spreads = select_codebook_min_ds([cb], lambda c: scenario.ris_on_cir(c))
    assert i == 0 and got is cb and len(spreads) == 1
    with pytest.raises(InvalidArgumentError):
        select_codebook_min_ds([], lambda c: scenario.ris_on_cir(c))


@pytest.mark.parametrize("theta_deg", [15, 30, 45])
def test_select_matches_true_angle(scenario, theta_deg):
    sc = scenario.with_ue(theta_deg, 90, 2.0)
    bank = sc.bank()
    i, _, spreads = select_codebook_min_ds(bank, lambda c: sc.ris_on_cir(c))
    assert abs(np.degrees(index_to_angle(i)) - theta_deg) <= 5.0 + 1e-9
    # arg-min of spread and arg-max of coherence bandwidth coincide
    assert int(np.argmax(1.0 / (5.0 * np.maximum(spreads, 1e-300)))) == i


def test_select_permutation_invariant(scenario):
    sc = scenario.with_ue(30, 90, 2.0)
    bank = sc.bank()
    perm = np.random.default_rng(0).permutation(len(bank))
    i, cb, _ = select_codebook_min_ds(bank, lambda c: sc.ris_on_cir(c))
    j, cb2, _ = select_codebook_min_ds([bank[k] for k in perm], lambda c: sc.ris_on_cir(c))
    np.testing.assert_array_equal(cb.phases, cb2.phases)
