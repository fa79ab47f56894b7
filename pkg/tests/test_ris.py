import numpy as np
import pytest

from risrcc.errors import GeometryError, InvalidArgumentError
from risrcc.geometry import Spherical
from risrcc.ris import (
    Codebook,
    MeasuredPattern,
    ReflectionGeometry,
    RisSpec,
    aperture_field,
    coherent_bound,
    ff_codebook,
    nf_codebook,
    pattern_factor,
    quantize_codebook,
    rcs,
    reradiation_pattern,
    steered_rcs,
)

from oracles import aperture_sum, element_grid, focusing_phases, rcs_closed_form

LAM = 0.0857
TWO_PI = 2 * np.pi
BS = np.array([0.0, 0.0, 10.0])
UE = Spherical.from_degrees(40, 90, 2).to_cartesian()


@pytest.fixture(scope="module")
def spec():
    return RisSpec(spacing=LAM / 8)


def test_default_spec_matches_board(spec):
    assert (spec.rows, spec.cols, spec.bit_depth) == (37, 50, 4)
    assert spec.area == pytest.approx(0.2394)
    assert spec.element_positions.shape == (37, 50, 3)
    np.testing.assert_allclose(spec.element_positions.reshape(-1, 3).mean(axis=0), 0, atol=1e-15)


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        RisSpec(rows=0)
    with pytest.raises(InvalidArgumentError):
        RisSpec(chi=0.5)


def test_codebook_wraps_into_range():
    cb = Codebook(np.array([[-1e-18, TWO_PI, 7.0]]))
    assert np.all((cb.phases >= 0) & (cb.phases < TWO_PI))
    with pytest.raises(InvalidArgumentError):
        Codebook(np.zeros(3))


def test_nf_centre_element_phase():
    single = RisSpec(rows=1, cols=1, spacing=LAM / 8)
    cb = nf_codebook(single, [0, 0, 3.0], [0, 0, 2.0], LAM)
    k = TWO_PI / LAM
    # exact two-hop compensation: the centre element cancels exp(-jk(R1 + R2))
    assert cb.phases[0, 0] == pytest.approx(np.mod(k * 5.0, TWO_PI), abs=1e-9)


def test_nf_matches_oracle_phases(spec):
    small = RisSpec(rows=4, cols=5, spacing=LAM / 8)
    cb = nf_codebook(small, BS, UE, LAM)
    ref = focusing_phases(element_grid(4, 5, LAM / 8), tuple(BS), tuple(UE), LAM)
    d = np.angle(np.exp(1j * (cb.phases.reshape(-1) - np.array(ref))))
    assert np.max(np.abs(d)) < 1e-9


def test_nf_rejects_points_behind_surface(spec):
    with pytest.raises(GeometryError):
        nf_codebook(spec, BS, [0, 1, -2], LAM)
    with pytest.raises(GeometryError):
        nf_codebook(spec, [0, 0, -1], UE, LAM)


def test_nf_converges_to_ff_far_away(spec):
    th, ph = np.radians(40), np.radians(90)
    far = Spherical(th, ph, 1e4).to_cartesian()
    nf = nf_codebook(spec, [0, 0, 1e4], far, LAM).phases
    ff = ff_codebook(spec, th, ph, LAM).phases
    diff = np.angle(np.exp(1j * (nf - ff)))
    diff -= diff[18, 25]
    assert np.max(np.abs(np.angle(np.exp(1j * diff)))) < 1e-3


def test_nf_focusing_efficiency(spec):
    cb = nf_codebook(spec, BS, UE, LAM)
    e = abs(aperture_field(spec, cb, BS, UE, LAM))
    assert e >= 0.98 * coherent_bound(spec, BS, UE)


def test_aperture_field_matches_loop_oracle():
    small = RisSpec(rows=3, cols=4, spacing=LAM / 8, chi=2.0)
    rng = np.random.default_rng(0)
    cb = Codebook(rng.uniform(0, TWO_PI, (3, 4)))
    obs = np.array([0.3, 0.4, 2.5])
    e_ref, b_ref = aperture_sum(element_grid(3, 4, LAM / 8), cb.phases.reshape(-1), tuple(BS), tuple(obs), LAM, 2.0)
    assert aperture_field(small, cb, BS, obs, LAM) == pytest.approx(e_ref, rel=1e-12)
    assert coherent_bound(small, BS, obs) == pytest.approx(b_ref, rel=1e-12)


def test_single_element_field():
    single = RisSpec(rows=1, cols=1, spacing=0.01, chi=4.0)
    cb = Codebook(np.zeros((1, 1)))
    e = aperture_field(single, cb, [0, 0, 3.0], [0, 0, 2.0], LAM)
    assert abs(e) == pytest.approx(1 / (2.0 * 3.0 * 2.0))


def test_observation_on_element_is_singular():
    single = RisSpec(rows=1, cols=1, spacing=0.01)
    with pytest.raises(GeometryError):
        aperture_field(single, Codebook(np.zeros((1, 1))), BS, [0, 0, 0], LAM)


def test_zero_phase_specular_peak():
    spec = RisSpec(rows=37, cols=50, spacing=LAM / 8)
    cb = Codebook(np.zeros((37, 50)))
    bs = Spherical.from_degrees(30, 270, 10).to_cartesian()
    grid = np.radians(np.arange(5, 61, 5))
    obs = np.stack([10 * np.array([0, np.sin(t), np.cos(t)]) for t in grid])
    e = np.abs(aperture_field(spec, cb, bs, obs, LAM))
    assert np.degrees(grid[np.argmax(e)]) == pytest.approx(30)


def test_ff_examples(spec):
    cb = ff_codebook(spec, 0.0, 0.0, LAM)
    assert np.all(cb.phases == 0)
    cb = ff_codebook(spec, np.radians(40), np.radians(90), LAM)
    # gradient purely along y
    wrapped = np.angle(np.exp(1j * (cb.phases - cb.phases[:, :1])))
    assert np.abs(wrapped).max() < 1e-12
    one = ff_codebook(RisSpec(rows=2, cols=1, spacing=LAM / 8), np.radians(40), np.radians(90), LAM)
    # rows are at y = -lam/16 and +lam/16; the difference is the lam/8 step
    step = np.angle(np.exp(1j * (one.phases[1, 0] - one.phases[0, 0])))
    assert np.mod(step, TWO_PI) == pytest.approx(5.778341099077142, abs=1e-9)
    with pytest.raises(InvalidArgumentError):
        ff_codebook(spec, np.pi / 2, 0, LAM)


def test_ff_element_at_lambda_over_8():
    # 3 rows: the middle row sits at y = 0, the top one at y = lam/8
    spec3 = RisSpec(rows=3, cols=1, spacing=LAM / 8)
    cb = ff_codebook(spec3, np.radians(40), np.radians(90), LAM)
    assert spec3.element_positions[2, 0, 1] == pytest.approx(LAM / 8)
    assert cb.phases[2, 0] == pytest.approx(5.778341099077142, abs=1e-9)


def test_quantization_examples():
    cb = Codebook(np.array([[np.pi / 3, 0.1, 3.0, 6.2]]))
    q1 = quantize_codebook(cb, 1)
    assert set(np.round(q1.phases.ravel(), 12)) <= {0.0, round(np.pi, 12)}
    q4 = quantize_codebook(cb, 4)
    assert q4.phases[0, 0] == pytest.approx(3 * np.pi / 8)
    np.testing.assert_array_equal(quantize_codebook(q4, 4).phases, q4.phases)
    assert q4.bits == 4 and q4.regime == cb.regime
    with pytest.raises(InvalidArgumentError):
        quantize_codebook(cb, 0)


def test_quantization_tie_goes_low():
    step = TWO_PI / 16
    cb = Codebook(np.array([[1.5 * step, 2.5 * step]]))
    np.testing.assert_allclose(quantize_codebook(cb, 4).phases, [[step, 2 * step]])


def test_quantized_levels_and_count(spec):
    q = quantize_codebook(nf_codebook(spec, BS, UE, LAM), 4)
    levels = np.unique(np.round(q.phases / (TWO_PI / 16), 9))
    assert len(levels) <= 16
    np.testing.assert_allclose(levels, np.round(levels))


def test_focusing_gain_non_decreasing_in_bits(spec):
    cont = nf_codebook(spec, BS, UE, LAM)
    gains = [abs(aperture_field(spec, quantize_codebook(cont, b), BS, UE, LAM)) for b in (1, 2, 3, 4)]
    gains.append(abs(aperture_field(spec, cont, BS, UE, LAM)))
    assert all(a <= b * (1 + 1e-12) for a, b in zip(gains, gains[1:]))
    assert 20 * np.log10(gains[-1] / gains[3]) < 0.5


def test_rcs_specular_peak(spec):
    sigma = rcs(spec, ReflectionGeometry(0, 0, 0, 0), LAM)
    assert sigma == pytest.approx(98.06104393137902, rel=1e-9)
    assert sigma == pytest.approx(98.05, rel=2e-4)


def test_rcs_first_null(spec):
    th = np.arcsin(LAM / 0.57)
    assert np.degrees(th) == pytest.approx(8.647260945965174, abs=1e-9)
    peak = rcs(spec, ReflectionGeometry(0, 0, 0, 0), LAM)
    assert rcs(spec, ReflectionGeometry(0, 0, th, 0), LAM) <= 1e-12 * peak


@pytest.mark.parametrize("angles", [(0.1, 0.4, 0.5, 2.0), (0.3, 1.0, 0.05, 4.0), (0.7, 5.0, 0.2, 0.3)])
def test_rcs_matches_oracle_and_reciprocity(spec, angles):
    g = ReflectionGeometry(*angles)
    ref = rcs_closed_form(0.57, 0.42, 1.0, LAM, *angles)
    assert rcs(spec, g, LAM) == pytest.approx(ref, rel=1e-12)
    ti, pi_, tr, pr = angles
    assert rcs(spec, ReflectionGeometry(tr, pr, ti, pi_), LAM) == pytest.approx(rcs(spec, g, LAM), rel=1e-12)


def test_rcs_decays_within_main_lobe(spec):
    th = np.linspace(0, np.arcsin(LAM / 0.57) * 0.99, 30)
    s = [rcs(spec, ReflectionGeometry(0, 0, t, 0), LAM) for t in th]
    assert np.all(np.diff(s) < 0)
    with pytest.raises(InvalidArgumentError):
        rcs(spec, ReflectionGeometry(0, 0, 0, 0), 0.0)


def test_pattern_factor_bounds(spec):
    cb = nf_codebook(spec, BS, UE, LAM)
    f = pattern_factor(spec, cb, BS, UE, LAM)
    assert abs(f) == pytest.approx(1.0, abs=1e-9)
    other = Spherical.from_degrees(20, 90, 2).to_cartesian()
    assert abs(pattern_factor(spec, cb, BS, other, LAM)) < 0.5


def test_steered_rcs_reduces_to_plate_rcs():
    spec = RisSpec(rows=37, cols=50, spacing=0.57 / 50)
    bs = np.array([0, 0, 1e5])
    obs = Spherical.from_degrees(4, 0, 1e5).to_cartesian()
    s1 = steered_rcs(spec, Codebook(np.zeros((37, 50))), bs, obs, LAM)
    s2 = rcs(spec, ReflectionGeometry(0, 0, np.radians(4), 0), LAM)
    assert s1 == pytest.approx(s2, rel=0.05)


def _ring(step_deg, r):
    th = np.radians(np.arange(0, 89.9, step_deg))
    return th, np.full_like(th, np.pi / 2), r


def test_ff_pattern_peak_direction(spec):
    cb = ff_codebook(spec, np.radians(40), np.radians(90), LAM)
    res = reradiation_pattern(spec, cb, [0, 0, 1e4], _ring(0.5, 10.0), LAM)
    assert np.degrees(res.peak_theta) == pytest.approx(40, abs=1.0)
    assert res.power_db.max() == 0.0


def test_zero_phase_pattern_at_broadside(spec):
    res = reradiation_pattern(spec, Codebook(np.zeros((37, 50))), [0, 0, 1e4], _ring(0.5, 10.0), LAM)
    assert res.peak_theta == 0.0


def test_regime_separation(spec):
    th, ph = np.radians(40), np.radians(90)
    nf = nf_codebook(spec, BS, Spherical(th, ph, 2.0).to_cartesian(), LAM)
    ff = ff_codebook(spec, th, ph, LAM, theta_i=0.0)
    ring = _ring(0.5, 10.0)
    g_nf = reradiation_pattern(spec, nf, BS, ring, LAM).peak_gain
    g_ff = reradiation_pattern(spec, ff, BS, ring, LAM).peak_gain
    assert g_nf < g_ff


def test_pattern_grid_validation(spec):
    cb = Codebook(np.zeros((37, 50)))
    with pytest.raises(InvalidArgumentError):
        reradiation_pattern(spec, cb, BS, [], LAM)
    with pytest.raises(InvalidArgumentError):
        reradiation_pattern(spec, cb, BS, _ring(5, 1.0), LAM)


def test_measured_pattern_nearest_lookup():
    th = np.radians([0, 30, 60])
    ph = np.zeros(3)
    mp = MeasuredPattern(th, ph, np.array([0.0, -6.0, -20.0]))
    assert mp.amplitude(np.radians(28), 0.0) == pytest.approx(10 ** (-6 / 20))
