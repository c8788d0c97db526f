import math

import numpy as np
import pytest
from scipy import signal, stats

from nleit.errors import DataFormatError, InvalidInputError
from nleit.quantum import (
    coherent_state,
    kerr_evolve,
    loss_channel,
    quadrature_variance,
    squeezed_vacuum,
    vacuum,
    wigner,
)
from nleit.tomography import (
    QuadratureDataset,
    default_phases,
    histogram,
    inverse_radon,
    quadrature_pdf,
    reconstruction_error,
    sample_homodyne,
)

AXIS = np.linspace(-5, 5, 101)
PHASES = default_phases(24)
BANANA = kerr_evolve(coherent_state(2.0, dim=40), 0.3)


def _round_trip(state, seed=7):
    data = sample_homodyne(state, PHASES, 100_000, seed)
    rec = inverse_radon(data, AXIS)
    ref = wigner(state, AXIS, check_extent=False, norm_tol=1e-2)
    return rec, ref


def test_vacuum_pdf():
    x = np.linspace(-8, 8, 4001)
    for theta in (0.0, 0.7, 2.0):
        _, pdf = quadrature_pdf(vacuum(), theta, x)
        assert np.trapezoid(pdf, x) == pytest.approx(1.0, abs=1e-8)
        assert np.trapezoid(x * x * pdf, x) == pytest.approx(0.5, abs=1e-8)


def test_pdf_parity():
    x = np.linspace(-6, 6, 241)
    for theta in (0.0, 0.4, 1.3):
        _, a = quadrature_pdf(BANANA, theta, x)
        _, b = quadrature_pdf(BANANA, theta + math.pi, x)
        assert np.max(np.abs(a - b[::-1])) <= 1e-10


def test_banana_pdf_bimodal():
    x = np.linspace(-5, 5, 1001)
    _, pdf = quadrature_pdf(loss_channel(BANANA, 0.72), 0.0, x)
    peaks, props = signal.find_peaks(pdf, prominence=0.01)
    assert len(peaks) == 2
    assert x[peaks[1]] - x[peaks[0]] > 2.0


def test_sampling_vacuum_variance():
    d = sample_homodyne(vacuum(), [0.0], 100_000, 3)
    assert np.var(d.values) == pytest.approx(0.5, rel=0.02)


def test_sampling_deterministic():
    a = sample_homodyne(BANANA, PHASES[:4], 1000, 11)
    b = sample_homodyne(BANANA, PHASES[:4], 1000, 11)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.phases, b.phases)
    c = sample_homodyne(BANANA, PHASES[:4], 1000, 12)
    assert not np.array_equal(a.values, c.values)


def test_sampling_squeezed_variance_ratio():
    s = squeezed_vacuum(math.log(10 ** (3 / 20)), dim=60)
    d = sample_homodyne(s, [0.0, math.pi / 2], 100_000, 5)
    ratio = np.var(d.at_phase(math.pi / 2)) / np.var(d.at_phase(0.0))
    assert ratio == pytest.approx(quadrature_variance(s, math.pi / 2) / quadrature_variance(s, 0.0), rel=0.05)


def test_efficiency_is_loss_channel():
    lossy = loss_channel(BANANA, 0.72)
    d = sample_homodyne(BANANA, [0.0], 100_000, 9, efficiency=0.72)
    x = np.linspace(-9, 9, 8001)
    _, pdf = quadrature_pdf(lossy, 0.0, x)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))])
    cdf /= cdf[-1]
    assert stats.kstest(d.values, lambda v: np.interp(v, x, cdf)).pvalue > 0.01
    # the lossless distribution is rejected
    _, pdf0 = quadrature_pdf(BANANA, 0.0, x)
    cdf0 = np.concatenate([[0.0], np.cumsum(0.5 * (pdf0[1:] + pdf0[:-1]) * np.diff(x))])
    assert stats.kstest(d.values, lambda v: np.interp(v, x, cdf0 / cdf0[-1])).pvalue < 0.01


def test_dataset_csv_round_trip():
    d = sample_homodyne(vacuum(), PHASES[:3], 50, 1, efficiency=0.9)
    text = d.to_csv()
    assert text.startswith("#meta seed=1 efficiency=0.9\n")
    back = QuadratureDataset.from_csv(text)
    assert np.array_equal(back.values, d.values) and np.array_equal(back.phases, d.phases)
    assert back.seed == 1 and back.efficiency == 0.9
    with pytest.raises(DataFormatError):
        QuadratureDataset.from_csv(text.split("\n", 1)[1])


def test_dataset_validation():
    with pytest.raises(InvalidInputError):
        QuadratureDataset(np.array([7.0]), np.array([0.0]), 0)
    with pytest.raises(InvalidInputError):
        QuadratureDataset(np.array([0.0, 1.0]), np.array([0.0]), 0)
    with pytest.raises(InvalidInputError):
        sample_homodyne(vacuum(), [0.0], 0, 1)


def test_histogram_single_sample():
    d = QuadratureDataset(np.array([0.5]), np.array([1.25]), 0)
    counts, edges = histogram(d, 0.5, 10)
    assert counts.sum() == 1 and counts.max() == 1
    assert edges[0] <= 1.25 <= edges[-1]
    with pytest.raises(InvalidInputError):
        histogram(d, 1.0, 10)


def test_histogram_vacuum_chi_square():
    d = sample_homodyne(vacuum(), [0.0], 100_000, 21)
    counts, edges = histogram(d, 0.0, 64)
    expected = len(d) * np.diff(stats.norm.cdf(edges, scale=math.sqrt(0.5)))
    ok = expected >= 5
    chi2 = np.sum((counts[ok] - expected[ok]) ** 2 / expected[ok])
    expected_sum = expected[ok].sum()
    assert stats.chi2.sf(chi2, ok.sum() - 1) > 0.01
    assert counts[ok].sum() == pytest.approx(expected_sum, rel=0.01)


def test_histogram_banana_two_maxima():
    d = sample_homodyne(BANANA, [0.0], 100_000, 7, efficiency=0.72)
    counts, _ = histogram(d, 0.0, 64)
    peaks, _ = signal.find_peaks(counts, prominence=4 * math.sqrt(counts.max()))
    assert len(peaks) == 2
    assert peaks[1] - peaks[0] >= 3


def test_reconstruction_error_identities():
    ref = wigner(vacuum(), AXIS)
    assert reconstruction_error(ref, ref) == (0.0, 0.0, pytest.approx(1.0, abs=1e-12))
    doubled = type(ref)(ref.x, ref.p, 2 * ref.values)
    assert reconstruction_error(doubled, ref)[0] == pytest.approx(ref.values.max(), rel=1e-12)
    coh = wigner(coherent_state(2.0), AXIS, check_extent=False, norm_tol=1e-2)
    assert reconstruction_error(coh, ref)[2] < 0.1
    with pytest.raises(InvalidInputError):
        reconstruction_error(ref, wigner(vacuum(), np.linspace(-5, 5, 51)))


def test_round_trip_vacuum():
    rec, ref = _round_trip(vacuum())
    assert reconstruction_error(rec.wigner, ref)[0] < 0.05 * ref.values.max()


def test_round_trip_coherent():
    alpha = 2.0
    rec, ref = _round_trip(coherent_state(alpha))
    assert reconstruction_error(rec.wigner, ref)[0] < 0.05 * ref.values.max()
    i, j = np.unravel_index(np.argmax(rec.wigner.values), rec.wigner.values.shape)
    assert abs(rec.wigner.x[j] - math.sqrt(2) * alpha) <= 0.1
    assert abs(rec.wigner.p[i]) <= 0.1


def test_round_trip_squeezed():
    rec, ref = _round_trip(squeezed_vacuum(math.log(10 ** (3 / 20)), dim=60))
    assert reconstruction_error(rec.wigner, ref)[0] < 0.05 * ref.values.max()


def test_banana_negativity_survives_reconstruction():
    strong = inverse_radon(sample_homodyne(BANANA, PHASES, 100_000, 7, efficiency=0.72), AXIS)
    assert strong.wigner.values.min() < -strong.statistical_floor()
    weak = inverse_radon(sample_homodyne(BANANA, PHASES, 100_000, 7, efficiency=0.5), AXIS)
    assert weak.wigner.values.min() >= -weak.statistical_floor()


def test_inverse_radon_linear_in_samples():
    a = sample_homodyne(vacuum(), PHASES, 2000, 1)
    b = sample_homodyne(coherent_state(1.0), PHASES, 3000, 2)
    ra = inverse_radon(a, AXIS, renormalize=False).wigner.values
    rb = inverse_radon(b, AXIS, renormalize=False).wigner.values
    rab = inverse_radon(a.concatenate(b), AXIS, renormalize=False).wigner.values
    assert np.max(np.abs(rab - (2 * ra + 3 * rb) / 5)) <= 1e-10


def test_inverse_radon_needs_phases():
    d = sample_homodyne(vacuum(), [0.0, 0.5], 1000, 1)
    with pytest.raises(InvalidInputError):
        inverse_radon(d, AXIS)
