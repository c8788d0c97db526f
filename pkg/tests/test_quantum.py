import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from nleit.errors import InvalidInputError, TruncationError
from nleit.quantum import (
    QuantumState,
    WignerGrid,
    coherent_state,
    displace,
    fock_state,
    kerr_evolve,
    loss_channel,
    moments,
    negativity,
    quadrature_variance,
    required_dim,
    squeezed_vacuum,
    squeezing_db,
    vacuum,
    wigner,
    wigner_centered,
)
from nleit.tomography import quadrature_pdf

AXIS = np.linspace(-6, 6, 121)


def banana(eta: float) -> QuantumState:
    return loss_channel(kerr_evolve(coherent_state(2.0, dim=40), 0.3), eta)


def test_coherent_state_is_poisson():
    alpha = 1.3 - 0.7j
    s = coherent_state(alpha)
    n = np.arange(s.dim)
    assert np.allclose(s.populations(), stats.poisson.pmf(n, abs(alpha) ** 2), atol=1e-12)
    a1, a2, nbar = moments(s)
    assert a1 == pytest.approx(alpha, abs=1e-10)
    assert a2 == pytest.approx(alpha**2, abs=1e-10)
    assert nbar == pytest.approx(abs(alpha) ** 2, abs=1e-10)


def test_truncation_checks():
    with pytest.raises(TruncationError) as info:
        coherent_state(4.0, dim=10)
    assert info.value.suggested_dim == required_dim(4.0)
    rho = np.zeros((4, 4), dtype=complex)
    rho[3, 3] = 1.0
    with pytest.raises(TruncationError):
        QuantumState(rho)
    with pytest.raises(InvalidInputError):
        QuantumState(np.array([[0.5, 0.5j], [0.5j, 0.5]]))


def test_kerr_properties():
    s = coherent_state(2.0)
    assert kerr_evolve(s, 0.0) is s
    k = kerr_evolve(s, 0.37)
    assert np.allclose(k.populations(), s.populations(), atol=1e-15)
    twice = kerr_evolve(kerr_evolve(s, 0.21), 0.16)
    assert np.max(np.abs(twice.rho - kerr_evolve(s, 0.37).rho)) <= 1e-12


def test_loss_limits():
    s = coherent_state(1.5, dim=30)
    assert loss_channel(s, 1.0) is s
    dark = loss_channel(s, 0.0)
    assert dark.rho[0, 0].real == pytest.approx(1.0, abs=1e-12)
    # a coherent state stays coherent with amplitude sqrt(eta) alpha
    out = loss_channel(s, 0.49)
    assert np.max(np.abs(out.rho - coherent_state(1.05, dim=30).rho)) <= 1e-9
    with pytest.raises(InvalidInputError):
        loss_channel(s, 1.2)


@settings(max_examples=25, deadline=None)
@given(e1=st.floats(0.0, 1.0), e2=st.floats(0.0, 1.0))
def test_loss_composition(e1, e2):
    s = banana(1.0)
    a = loss_channel(loss_channel(s, e1), e2)
    b = loss_channel(s, e1 * e2)
    assert np.max(np.abs(a.rho - b.rho)) <= 1e-9


@pytest.mark.parametrize("eta", [0.3, 0.72, 0.95])
def test_loss_on_gaussian_variance(eta):
    s = squeezed_vacuum(math.log(10 ** (3 / 20)), dim=60)
    for theta in (0.0, 0.4, math.pi / 2):
        v = quadrature_variance(s, theta)
        assert quadrature_variance(loss_channel(s, eta), theta) == pytest.approx(eta * v + (1 - eta) / 2, abs=1e-6)


def test_displace_vacuum():
    d = displace(vacuum(30), 1.0 + 0.5j)
    assert np.max(np.abs(d.rho - coherent_state(1.0 + 0.5j, dim=30).rho)) <= 1e-9


def test_wigner_vacuum_peak():
    w = wigner(vacuum(), AXIS)
    assert w.values[60, 60] == pytest.approx(1 / math.pi, abs=1e-6)
    assert w.norm == pytest.approx(1.0, abs=1e-3)


def test_wigner_fock_one_minimum():
    w = wigner(fock_state(1), AXIS)
    assert w.values.min() == pytest.approx(-1 / math.pi, abs=1e-4)


def test_wigner_coherent_is_displaced_gaussian():
    alpha = 1.2 + 0.8j
    w = wigner(coherent_state(alpha), AXIS)
    x0, p0 = math.sqrt(2) * alpha.real, math.sqrt(2) * alpha.imag
    xx, pp = np.meshgrid(AXIS, AXIS)
    expect = np.exp(-((xx - x0) ** 2) - (pp - p0) ** 2) / math.pi
    assert np.max(np.abs(w.values - expect)) <= 1e-6


@pytest.mark.parametrize(
    "state",
    [vacuum(), fock_state(1), fock_state(3), coherent_state(2.0), squeezed_vacuum(0.5), banana(1.0), banana(0.72)],
    ids=["vac", "fock1", "fock3", "coh", "sq", "banana", "banana72"],
)
def test_wigner_normalised_and_marginal(state):
    axis = np.linspace(-8, 8, 161)
    w = wigner(state, axis)
    assert w.norm == pytest.approx(1.0, abs=1e-3)
    assert np.max(np.abs(w.marginal_x() - quadrature_pdf(state, 0.0, axis)[1])) <= 1e-4
    assert np.max(np.abs(w.marginal_p() - quadrature_pdf(state, math.pi / 2, axis)[1])) <= 1e-4


def test_wigner_grid_too_small():
    with pytest.raises(InvalidInputError):
        wigner(coherent_state(2.0), np.linspace(-1, 1, 21))


def test_squeezing_metrics():
    assert squeezing_db(vacuum())[0] == pytest.approx(0.0, abs=1e-12)
    assert squeezing_db(coherent_state(2.0 + 1j))[0] == pytest.approx(0.0, abs=1e-9)
    sq = squeezed_vacuum(math.log(10 ** (3 / 20)), dim=60)
    assert squeezing_db(sq)[0] == pytest.approx(3.0, abs=1e-6)


def test_kerr_squeezing_gaussian_limit():
    alpha, kappa = 3.0, 0.001
    s = kerr_evolve(coherent_state(alpha), kappa)
    mu = 2 * kappa * alpha**2
    gauss = -10 * math.log10((math.sqrt(1 + mu * mu) - mu) ** 2)
    assert squeezing_db(s)[0] == pytest.approx(gauss, rel=0.02)


def test_negativity_classical_states():
    for s in (vacuum(), coherent_state(1.5), squeezed_vacuum(0.4)):
        w_min, vol = negativity(wigner(s, AXIS))
        assert w_min >= -1e-9
        assert vol <= 1e-9


def test_strong_kerr_is_nonclassical():
    s = kerr_evolve(coherent_state(3.0), 0.02)
    assert negativity(wigner_centered(s, 6.0, 121))[0] < -1e-3


def test_banana_negativity_threshold():
    strong = negativity(wigner_centered(banana(0.72), 6.0, 121))
    assert strong[0] < -1e-3 and strong[1] > 1e-3
    weak = negativity(wigner_centered(banana(0.5), 6.0, 121))
    assert weak[0] >= -1e-4


def test_bright_state_centered_grid():
    s = kerr_evolve(coherent_state(6.0), 0.002)
    w = wigner_centered(s, 5.0, 101)
    assert w.norm == pytest.approx(1.0, abs=1e-3)
    assert w.x[50] == pytest.approx(math.sqrt(2) * moments(s)[0].real, abs=0.2)


def test_state_json_round_trip():
    s = banana(0.72)
    back = QuantumState.from_json(s.to_json())
    assert np.array_equal(back.rho, s.rho)


def test_wigner_csv_round_trip():
    w = wigner(banana(0.72), np.linspace(-6, 6, 33))
    back = WignerGrid.from_csv(w.to_csv())
    assert np.array_equal(back.values, w.values)
    assert np.array_equal(back.x, w.x) and np.array_equal(back.p, w.p)
