"""Weak-drive chain solver: transmission, steady state, g2(tau)."""

import math
import warnings

import numpy as np
import pytest

from chiralchain import (
    NumericalError,
    PhysicalParams,
    TauGrid,
    chain_g2,
    chain_g2_zero,
    chain_steady_state,
    chain_transmission,
    chain_two_photon_amplitude,
    find_perfect_antibunching,
    od_per_atom,
    single_atom_g2,
    transmission_coefficient,
)
from chiralchain.core import ParameterError
from chiralchain.transport import ChainState

GRID = TauGrid.linear(12.0, 241)


def test_transmission_coefficient():
    assert transmission_coefficient(0.25) == pytest.approx(0.5)
    assert transmission_coefficient(0.5) == pytest.approx(0.0)
    t = transmission_coefficient(0.1, 0.7)
    assert t == pytest.approx(1.0 - 0.2 / (1.0 - 1.4j))
    with pytest.raises(ParameterError):
        transmission_coefficient(0.0)


def test_od_per_atom_matches_transmission():
    for beta in (0.0081, 0.05, 0.2, 0.49):
        t = abs(transmission_coefficient(beta)) ** 2
        assert math.exp(-od_per_atom(beta)) == pytest.approx(t, rel=1e-12)
    with pytest.raises(ParameterError):
        od_per_atom(0.5)


@pytest.mark.parametrize("beta,delta,n", [
    (0.0081, 0.0, 97), (0.1, 0.5, 7), (0.3, -1.2, 3), (1.0, 0.0, 1),
])
def test_chain_transmission_power_law(beta, delta, n):
    t = abs(1.0 - 2.0 * beta / (1.0 - 2.0j * delta))
    params = PhysicalParams(beta=beta, n_atoms=n, detuning=delta)
    assert chain_transmission(params) == pytest.approx(t ** (2 * n), abs=1e-14)


def test_empty_chain_is_coherent():
    params = PhysicalParams(beta=0.1, n_atoms=0)
    curve = chain_g2(params, GRID)
    assert np.all(curve.values == 1.0)
    assert curve.transmission == 1.0
    assert chain_g2_zero(params) == 1.0


def test_single_atom_closed_form_matches_chain():
    for beta, delta in [(0.0081, 0.0), (0.3, 0.0), (0.6, 0.4), (1.0, 0.0)]:
        params = PhysicalParams(beta=beta, n_atoms=1, detuning=delta)
        closed = single_atom_g2(beta, GRID, delta)
        chain = chain_g2(params, GRID)
        np.testing.assert_allclose(chain.values, closed.values, atol=1e-12)


def test_full_coupling_gives_nine():
    assert chain_g2_zero(PhysicalParams(beta=1.0, n_atoms=1)) == pytest.approx(9.0, abs=1e-12)
    curve = single_atom_g2(1.0, GRID)
    assert curve.values[0] == pytest.approx(9.0, abs=1e-12)


def test_steady_state_single_atom_amplitude():
    st = chain_steady_state(PhysicalParams(beta=0.09, n_atoms=1))
    # e = i sqrt(beta) / (-i/2) = -2 sqrt(beta) on resonance
    assert st.single_exc[0] == pytest.approx(-2.0 * math.sqrt(0.09))
    assert st.double_exc.shape == (1, 1)
    assert st.double_exc[0, 0] == 0.0
    assert st.n_atoms == 1


def test_steady_state_pair_amplitude_is_upper_triangular():
    st = chain_steady_state(PhysicalParams(beta=0.1, n_atoms=4))
    assert np.max(np.abs(np.tril(st.double_exc))) == 0.0
    assert np.max(np.abs(np.triu(st.double_exc, k=1))) > 0.0


def test_chain_state_validation():
    with pytest.raises(ParameterError):
        ChainState(1.0, np.zeros(2, complex), np.zeros((3, 3), complex))
    with pytest.raises(ParameterError):
        ChainState(1.0, np.zeros(2, complex), np.array([[0, 0], [1, 0]], complex))


def test_amplitude_relaxes_to_coherent_product():
    params = PhysicalParams(beta=0.1, n_atoms=3)
    amp = chain_two_photon_amplitude(params, TauGrid.linear(40.0, 81))
    t_2n = transmission_coefficient(0.1) ** 6
    assert abs(amp.values[-1] - t_2n) < 1e-8 * abs(t_2n)


def test_curve_and_zero_paths_agree():
    # chain_g2 builds the full delay curve, chain_g2_zero uses the cached
    # equal-time amplitudes; they must agree at tau = 0
    for beta, n in [(0.0081, 150), (0.05, 20), (0.3, 3)]:
        params = PhysicalParams(beta=beta, n_atoms=n)
        curve = chain_g2(params, TauGrid.linear(1.0, 3))
        assert curve.values[0] == pytest.approx(chain_g2_zero(params), rel=1e-12)


def test_collective_pair_enhancement():
    # the pair amplitudes of the N emitters add coherently; the residual
    # deviation grows like (N - 1) beta and stays below 5% out to N = 20
    base = 1.0 - chain_g2_zero(PhysicalParams(beta=0.002, n_atoms=1))
    for n in (2, 5, 10, 20):
        depth = 1.0 - chain_g2_zero(PhysicalParams(beta=0.002, n_atoms=n))
        assert depth / base == pytest.approx(n, rel=0.002 * (n - 1) + 0.01)


def test_quantum_beat_in_bunched_regime():
    # past the g2(0) = 1 crossing the correlated pair component dominates and
    # interferes with the carrier: g2 must dip below 1 at finite delay
    params = PhysicalParams(beta=0.0081, n_atoms=230)
    curve = chain_g2(params, GRID)
    assert curve.values[0] > 2.0
    assert curve.values.min() < 1.0
    assert curve.values.argmin() > 0


def test_vanishing_transmission_raises():
    with pytest.raises(NumericalError) as err:
        chain_g2(PhysicalParams(beta=0.4, n_atoms=50), GRID)
    assert err.value.code == "vanishing-transmission"


def test_detuned_chain_tail_relaxes_to_one():
    params = PhysicalParams(beta=0.05, n_atoms=10, detuning=0.8)
    curve = chain_g2(params, TauGrid.linear(60.0, 121))
    assert curve.values[-1] == pytest.approx(1.0, abs=1e-6)


def test_find_perfect_antibunching_reports_operating_point():
    rep = find_perfect_antibunching(0.05)
    assert rep.g2_zero_at_n_star < 0.5
    assert 0 < rep.n_star < 400
    assert rep.transmission_at_n_star == pytest.approx(
        abs(transmission_coefficient(0.05)) ** (2 * rep.n_star))
    assert rep.n_out == pytest.approx(rep.n_in * rep.transmission_at_n_star)
    assert rep.single_emitter_rate == pytest.approx(0.025)


def test_find_perfect_antibunching_needs_bracketed_minimum():
    # at this coupling the dip sits near N ~ 180; a 50-atom cap cannot see it
    with pytest.raises(NumericalError) as err:
        find_perfect_antibunching(0.0081, n_max=50)
    assert err.value.code == "not-bracketed"


def test_find_perfect_antibunching_warns_on_dark_output():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = find_perfect_antibunching(0.005)
    assert rep.transmission_at_n_star < 0.01
    assert any("rates are essentially zero" in str(w.message) for w in caught)
