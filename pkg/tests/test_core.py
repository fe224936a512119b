"""Shared types: grids, curves, parameter validation, unit conversion."""

import math

import numpy as np
import pytest

from chiralchain import (
    ComplexCurve,
    G2Curve,
    NumericalError,
    ParameterError,
    PhysicalParams,
    TauGrid,
    time_unit_ns,
    validate_params,
)


def test_time_unit_ns():
    assert time_unit_ns(5.2) == pytest.approx(1e3 / (2 * math.pi * 5.2))
    assert time_unit_ns(5.2) == pytest.approx(30.607, rel=1e-4)
    with pytest.raises(ParameterError):
        time_unit_ns(0.0)
    with pytest.raises(ParameterError):
        time_unit_ns(-3.0)


def test_validate_params_accepts_and_returns():
    p = PhysicalParams(beta=0.1, n_atoms=3, detuning=0.5)
    assert validate_params(p) is p
    validate_params(PhysicalParams(beta=1.0, n_atoms=0))


@pytest.mark.parametrize("bad", [
    PhysicalParams(beta=0.0, n_atoms=1),
    PhysicalParams(beta=1.2, n_atoms=1),
    PhysicalParams(beta=float("nan"), n_atoms=1),
    PhysicalParams(beta=0.1, n_atoms=-1),
    PhysicalParams(beta=0.1, n_atoms=2.5),
    PhysicalParams(beta=0.1, n_atoms=True),
    PhysicalParams(beta=0.1, n_atoms=1, detuning=float("inf")),
    PhysicalParams(beta=0.1, n_atoms=1, drive_photon_rate=-0.1),
])
def test_validate_params_rejects(bad):
    with pytest.raises(ParameterError):
        validate_params(bad)


def test_tau_grid_linear():
    g = TauGrid.linear(10.0, 101)
    assert g.values[0] == 0.0
    assert g.values[-1] == 10.0
    assert g.values.size == 101
    assert g.unit == "gamma"
    assert g.symmetric


def test_tau_grid_validation():
    with pytest.raises(ParameterError):
        TauGrid(np.array([0.0]))
    with pytest.raises(ParameterError):
        TauGrid(np.array([1.0, 2.0]))
    with pytest.raises(ParameterError):
        TauGrid(np.array([0.0, 2.0, 2.0]))
    with pytest.raises(ParameterError):
        TauGrid(np.array([0.0, 1.0]), unit="seconds")


def test_tau_grid_mirroring():
    g = TauGrid(np.array([0.0, 1.0, 3.0]))
    np.testing.assert_array_equal(g.mirrored_values(), [-3.0, -1.0, 0.0, 1.0, 3.0])
    one_sided = TauGrid(np.array([0.0, 1.0, 3.0]), symmetric=False)
    np.testing.assert_array_equal(one_sided.mirrored_values(), [0.0, 1.0, 3.0])


def test_tau_grid_dict_round_trip():
    g = TauGrid.linear(5.0, 11, symmetric=False, unit="ns")
    g2 = TauGrid.from_dict(g.to_dict())
    np.testing.assert_array_equal(g.values, g2.values)
    assert g2.symmetric is False and g2.unit == "ns"


def test_g2_curve_validation():
    grid = TauGrid.linear(2.0, 5)
    with pytest.raises(ParameterError):
        G2Curve(grid, np.ones(4))
    with pytest.raises(ParameterError):
        G2Curve(grid, np.array([1.0, 1.0, -0.1, 1.0, 1.0]))
    with pytest.raises(ParameterError):
        G2Curve(grid, np.array([1.0, 1.0, np.nan, 1.0, 1.0]))


def test_g2_curve_tail_check_only_for_long_natural_grids():
    long_grid = TauGrid.linear(60.0, 61)
    with pytest.raises(NumericalError):
        G2Curve(long_grid, np.full(61, 1.5))
    # short grids and physical-time grids may end anywhere
    G2Curve(TauGrid.linear(10.0, 11), np.full(11, 1.5))
    G2Curve(TauGrid.linear(60.0, 61, unit="ns"), np.full(61, 1.5))


def test_g2_curve_value_at():
    grid = TauGrid(np.array([0.0, 1.0, 2.0]))
    c = G2Curve(grid, np.array([0.0, 0.5, 1.0]))
    assert c.value_at(0.0) == 0.0
    assert c.value_at(0.5) == pytest.approx(0.25)
    assert c.value_at(-0.5) == pytest.approx(0.25)  # even in tau
    assert c.value_at(7.0) == 1.0  # beyond the grid: uncorrelated


def test_g2_curve_mirrored_and_dict_round_trip():
    grid = TauGrid(np.array([0.0, 1.0, 2.0]))
    c = G2Curve(grid, np.array([0.2, 0.6, 1.0]), transmission=0.5,
                params=PhysicalParams(beta=0.1, n_atoms=2))
    tau, vals = c.mirrored()
    np.testing.assert_array_equal(tau, [-2.0, -1.0, 0.0, 1.0, 2.0])
    np.testing.assert_array_equal(vals, [1.0, 0.6, 0.2, 0.6, 1.0])
    c2 = G2Curve.from_dict(c.to_dict())
    np.testing.assert_allclose(c2.values, c.values)
    assert c2.transmission == c.transmission
    assert c2.params == c.params


def test_complex_curve():
    grid = TauGrid(np.array([0.0, 1.0]))
    c = ComplexCurve(grid, np.array([1 + 2j, 3 - 1j]))
    c2 = ComplexCurve.from_dict(c.to_dict())
    np.testing.assert_allclose(c2.values, c.values)
    with pytest.raises(ParameterError):
        ComplexCurve(grid, np.array([np.inf + 0j, 0j]))
