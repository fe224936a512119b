"""Shared types for the chiral-chain photon correlation toolkit.

Unit conventions used throughout:

* Rates and detunings are in units of the total single-emitter decay rate
  Gamma (Gamma = 1 internally).  Delay grids are in units of 1/Gamma unless
  the grid is explicitly tagged as nanoseconds.
* Conversion to physical time happens only at I/O boundaries, via the
  natural linewidth Gamma/2pi entered in MHz (see ``time_unit_ns``).
* Correlation curves are stored on tau >= 0 only; g2(-tau) = g2(tau) by
  construction and negative delays are produced by mirroring on output.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
import math

import numpy as np

__all__ = [
    "ParameterError",
    "NumericalError",
    "DataError",
    "PhysicalParams",
    "TauGrid",
    "G2Curve",
    "ComplexCurve",
    "validate_params",
    "time_unit_ns",
]


class ParameterError(ValueError):
    """Invalid physical or configuration parameter."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class NumericalError(RuntimeError):
    """Computation left its domain of validity (non-convergence, vanishing
    transmission, unbracketed minimum, ...)."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class DataError(ValueError):
    """Malformed or insufficient measurement data."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def time_unit_ns(gamma_mhz: float) -> float:
    """Length of the natural time unit 1/Gamma in ns, for Gamma/2pi in MHz."""
    if gamma_mhz <= 0:
        raise ParameterError("gamma-not-positive", f"gamma_mhz must be > 0, got {gamma_mhz}")
    return 1e3 / (2.0 * math.pi * gamma_mhz)


@dataclass(frozen=True)
class PhysicalParams:
    """Parameters of the driven emitter chain.

    beta                fraction of emission into the forward waveguide mode
    n_atoms             number of emitters in the chain
    detuning            drive detuning from atomic resonance, units of Gamma
    drive_photon_rate   input photon rate, units of Gamma (0 = weak-drive limit)
    """

    beta: float
    n_atoms: int
    detuning: float = 0.0
    drive_photon_rate: float = 0.0


def validate_params(params: PhysicalParams) -> PhysicalParams:
    """Check a PhysicalParams against its domain; returns it unchanged."""
    b = params.beta
    if not (isinstance(b, (int, float)) and math.isfinite(b)):
        raise ParameterError("beta-not-finite", f"beta must be finite, got {b!r}")
    if not 0.0 < b <= 1.0:
        raise ParameterError("beta-out-of-range", f"beta must be in (0, 1], got {b}")
    n = params.n_atoms
    if not (isinstance(n, (int, np.integer)) and not isinstance(n, bool)):
        raise ParameterError("n-atoms-not-integer", f"n_atoms must be an integer, got {n!r}")
    if n < 0:
        raise ParameterError("n-atoms-negative", f"n_atoms must be >= 0, got {n}")
    if not math.isfinite(params.detuning):
        raise ParameterError("detuning-not-finite", f"detuning must be finite, got {params.detuning!r}")
    if not (math.isfinite(params.drive_photon_rate) and params.drive_photon_rate >= 0.0):
        raise ParameterError(
            "drive-rate-out-of-range",
            f"drive_photon_rate must be >= 0, got {params.drive_photon_rate!r}",
        )
    return params


@dataclass(frozen=True)
class TauGrid:
    """Delay grid, tau >= 0, strictly increasing, starting at 0.

    symmetric  whether the associated curve is to be mirrored to tau < 0
    unit       "gamma" (units of 1/Gamma) or "ns"
    """

    values: np.ndarray
    symmetric: bool = True
    unit: str = "gamma"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size < 2:
            raise ParameterError("grid-too-small", "tau grid needs at least 2 points")
        if v[0] != 0.0:
            raise ParameterError("grid-missing-zero", "tau grid must contain tau = 0")
        if np.any(np.diff(v) <= 0):
            raise ParameterError("grid-not-increasing", "tau grid must be strictly increasing")
        if self.unit not in ("gamma", "ns"):
            raise ParameterError("grid-bad-unit", f"unit must be 'gamma' or 'ns', got {self.unit!r}")

    @classmethod
    def linear(cls, tau_max: float, n_points: int, symmetric: bool = True, unit: str = "gamma"):
        return cls(np.linspace(0.0, tau_max, n_points), symmetric=symmetric, unit=unit)

    def mirrored_values(self) -> np.ndarray:
        """Full two-sided grid (negative delays prepended) for output."""
        if not self.symmetric:
            return self.values
        return np.concatenate([-self.values[:0:-1], self.values])

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "symmetric": self.symmetric, "unit": self.unit}

    @classmethod
    def from_dict(cls, d: dict) -> "TauGrid":
        return cls(np.asarray(d["values"], dtype=float), bool(d["symmetric"]), str(d["unit"]))


def _mirror(grid: TauGrid, values: np.ndarray) -> np.ndarray:
    if not grid.symmetric:
        return values
    return np.concatenate([values[:0:-1], values])


@dataclass(frozen=True)
class G2Curve:
    """Normalized second-order correlation on a TauGrid.

    transmission  resonant power transmission of the configuration (optional)
    params        generating parameters, when the curve came from the model
    """

    grid: TauGrid
    values: np.ndarray
    transmission: float | None = None
    params: PhysicalParams | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != self.grid.values.shape:
            raise ParameterError("curve-shape-mismatch", "values and grid must have equal length")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise ParameterError("curve-negative", "g2 values must be finite and >= 0")
        # long-delay curves must have relaxed to the coherent level
        if self.grid.unit == "gamma" and self.grid.values[-1] > 50.0:
            if abs(v[-1] - 1.0) > 0.02:
                raise NumericalError(
                    "tail-not-unity",
                    f"g2 at tau = {self.grid.values[-1]:g}/Gamma is {v[-1]:g}, expected 1 within 2%",
                )

    def mirrored(self) -> tuple[np.ndarray, np.ndarray]:
        """(tau, g2) over the full symmetric range, for output."""
        return self.grid.mirrored_values(), _mirror(self.grid, self.values)

    def value_at(self, tau: float) -> float:
        """Linear interpolation at |tau|; 1 beyond the grid."""
        return float(np.interp(abs(tau), self.grid.values, self.values, right=1.0))

    def to_dict(self) -> dict:
        d = {"grid": self.grid.to_dict(), "values": self.values.tolist(),
             "transmission": self.transmission}
        d["params"] = None if self.params is None else asdict(self.params)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "G2Curve":
        params = None if d.get("params") is None else PhysicalParams(**d["params"])
        return cls(TauGrid.from_dict(d["grid"]), np.asarray(d["values"], dtype=float),
                   d.get("transmission"), params)


@dataclass(frozen=True)
class ComplexCurve:
    """Complex amplitude on a TauGrid (e.g. the two-photon detection amplitude)."""

    grid: TauGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", v)
        if v.shape != self.grid.values.shape:
            raise ParameterError("curve-shape-mismatch", "values and grid must have equal length")
        if not np.all(np.isfinite(v)):
            raise ParameterError("curve-not-finite", "amplitude values must be finite")

    def mirrored(self) -> tuple[np.ndarray, np.ndarray]:
        return self.grid.mirrored_values(), _mirror(self.grid, self.values)

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(),
                "values": [[z.real, z.imag] for z in self.values]}

    @classmethod
    def from_dict(cls, d: dict) -> "ComplexCurve":
        vals = np.array([complex(re, im) for re, im in d["values"]])
        return cls(TauGrid.from_dict(d["grid"]), vals)
