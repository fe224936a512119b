"""Brute-force master-equation reference for small chains.

Everything here works on the full 2^N dimensional density matrix of the
cascaded chain under a finite coherent drive.  In the frame displaced by the
coherent input the model is

    drho/dt = -i[H, rho] + D[J0] rho + sum_j D[sqrt((1-beta)Gamma) sigma_j] rho

    H  = sum_j -Delta sigma_j^+ sigma_j
         - (i beta Gamma / 2) sum_{j<k} (sigma_k^+ sigma_j - sigma_j^+ sigma_k)
         - i sqrt(beta Gamma) sum_j (alpha sigma_j^+ - alpha* sigma_j)

with J0 = sqrt(beta Gamma) sum_j sigma_j the collective waveguide jump
operator and upstream emitters (lower index) feeding downstream ones.  The
transmitted field in normally ordered correlators is a_out = alpha + J0.

True weak-drive quantities are obtained from two finite drives with
amplitude ratio 1 : 1/2 by two-point Richardson extrapolation in drive
power, which cancels the O(|alpha|^2) saturation correction.

This module is the independent check on the perturbative chain solver in
``transport``; the two share no solver code on purpose.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .core import (
    G2Curve,
    NumericalError,
    ParameterError,
    PhysicalParams,
    TauGrid,
    validate_params,
)

__all__ = [
    "OracleConfig",
    "DensityOperator",
    "CascadedGenerator",
    "build_cascaded_generator",
    "oracle_steady_state",
    "oracle_propagate",
    "oracle_g2",
    "oracle_transmission",
]

_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|, basis (g, e)


@dataclass(frozen=True)
class OracleConfig:
    """Settings of the brute-force reference.

    drive_saturations   first-atom saturation parameters s = 8 beta |alpha|^2
                        of the probe drives, consecutive power ratio 4:1
                        (amplitude 2:1).  Two drives give the plain two-point
                        Richardson elimination of the O(power) correction;
                        with more drives the elimination is iterated to the
                        next orders.  The defaults look tiny but the
                        saturation correction to g2 is amplified by the
                        inverse chain transmission, so strongly coupled
                        chains need very weak probes.
    rk4_step            fixed integrator step, units of 1/Gamma
    max_atoms           soft cap on N (full density matrix is 4^N numbers)
    extrapolation_tol   allowed change of the extrapolation when the finest
                        drive is dropped, relative to the curve's maximum
    """

    drive_saturations: tuple = (0.004, 0.001, 0.00025)
    rk4_step: float = 0.005
    max_atoms: int = 4
    extrapolation_tol: float = 0.1

    def __post_init__(self):
        s = tuple(float(x) for x in self.drive_saturations)
        object.__setattr__(self, "drive_saturations", s)
        if len(s) < 2:
            raise ParameterError("oracle-drives", "need at least two drive strengths")
        if any(x <= 0 for x in s):
            raise ParameterError("oracle-drives", "drive saturations must be > 0")
        if max(s) >= 0.2:
            raise ParameterError("oracle-drives", "probe drives must stay below saturation 0.2")
        srt = sorted(s)
        for lo, hi in zip(srt, srt[1:]):
            if not math.isclose(hi / lo, 4.0, rel_tol=1e-9):
                raise ParameterError("oracle-drives", "consecutive drives must have power ratio 4:1")
        if not 0.0 < self.rk4_step <= 0.01:
            raise ParameterError("oracle-step", "rk4_step must be in (0, 0.01]/Gamma")


@dataclass(frozen=True)
class DensityOperator:
    """Validated density matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ParameterError("rho-not-square", "density matrix must be square")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise NumericalError("rho-not-hermitian", "density matrix not Hermitian within 1e-12")
        if abs(np.trace(m).real - 1.0) > 1e-10 or abs(np.trace(m).imag) > 1e-10:
            raise NumericalError("rho-trace", "density matrix trace differs from 1 beyond 1e-10")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -1e-10:
            raise NumericalError("rho-not-positive", "density matrix has eigenvalue below -1e-10")


class CascadedGenerator:
    """Liouvillian of the displaced-frame cascaded chain at one drive."""

    def __init__(self, params: PhysicalParams, drive_amplitude: float):
        validate_params(params)
        n = params.n_atoms
        if n < 1:
            raise ParameterError("n-atoms-negative", "oracle needs at least one emitter")
        self.params = params
        self.alpha = float(drive_amplitude)
        self.dim = 2 ** n

        sig = [_site_op(_SIGMA, j, n) for j in range(n)]
        beta = params.beta
        delta = params.detuning
        num = sum(s.conj().T @ s for s in sig)

        h = -delta * num
        for j in range(n):
            for k in range(j + 1, n):
                h = h + (-0.5j * beta) * (sig[k].conj().T @ sig[j] - sig[j].conj().T @ sig[k])
        j0 = math.sqrt(beta) * sum(sig)
        h = h + (-1j * self.alpha) * (j0.conj().T - j0)  # real drive amplitude

        self.hamiltonian = h
        self.waveguide_jump = j0
        self.side_jumps = [math.sqrt((1.0 - beta)) * s for s in sig] if beta < 1.0 else []
        self.output_op = self.alpha * np.eye(self.dim) + j0

    def liouvillian(self) -> np.ndarray:
        """Dense superoperator on row-major vec(rho)."""
        d = self.dim
        eye = np.eye(d)
        h = self.hamiltonian
        lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for c in [self.waveguide_jump] + self.side_jumps:
            cdc = c.conj().T @ c
            lv += np.kron(c, c.conj())
            lv -= 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
        return lv


def _site_op(op: np.ndarray, site: int, n: int) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for j in range(n):
        out = np.kron(out, op if j == site else np.eye(2))
    return out


def build_cascaded_generator(params: PhysicalParams, drive_amplitude: float) -> CascadedGenerator:
    return CascadedGenerator(params, drive_amplitude)


def oracle_steady_state(gen: CascadedGenerator) -> DensityOperator:
    """Steady state from the Liouvillian null space plus the trace condition."""
    d = gen.dim
    lv = gen.liouvillian()
    trace_row = np.eye(d, dtype=complex).reshape(1, d * d)
    aug = np.vstack([lv, trace_row])
    rhs = np.zeros(d * d + 1, dtype=complex)
    rhs[-1] = 1.0
    vec, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    resid = np.linalg.norm(lv @ vec)
    if resid > 1e-8:
        raise NumericalError("steady-state", f"null-space residual {resid:.2e}")
    rho = vec.reshape(d, d)
    DensityOperator(rho)  # validates the raw solution against the physicality bounds
    return DensityOperator((rho + rho.conj().T) / 2)


def _rk4(lv: np.ndarray, vec: np.ndarray, dt: float, n_steps: int) -> np.ndarray:
    for _ in range(n_steps):
        k1 = lv @ vec
        k2 = lv @ (vec + 0.5 * dt * k1)
        k3 = lv @ (vec + 0.5 * dt * k2)
        k4 = lv @ (vec + dt * k3)
        vec = vec + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return vec


def oracle_propagate(gen: CascadedGenerator, rho: np.ndarray, t: float,
                     step: float = 0.005) -> np.ndarray:
    """Evolve an operator under the master equation for time t (fixed-step RK4)."""
    if t < 0:
        raise ParameterError("negative-time", "propagation time must be >= 0")
    if t == 0.0:
        return np.array(rho, dtype=complex)
    lv = gen.liouvillian()
    n_steps = max(1, int(math.ceil(t / step)))
    return _rk4(lv, np.asarray(rho, dtype=complex).reshape(-1), t / n_steps, n_steps).reshape(rho.shape)


def _finite_drive_g2(gen: CascadedGenerator, grid: TauGrid, step: float) -> np.ndarray:
    """g2(tau) of the transmitted field at one finite drive, by quantum regression."""
    rho = oracle_steady_state(gen).matrix
    a = gen.output_op
    ada = a.conj().T @ a
    n_out = np.trace(ada @ rho).real
    if n_out <= 0:
        raise NumericalError("no-output", "steady output photon rate vanished")
    chi = (a @ rho @ a.conj().T).reshape(-1)
    lv = gen.liouvillian()
    ada_vec = ada.T.reshape(-1)  # Tr[ada @ X] = ada_vec . vec(X), row-major

    taus = grid.values
    out = np.empty(taus.size)
    out[0] = float(np.real(ada_vec @ chi)) / n_out**2
    for i in range(1, taus.size):
        dt = taus[i] - taus[i - 1]
        n_steps = max(1, int(math.ceil(dt / step)))
        chi = _rk4(lv, chi, dt / n_steps, n_steps)
        out[i] = float(np.real(ada_vec @ chi)) / n_out**2
    return out


def _richardson(curves: list) -> tuple:
    """Iterated Richardson in drive power (consecutive power ratio 4).

    curves are ordered strongest drive first.  g(P) = g0 + c1 P + c2 P^2 + ...
    with P_i = P_0 / 4^i; each stage cancels one more order.  Returns the
    fully extrapolated value and the one with the finest drive left out, as
    an error estimate.
    """
    tab = list(curves)
    top_prev = tab[0]
    for m in range(1, len(curves)):
        w = 4.0**m
        top_prev = tab[0]
        tab = [(w * tab[i + 1] - tab[i]) / (w - 1.0) for i in range(len(tab) - 1)]
    return tab[0], top_prev


def _drive_amplitudes(params: PhysicalParams, config: OracleConfig):
    """Probe amplitudes, strongest first."""
    sats = sorted(config.drive_saturations, reverse=True)
    return [math.sqrt(s / (8.0 * params.beta)) for s in sats]


def _check_atoms(params: PhysicalParams, config: OracleConfig):
    if params.n_atoms > config.max_atoms:
        warnings.warn(
            f"oracle with N = {params.n_atoms} emitters builds a {4 ** params.n_atoms}"
            " dimensional Liouvillian; expect it to be slow",
            RuntimeWarning,
        )


@dataclass(frozen=True)
class OracleG2Result:
    """Extrapolated curve plus the finite-drive raw material."""

    curve: G2Curve
    drive_saturations: tuple
    extrapolation_gap: float


def oracle_g2(params: PhysicalParams, grid: TauGrid, config: OracleConfig = OracleConfig()) -> OracleG2Result:
    """Weak-drive g2(tau) of the transmitted light, by brute force.

    Runs the full master equation at the two finest configured drives and
    Richardson-extrapolates the two finite-drive correlation curves to zero
    power.  Raises "not-converged" when the two drives disagree by more than
    config.extrapolation_tol relative to the extrapolated curve, i.e. when
    the probes are too strong for the linear correction model.
    """
    validate_params(params)
    _check_atoms(params, config)
    if grid.unit != "gamma":
        raise ParameterError("grid-bad-unit", "oracle grids are in units of 1/Gamma")
    curves = [
        _finite_drive_g2(build_cascaded_generator(params, amp), grid, config.rk4_step)
        for amp in _drive_amplitudes(params, config)
    ]
    g0, g_without_finest = _richardson(curves)
    gap = float(np.max(np.abs(g0 - g_without_finest)) / max(float(np.max(g0)), 1.0))
    if gap > config.extrapolation_tol:
        raise NumericalError(
            "not-converged",
            f"extrapolation moved by {gap:.3f} of the curve scale when the finest "
            "drive was added; weaken the probe drives",
        )
    # extrapolation noise can leave tiny negatives near the beat zeros
    if np.min(g0) < -1e-4 * max(float(np.max(g0)), 1.0):
        raise NumericalError("not-converged", f"extrapolated g2 reached {np.min(g0):.2e} < 0")
    g0 = np.clip(g0, 0.0, None)
    t_weak = oracle_transmission(params, config)
    curve = G2Curve(grid, g0, transmission=t_weak, params=params)
    return OracleG2Result(curve, tuple(sorted(config.drive_saturations)), gap)


def oracle_transmission(params: PhysicalParams, config: OracleConfig = OracleConfig()) -> float:
    """Weak-drive power transmission Tr[a_out^dag a_out rho_ss] / |alpha|^2."""
    validate_params(params)
    _check_atoms(params, config)
    vals = []
    for amp in _drive_amplitudes(params, config):
        gen = build_cascaded_generator(params, amp)
        rho = oracle_steady_state(gen).matrix
        a = gen.output_op
        vals.append(np.trace(a.conj().T @ a @ rho).real)
    trans, _ = _richardson([v / a**2 for v, a in zip(vals, _drive_amplitudes(params, config))])
    return float(trans)
