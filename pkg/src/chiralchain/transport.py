"""Weak-drive photon transport through a chirally coupled emitter chain.

The chain is driven through the waveguide only in the forward direction, so
in the displaced frame the conditional (no-jump) Hamiltonian is strictly
triangular in the emitter index (Gamma = 1, drive amplitude alpha):

    H_nh = sum_j (-Delta - i/2) sigma_j^+ sigma_j
           - i beta sum_{k > j} sigma_k^+ sigma_j
           - i sqrt(beta) sum_j (alpha sigma_j^+ - alpha* sigma_j)

To second order in alpha the steady state is the pure state

    |psi> = |vac> + sum_j e_j |j> + sum_{j<k} d_jk |jk>,

whose amplitudes solve triangular linear systems (forward substitution):

    (-Delta - i/2) e_j  = i beta sum_{i<j} e_i + i sqrt(beta) alpha
    (-2 Delta - i) d_jk = i beta [ sum_{a<k, a!=j} d_{ja} + sum_{a<j} d_ak ]
                          + i sqrt(beta) alpha (e_j + e_k)

The transmitted field operator is a_out = alpha + sqrt(beta) sum_j sigma_j.
Its normalized coincidence amplitude follows from applying a_out to |psi>,
evolving the resulting vacuum + one-excitation amplitudes under H_nh for the
delay tau (the vacuum amplitude re-pumps the chain, so the conditional state
relaxes back to the steady state), and applying a_out again:

    psi_N(tau) = t^2N + sqrt(beta) sum_j [f_j(tau) - t^N e_j],
    f'(tau) = A f(tau) - sqrt(beta) t^N,   A = (i Delta - 1/2) 1 - beta (lower)

with t = t(Delta) the single-pass transmission.  g2(tau) =
|psi_N(tau)|^2 / |t|^4N, and everything is proportional to alpha^2, so the
solver fixes alpha = 1.  For a single resonant emitter this reduces to the
closed form psi(tau) = t^2 - (1-t)^2 exp(-tau/2).

All results here are leading-order in drive power; the finite-drive physics
lives in ``oracle``, which is kept algorithmically independent.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np
import scipy.linalg

from .core import (
    ComplexCurve,
    G2Curve,
    NumericalError,
    ParameterError,
    PhysicalParams,
    TauGrid,
    validate_params,
)

__all__ = [
    "ChainState",
    "RateReport",
    "transmission_coefficient",
    "od_per_atom",
    "single_atom_g2",
    "chain_steady_state",
    "chain_transmission",
    "chain_two_photon_amplitude",
    "chain_g2",
    "find_perfect_antibunching",
]

TRANSMISSION_FLOOR = 1e-12


def transmission_coefficient(beta: float, detuning: float = 0.0) -> complex:
    """Single-emitter amplitude transmission t(Delta) = 1 - 2 beta / (1 - 2i Delta)."""
    if not 0.0 < beta <= 1.0:
        raise ParameterError("beta-out-of-range", f"beta must be in (0, 1], got {beta}")
    return 1.0 - 2.0 * beta / (1.0 - 2.0j * detuning)


def od_per_atom(beta: float) -> float:
    """Resonant optical depth contributed by one emitter, -2 ln(1 - 2 beta)."""
    if not 0.0 < beta < 0.5:
        raise ParameterError(
            "beta-out-of-range",
            f"od_per_atom needs 0 < beta < 0.5 (|t(0)| > 0), got {beta}",
        )
    return -2.0 * math.log(1.0 - 2.0 * beta)


@dataclass(frozen=True)
class ChainState:
    """Weak-drive steady state amplitudes at alpha = 1.

    single_exc[j] is the one-excitation amplitude of emitter j; double_exc is
    strictly upper triangular, [j, k] with j < k holding the pair amplitude.
    """

    vacuum_amp: complex
    single_exc: np.ndarray
    double_exc: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.single_exc, dtype=complex)
        d = np.asarray(self.double_exc, dtype=complex)
        object.__setattr__(self, "single_exc", e)
        object.__setattr__(self, "double_exc", d)
        n = e.size
        if d.shape != (n, n):
            raise ParameterError("state-shape", "double_exc must be (n, n) for n emitters")
        if n and np.max(np.abs(np.tril(d))) != 0.0:
            raise ParameterError("state-shape", "double_exc must be strictly upper triangular")

    @property
    def n_atoms(self) -> int:
        return self.single_exc.size


class _SteadyChain:
    """Incrementally grown steady-state amplitudes for one (beta, detuning).

    Extending the chain by one emitter never changes the upstream amplitudes
    (the coupling is purely downstream), so scans over N share one build.
    """

    def __init__(self, beta: float, detuning: float):
        self.beta = beta
        self.delta = detuning
        self.t = transmission_coefficient(beta, detuning)
        self.e = np.zeros(0, dtype=complex)
        self.dmat = np.zeros((0, 0), dtype=complex)  # symmetric storage, zero diagonal
        self.rowsum = np.zeros(0, dtype=complex)  # rowsum[j] = sum_k dmat[j, k]
        self.sum_d = [0.0 + 0.0j]  # sum over pairs, per chain length

    def extend_to(self, n: int):
        cur = self.e.size
        if n <= cur:
            return
        sq = math.sqrt(self.beta)
        den1 = -self.delta - 0.5j
        den2 = -2.0 * self.delta - 1.0j
        c1 = 1j * self.beta / den1
        c2 = 1j * self.beta / den2

        e = np.empty(n, dtype=complex)
        e[:cur] = self.e
        dmat = np.zeros((n, n), dtype=complex)
        dmat[:cur, :cur] = self.dmat
        rowsum = np.zeros(n, dtype=complex)
        rowsum[:cur] = self.rowsum

        for k in range(cur, n):
            e[k] = c1 * e[:k].sum() + 1j * sq / den1
            # pair amplitudes d_{jk} for j < k; column prefix sum is sequential
            col_acc = 0.0 + 0.0j
            col = np.empty(k, dtype=complex)
            for j in range(k):
                d = c2 * (rowsum[j] + col_acc) + 1j * sq * (e[j] + e[k]) / den2
                col[j] = d
                col_acc += d
            dmat[:k, k] = col
            dmat[k, :k] = col
            rowsum[:k] += col
            rowsum[k] = col_acc
            self.sum_d.append(self.sum_d[-1] + col_acc)

        self.e, self.dmat, self.rowsum = e, dmat, rowsum

    def psi_zero(self, n: int) -> complex:
        """Two-photon detection amplitude at tau = 0 for chain length n."""
        self.extend_to(n)
        return 2.0 * self.t**n - 1.0 + 2.0 * self.beta * self.sum_d[n]

    def g2_zero(self, n: int) -> float:
        if n == 0:
            return 1.0
        return abs(self.psi_zero(n)) ** 2 / abs(self.t) ** (4 * n)


_CHAINS: dict = {}


def _chain(beta: float, detuning: float) -> _SteadyChain:
    key = (float(beta), float(detuning))
    if key not in _CHAINS:
        if len(_CHAINS) > 16:
            _CHAINS.clear()
        _CHAINS[key] = _SteadyChain(beta, detuning)
    return _CHAINS[key]


def chain_steady_state(params: PhysicalParams) -> ChainState:
    """Weak-drive steady state of the chain (alpha = 1)."""
    validate_params(params)
    n = params.n_atoms
    ch = _chain(params.beta, params.detuning)
    ch.extend_to(n)
    return ChainState(1.0 + 0.0j, ch.e[:n].copy(), np.triu(ch.dmat[:n, :n], k=1))


def chain_transmission(params: PhysicalParams) -> float:
    """Weak-drive power transmission |t(Delta)|^(2N)."""
    validate_params(params)
    t = transmission_coefficient(params.beta, params.detuning)
    return float(abs(t) ** (2 * params.n_atoms))


def _check_transmission(params: PhysicalParams, floor: float) -> float:
    trans = chain_transmission(params)
    if trans < floor:
        raise NumericalError(
            "vanishing-transmission",
            f"power transmission {trans:.3e} below floor {floor:.1e}; g2 of the "
            "transmitted light is ill-conditioned",
        )
    return trans


def chain_two_photon_amplitude(params: PhysicalParams, grid: TauGrid,
                               floor: float = TRANSMISSION_FLOOR) -> ComplexCurve:
    """Transmitted two-photon detection amplitude psi_N(tau) at alpha = 1.

    psi_N relaxes to t^2N at large delay (two independent coherent photons);
    zeros at finite tau are the quantum-beat anticorrelations.
    """
    validate_params(params)
    if grid.unit != "gamma":
        raise ParameterError("grid-bad-unit", "model grids are in units of 1/Gamma")
    n = params.n_atoms
    if n == 0:
        return ComplexCurve(grid, np.ones(grid.values.size, dtype=complex))
    _check_transmission(params, floor)

    ch = _chain(params.beta, params.detuning)
    ch.extend_to(n)
    sq = math.sqrt(params.beta)
    t_n = ch.t**n

    # conditional one-excitation amplitudes right after the first detection,
    # relative to the re-pumped long-delay limit t^N e_j
    f0 = ch.e[:n] + sq * ch.dmat[:n, :n].sum(axis=1)
    df = f0 - t_n * ch.e[:n]

    amp = np.empty(grid.values.size, dtype=complex)
    amp[0] = t_n**2 + sq * df.sum()

    a = np.tril(np.full((n, n), -params.beta, dtype=complex), k=-1)
    a += (1j * params.detuning - 0.5) * np.eye(n)

    taus = grid.values
    props = {}
    for i in range(1, taus.size):
        dt = round(float(taus[i] - taus[i - 1]), 12)
        if dt not in props:
            props[dt] = scipy.linalg.expm(a * dt)
        df = props[dt] @ df
        amp[i] = t_n**2 + sq * df.sum()
    return ComplexCurve(grid, amp)


def chain_g2(params: PhysicalParams, grid: TauGrid,
             floor: float = TRANSMISSION_FLOOR) -> G2Curve:
    """Normalized g2(tau) of the light transmitted through the chain.

    N = 0 gives exactly 1 (the bare coherent state).  Raises
    "vanishing-transmission" when |t|^2N drops below ``floor``.
    """
    validate_params(params)
    if params.n_atoms == 0:
        return G2Curve(grid, np.ones(grid.values.size), transmission=1.0, params=params)
    trans = _check_transmission(params, floor)
    amp = chain_two_photon_amplitude(params, grid, floor)
    values = np.abs(amp.values) ** 2 / trans**2
    return G2Curve(grid, values, transmission=trans, params=params)


def chain_g2_zero(params: PhysicalParams, floor: float = TRANSMISSION_FLOOR) -> float:
    """Equal-time g2(0), without building a delay grid.

    Same model as chain_g2 at tau = 0; O(1) after the cached chain has been
    extended once, so sweeps over N are cheap.
    """
    validate_params(params)
    if params.n_atoms == 0:
        return 1.0
    _check_transmission(params, floor)
    ch = _chain(params.beta, params.detuning)
    ch.extend_to(params.n_atoms)
    return float(ch.g2_zero(params.n_atoms))


def single_atom_g2(beta: float, grid: TauGrid, detuning: float = 0.0) -> G2Curve:
    """Closed-form single-emitter g2: psi = t^2 - (1-t)^2 exp((i Delta - 1/2) tau)."""
    t = transmission_coefficient(beta, detuning)
    if abs(t) ** 2 < TRANSMISSION_FLOOR:
        raise NumericalError(
            "vanishing-transmission",
            f"coherent transmission vanishes at beta = {beta}, detuning = {detuning}",
        )
    if grid.unit != "gamma":
        raise ParameterError("grid-bad-unit", "model grids are in units of 1/Gamma")
    psi = t**2 - (1.0 - t) ** 2 * np.exp((1j * detuning - 0.5) * grid.values)
    return G2Curve(grid, np.abs(psi) ** 2 / abs(t) ** 4, transmission=float(abs(t) ** 2),
                   params=PhysicalParams(beta=beta, n_atoms=1, detuning=detuning))


@dataclass(frozen=True)
class RateReport:
    """Operating point of the chain as a single-photon source.

    n_star                  chain length minimizing g2(0)
    g2_zero_at_n_star       the minimum itself
    transmission_at_n_star  weak-drive power transmission there
    n_in                    assumed input photon rate, units of Gamma
    n_out                   n_in * transmission_at_n_star
    single_emitter_rate     beta/2, the peak rate of one chirally coupled
                            emitter, for comparison
    """

    n_star: int
    g2_zero_at_n_star: float
    transmission_at_n_star: float
    n_in: float
    n_out: float
    single_emitter_rate: float

    def __post_init__(self):
        if not 0.0 < self.transmission_at_n_star < 1.0:
            raise NumericalError("rate-report", "transmission at n_star must be in (0, 1)")


def find_perfect_antibunching(beta: float, detuning: float = 0.0, n_max: int = 400,
                              n_in: float | None = None) -> RateReport:
    """Scan chain length for the deepest g2(0) and report achievable rates.

    n_in defaults to 0.1/beta (the drive that saturates the first emitter to
    s ~ 1).  Raises "not-bracketed" when no interior minimum below 0.5 exists
    within n_max.  Output rates use the weak-drive transmission; the
    finite-drive enhancement of T is beyond this model.
    """
    if n_max < 2:
        raise ParameterError("n-max", "n_max must be >= 2")
    ch = _chain(beta, detuning)
    g2z = np.empty(n_max + 1)
    g2z[0] = 1.0
    last = n_max
    for n in range(1, n_max + 1):
        if abs(ch.t) ** (2 * n) < TRANSMISSION_FLOOR:
            last = n - 1
            break
        g2z[n] = ch.g2_zero(n)
    g2z = g2z[: last + 1]
    n_star = int(np.argmin(g2z))
    if g2z[n_star] >= 0.5 or n_star == 0 or n_star >= last:
        raise NumericalError(
            "not-bracketed",
            f"no interior g2(0) minimum below 0.5 for beta = {beta} within N <= {n_max}",
        )
    trans = float(abs(ch.t) ** (2 * n_star))
    if trans < 0.01:
        warnings.warn(
            f"transmission at the antibunching point is only {trans:.2e}; "
            "output rates are essentially zero in this coupling regime",
            RuntimeWarning,
        )
    if n_in is None:
        n_in = 0.1 / beta
    if n_in < 0:
        raise ParameterError("drive-rate-out-of-range", "n_in must be >= 0")
    return RateReport(
        n_star=n_star,
        g2_zero_at_n_star=float(g2z[n_star]),
        transmission_at_n_star=trans,
        n_in=float(n_in),
        n_out=float(n_in * trans),
        single_emitter_rate=beta / 2.0,
    )
