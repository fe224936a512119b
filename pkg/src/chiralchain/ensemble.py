"""Atom-number calibration and run-to-run averaging.

The optical depth of the chain is additive, OD = N * od_per_atom(beta), so a
measured OD fixes the mean atom number once beta is known.  Repeated runs do
not share a single N, and the OD that sorts a run into a histogram bin is
itself estimated from the transmitted probe photons of that run.  The model
of a measurement campaign used here has three ingredients:

  * nominal loadings: one trap setting per OD bin, continued at 0.5 OD pitch
    beyond the binning scheme up to a saturation OD; the run density grows
    like exp(gain * OD) toward full loading (deep ensembles are where most
    probing time is spent);
  * preparation spread: per setting, the true atom number scatters as a
    truncated discretized Gaussian with configurable relative width (the
    measured preparation statistics are not public, so this stays a free
    model surfaced in config);
  * OD estimation noise: the transmitted count per run is Poisson with mean
    budget * T_N and the bin is chosen from od_hat = -ln(count / budget).
    Runs with zero counts have no finite od_hat and are clamped to the
    topmost reachable bin, the one containing ln(budget).  This clamp is
    what piles every deep-loading run into the last data bin and produces
    the strong bunching there: those runs transmit almost no coherent light,
    but their photon-pair rate does not attenuate, so they dominate the
    pooled coincidences of that bin.

Pooled coincidence histograms weight every run by its pair rate, i.e. by the
square of the transmitted rate, so distribution averages use w_N * T_N**2
weights rather than bare probabilities.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import (
    DataError,
    G2Curve,
    ParameterError,
    PhysicalParams,
    TauGrid,
    validate_params,
)
from .transport import _chain, chain_g2, chain_transmission, od_per_atom

__all__ = [
    "OdBinSpec",
    "NumberDistribution",
    "od_to_atoms",
    "build_number_distribution",
    "averaged_g2",
    "averaged_g2_zero",
    "SweepRow",
    "sweep_g2_vs_od",
    "LOADING_GAIN",
    "LOADING_MAX_OD",
]

# (od_max, bin_width) segments; finer bins where the dip lives
OD_BIN_SEGMENTS = ((4.0, 0.1), (5.0, 0.25), (8.0, 0.5))

# campaign defaults: run density e-folds per unit OD, loading saturation OD
LOADING_GAIN = 1.7
LOADING_MAX_OD = 9.5


def _scheme_edges() -> np.ndarray:
    edges = [0.0]
    for od_max, width in OD_BIN_SEGMENTS:
        while edges[-1] < od_max - 1e-9:
            edges.append(round(edges[-1] + width, 10))
    return np.asarray(edges)


@dataclass(frozen=True)
class OdBinSpec:
    """OD histogram scheme plus the photon budget behind each OD estimate.

    ``photon_budget`` is the expected number of detected probe photons per
    run at unit transmission; np.inf turns the estimator noiseless.
    """

    edges: np.ndarray
    photon_budget: float = 1000.0

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ParameterError("bad-bin-edges", "edges must be strictly increasing")
        if not self.photon_budget > 0:
            raise ParameterError("bad-photon-budget",
                                 f"photon budget must be > 0, got {self.photon_budget}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def default(cls, photon_budget: float = 1000.0) -> "OdBinSpec":
        return cls(_scheme_edges(), photon_budget)

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def bin_index(self, od: float) -> int:
        """Index of the (lo, hi] bin containing od, or -1 when off scheme."""
        if not np.isfinite(od):
            return -1
        i = int(np.searchsorted(self.edges, od, side="left")) - 1
        if i < 0 or i >= self.n_bins or od <= self.edges[0]:
            return -1
        return i

    def zero_count_bin(self) -> int:
        """Bin receiving zero-count runs: the one containing ln(budget).

        od_hat cannot exceed ln(budget) (that is the one-count value), so
        runs without any transmitted photon are clamped there.  Noiseless
        estimators have no zero-count runs; returns -1 then.
        """
        if np.isinf(self.photon_budget):
            return -1
        od_top = min(math.log(self.photon_budget), float(self.edges[-1]))
        idx = self.bin_index(od_top)
        return 0 if idx < 0 else idx


@dataclass(frozen=True)
class NumberDistribution:
    """Distribution of true atom number behind one OD bin.

    ``rate_weights`` are the per-N transmitted rate factors (resonant power
    transmissions), kept separate from the probabilities because coincidence
    averages weight runs by rate squared.
    """

    support: np.ndarray
    weights: np.ndarray
    rate_weights: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=int)
        weights = np.asarray(self.weights, dtype=float)
        rates = np.asarray(self.rate_weights, dtype=float)
        if support.ndim != 1 or support.size == 0:
            raise DataError("empty-support", "number distribution has empty support")
        if np.any(np.diff(support) <= 0) or np.any(support < 0):
            raise ParameterError("bad-support",
                                 "support must be strictly increasing nonnegative ints")
        if weights.shape != support.shape or rates.shape != support.shape:
            raise ParameterError("bad-weights", "weights must align with support")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ParameterError("bad-weights",
                                 "weights must be nonnegative and sum to 1")
        if np.any(rates <= 0):
            raise ParameterError("bad-weights", "rate weights must be positive")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "rate_weights", rates)

    @property
    def mean(self) -> float:
        return float(self.weights @ self.support)

    def to_dict(self) -> dict:
        return {
            "support": self.support.tolist(),
            "weights": self.weights.tolist(),
            "rate_weights": self.rate_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NumberDistribution":
        return cls(np.asarray(data["support"]), np.asarray(data["weights"]),
                   np.asarray(data["rate_weights"]))


def od_to_atoms(od: float, beta: float) -> float:
    """Mean atom number behind a measured optical depth."""
    if not od >= 0:
        raise ParameterError("bad-od", f"optical depth must be >= 0, got {od}")
    return od / od_per_atom(beta)


def _preparation_pmf(center: float, spread: float) -> tuple[np.ndarray, np.ndarray]:
    """Truncated discretized Gaussian over integer N, relative width spread."""
    sigma = spread * center
    if sigma <= 0.0:
        return np.array([int(round(center))]), np.array([1.0])
    lo = max(0, int(math.floor(center - 6.0 * sigma)))
    hi = int(math.ceil(center + 6.0 * sigma))
    ns = np.arange(lo, hi + 1)
    pmf = np.exp(-0.5 * ((ns - center) / sigma) ** 2)
    return ns, pmf / pmf.sum()


def _nominal_loadings(bins: OdBinSpec, loading_gain: float,
                      loading_max_od: float) -> tuple[np.ndarray, np.ndarray]:
    """Campaign settings (nominal OD, run fraction): one per scheme bin,
    continued at 0.5 OD pitch up to the loading saturation OD."""
    ods = list(bins.centers)
    widths = list(np.diff(bins.edges))
    od = float(bins.edges[-1]) + 0.25
    while od <= loading_max_od + 1e-9:
        ods.append(od)
        widths.append(0.5)
        od += 0.5
    ods = np.asarray(ods)
    wgt = np.exp(loading_gain * ods) * np.asarray(widths)
    return ods, wgt / wgt.sum()


def _campaign_prior(bins: OdBinSpec, beta: float, spread: float,
                    loading_gain: float, loading_max_od: float) -> np.ndarray:
    """Prior over true N for the whole campaign, p[n] on n = 0..nmax."""
    ods, wnom = _nominal_loadings(bins, loading_gain, loading_max_od)
    od_atom = od_per_atom(beta)
    nmax = int(math.ceil((ods[-1] / od_atom) * (1.0 + 6.0 * spread))) + 2
    prior = np.zeros(nmax + 1)
    for od_nom, w in zip(ods, wnom):
        ns, pmf = _preparation_pmf(od_nom / od_atom, spread)
        sel = ns <= nmax
        prior[ns[sel]] += w * pmf[sel]
    return prior / prior.sum()


def _assignment_prob(ns: np.ndarray, beta: float, bins: OdBinSpec,
                     bin_index: int) -> np.ndarray:
    """P(run with true N lands in the given OD bin) under Poisson counting."""
    lo, hi = bins.edges[bin_index], bins.edges[bin_index + 1]
    budget = bins.photon_budget
    od_atom = od_per_atom(beta)
    if np.isinf(budget):
        od_true = ns * od_atom
        return ((od_true > lo) & (od_true <= hi)).astype(float)
    mu = budget * np.exp(-ns * od_atom)
    # od_hat in (lo, hi]  <=>  budget e^{-hi} <= count < budget e^{-lo}
    c_lo = math.ceil(budget * math.exp(-hi))
    c_hi = math.ceil(budget * math.exp(-lo))  # exclusive
    if c_hi > c_lo:
        prob = stats.poisson.cdf(c_hi - 1, mu) - stats.poisson.cdf(c_lo - 1, mu)
    else:
        prob = np.zeros(ns.size)
    if bin_index == bins.zero_count_bin():
        prob = prob + np.exp(-mu)
    return prob


def build_number_distribution(bins: OdBinSpec, bin_index: int, beta: float,
                              preparation_spread: float = 0.1,
                              loading_gain: float = LOADING_GAIN,
                              loading_max_od: float = LOADING_MAX_OD,
                              ) -> NumberDistribution:
    """Atom-number distribution of the runs sorted into one OD bin.

    Multiplies the campaign prior over true N (nominal loadings convolved
    with the preparation spread) by the shot-noise probability of the OD
    estimate landing in the bin, then normalizes.  Bins that no count value
    can reach (between ln(budget) and the scheme top) raise "empty-support".
    """
    if not 0 <= bin_index < bins.n_bins:
        raise ParameterError("bad-bin-index",
                             f"bin index {bin_index} outside 0..{bins.n_bins - 1}")
    if not 0.0 <= preparation_spread <= 1.0:
        raise ParameterError("bad-spread",
                             f"relative spread must be in [0, 1], got {preparation_spread}")
    if not (np.isfinite(loading_gain) and loading_gain >= 0.0):
        raise ParameterError("bad-loading", "loading gain must be finite and >= 0")
    if not loading_max_od >= bins.edges[-1]:
        raise ParameterError("bad-loading",
                             "loading must reach at least the top of the bin scheme")
    prior = _campaign_prior(bins, beta, preparation_spread,
                            loading_gain, loading_max_od)
    ns = np.arange(prior.size)
    weights = prior * _assignment_prob(ns, beta, bins, bin_index)
    total = weights.sum()
    if total <= 0.0:
        raise DataError("empty-support",
                        f"no campaign run reaches OD bin {bin_index}")
    keep = weights > 1e-15 * weights.max()
    ns, weights = ns[keep], weights[keep]
    weights = weights / weights.sum()
    rates = np.exp(-ns * od_per_atom(beta))
    return NumberDistribution(ns, weights, rates)


def averaged_g2(dist: NumberDistribution, params: PhysicalParams,
                grid: TauGrid) -> G2Curve:
    """Distribution-averaged g2: pooled histograms weight runs by rate^2.

    g2_avg = sum_N w_N r_N^2 g2_N / sum_N w_N r_N^2.  The atom number in
    ``params`` is ignored; the distribution supplies N.
    """
    validate_params(params)
    wr = dist.weights * dist.rate_weights**2
    norm = wr.sum()
    values = np.zeros(grid.values.size)
    trans = 0.0
    for i, n in enumerate(dist.support):
        p = PhysicalParams(params.beta, int(n), params.detuning,
                           params.drive_photon_rate)
        values += wr[i] * chain_g2(p, grid).values
        trans += dist.weights[i] * chain_transmission(p)
    return G2Curve(grid, values / norm, transmission=trans)


def averaged_g2_zero(dist: NumberDistribution, beta: float,
                     detuning: float = 0.0) -> float:
    """Equal-time version of averaged_g2, cheap enough for OD sweeps."""
    ch = _chain(beta, detuning)
    ch.extend_to(int(dist.support[-1]))
    wr = dist.weights * dist.rate_weights**2
    g = np.array([ch.g2_zero(int(n)) for n in dist.support])
    return float((wr * g).sum() / wr.sum())


@dataclass(frozen=True)
class SweepRow:
    od: float
    n_mean: float
    g2_0_ideal: float
    g2_0_averaged: float | None


def sweep_g2_vs_od(beta: float, od_grid, bins: OdBinSpec | None = None,
                   preparation_spread: float = 0.1, averaged: bool = True,
                   detuning: float = 0.0, loading_gain: float = LOADING_GAIN,
                   loading_max_od: float = LOADING_MAX_OD) -> list[SweepRow]:
    """Ideal and distribution-averaged g2(0) along an OD grid.

    The ideal column evaluates the chain at round(N(od)); the averaged
    column pools the number distribution of the OD bin containing od.
    Rows whose bin no run can reach carry None in the averaged column.
    """
    od_grid = np.asarray(od_grid, dtype=float)
    if od_grid.ndim != 1 or od_grid.size == 0:
        raise ParameterError("bad-od-grid", "od grid must be a nonempty 1d array")
    if np.any(np.diff(od_grid) <= 0):
        raise ParameterError("bad-od-grid", "od grid must be strictly increasing")
    if od_grid[0] < 0 or od_grid[-1] > 8.0:
        raise ParameterError("bad-od-grid", "od grid must stay within [0, 8]")
    if bins is None:
        bins = OdBinSpec.default()

    ch = _chain(beta, detuning)
    rows = []
    dist_cache: dict[int, NumberDistribution | None] = {}
    for od in od_grid:
        n_ideal = od_to_atoms(float(od), beta)
        n_round = int(round(n_ideal))
        ch.extend_to(n_round)
        g2_ideal = float(ch.g2_zero(n_round)) if n_round else 1.0
        g2_avg = None
        n_mean = n_ideal
        if averaged:
            if od == 0.0:
                g2_avg = 1.0
                n_mean = 0.0
            else:
                idx = bins.bin_index(float(od))
                if idx not in dist_cache:
                    try:
                        dist_cache[idx] = build_number_distribution(
                            bins, idx, beta, preparation_spread,
                            loading_gain, loading_max_od)
                    except DataError:
                        dist_cache[idx] = None
                dist = dist_cache[idx]
                if dist is not None:
                    g2_avg = averaged_g2_zero(dist, beta, detuning)
                    n_mean = dist.mean
        rows.append(SweepRow(float(od), n_mean, g2_ideal, g2_avg))
    return rows
