"""Synthetic photon-counting data and the correlation analysis chain.

Measurement side of the toolkit: coincidence histograms between the two
detectors of a beamsplitter correlator, normalization of a histogram to
g2(tau), a maximum-likelihood estimate of the equal-time value g2(0) with
bootstrap error bars, pooling of runs into OD bins, and the
transmission-saturation fit that gives an independent estimate of the
coupling beta.

Conventions:

* detector timestamps are int64 nanoseconds; histograms use 2 ns bins with
  centers placed symmetrically about tau = 0 (tau = t1 - t0),
* histogram counts are raw coincidences; normalization divides by the mean
  level at |tau| > 200 ns where correlations have decayed,
* fitted decay rates are in 1/ns; model curves tabulated in units of
  1/Gamma are converted with the natural linewidth Gamma/2pi (default
  5.2 MHz, i.e. 1/Gamma = 30.6 ns).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math
import warnings

import numpy as np
from scipy import optimize

from .core import (
    DataError,
    G2Curve,
    NumericalError,
    ParameterError,
    TauGrid,
    time_unit_ns,
)
from .ensemble import OdBinSpec

__all__ = [
    "DEFAULT_GAMMA_MHZ",
    "DEFAULT_BIN_NS",
    "DEFAULT_TAU_MAX_NS",
    "TAIL_START_NS",
    "CoincidenceHistogram",
    "TimeTagStream",
    "FitResult",
    "SaturationData",
    "SaturationFit",
    "RunRecord",
    "curve_values_ns",
    "synth_histogram",
    "synth_timetags",
    "histogram_timetags",
    "normalize_histogram",
    "mle_fit_g2",
    "bootstrap_error",
    "bin_runs_by_od",
    "saturation_transmission",
    "fit_beta_saturation",
    "synth_saturation_data",
]

DEFAULT_GAMMA_MHZ = 5.2
DEFAULT_BIN_NS = 2.0
DEFAULT_TAU_MAX_NS = 320.0
TAIL_START_NS = 200.0


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Raw coincidence counts versus detector time difference.

    tau_ns          bin centers in ns, uniformly spaced, symmetric about 0
    counts          coincidences per bin (nonnegative integers)
    bin_width_ns    bin width in ns
    rate1, rate2    singles rates on the two detectors in 1/s (optional)
    acquisition_s   effective acquisition time in s (optional)
    transmission    resonant power transmission of the run (optional)
    """

    tau_ns: np.ndarray
    counts: np.ndarray
    bin_width_ns: float = DEFAULT_BIN_NS
    rate1: float | None = None
    rate2: float | None = None
    acquisition_s: float | None = None
    transmission: float | None = None

    def __post_init__(self):
        tau = np.asarray(self.tau_ns, dtype=float)
        cts = np.asarray(self.counts)
        object.__setattr__(self, "tau_ns", tau)
        if tau.ndim != 1 or tau.size < 3:
            raise DataError("histogram-too-small", "need at least 3 bins")
        if cts.shape != tau.shape:
            raise DataError("histogram-shape-mismatch", "counts and tau_ns must have equal length")
        if not np.all(np.isfinite(cts)) or np.any(cts < 0):
            raise DataError("counts-negative", "counts must be finite and >= 0")
        if np.any(np.asarray(cts, dtype=float) != np.floor(np.asarray(cts, dtype=float))):
            raise DataError("counts-not-integer", "counts must be integers")
        object.__setattr__(self, "counts", np.asarray(cts, dtype=np.int64))
        w = self.bin_width_ns
        if not (math.isfinite(w) and w > 0):
            raise DataError("bad-bin-width", f"bin_width_ns must be > 0, got {w!r}")
        d = np.diff(tau)
        if not np.allclose(d, w, rtol=1e-9, atol=1e-9):
            raise DataError("bins-not-uniform", "bin centers must be uniformly spaced by bin_width_ns")
        if not np.allclose(tau, -tau[::-1], atol=1e-9):
            raise DataError("bins-not-symmetric", "bin centers must be symmetric about tau = 0")

    @property
    def n_bins(self) -> int:
        return int(self.tau_ns.size)

    @property
    def total_counts(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def pooled(cls, histograms) -> "CoincidenceHistogram":
        """Sum coincidences of runs taken on the same binning.

        Acquisition times add; rates and transmission are averaged with
        acquisition-time weights when available, plain means otherwise.
        """
        hists = list(histograms)
        if not hists:
            raise DataError("no-histograms", "cannot pool an empty list")
        first = hists[0]
        for h in hists[1:]:
            if h.n_bins != first.n_bins or not np.allclose(h.tau_ns, first.tau_ns):
                raise DataError("bins-incompatible", "pooled histograms must share bin centers")
        counts = np.sum([h.counts for h in hists], axis=0)
        acqs = [h.acquisition_s for h in hists]
        acq = sum(acqs) if all(a is not None for a in acqs) else None
        wgt = np.array([a if a is not None else 1.0 for a in acqs], dtype=float)
        wgt /= wgt.sum()

        def avg(vals):
            if any(v is None for v in vals):
                return None
            return float(np.dot(wgt, np.asarray(vals, dtype=float)))

        return cls(first.tau_ns, counts, first.bin_width_ns,
                   rate1=avg([h.rate1 for h in hists]),
                   rate2=avg([h.rate2 for h in hists]),
                   acquisition_s=acq,
                   transmission=avg([h.transmission for h in hists]))


@dataclass(frozen=True)
class TimeTagStream:
    """Merged photon arrival records of the two correlator detectors.

    detector_ids   0 or 1 per tag
    timestamps_ns  arrival times in integer ns, non-decreasing
    """

    detector_ids: np.ndarray
    timestamps_ns: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.detector_ids)
        ts = np.asarray(self.timestamps_ns)
        if ids.shape != ts.shape or ids.ndim != 1:
            raise DataError("stream-shape-mismatch", "detector_ids and timestamps_ns must be 1d and equal length")
        if ids.size and not np.all((ids == 0) | (ids == 1)):
            raise DataError("bad-detector-id", "detector ids must be 0 or 1")
        if not np.issubdtype(ts.dtype, np.integer):
            tsf = np.asarray(ts, dtype=float)
            if np.any(tsf != np.floor(tsf)):
                raise DataError("timestamps-not-integer", "timestamps must be integer ns")
        ts = np.asarray(ts, dtype=np.int64)
        if ts.size > 1 and np.any(np.diff(ts) < 0):
            raise DataError("timestamps-not-sorted", "timestamps must be non-decreasing")
        object.__setattr__(self, "detector_ids", np.asarray(ids, dtype=np.uint8))
        object.__setattr__(self, "timestamps_ns", ts)

    @property
    def n_tags(self) -> int:
        return int(self.timestamps_ns.size)

    def channel(self, detector: int) -> np.ndarray:
        """Timestamps of one detector, ns."""
        if detector not in (0, 1):
            raise ParameterError("bad-detector-id", f"detector must be 0 or 1, got {detector}")
        return self.timestamps_ns[self.detector_ids == detector]

    @classmethod
    def from_channels(cls, t0, t1) -> "TimeTagStream":
        t0 = np.asarray(t0, dtype=np.int64)
        t1 = np.asarray(t1, dtype=np.int64)
        ids = np.concatenate([np.zeros(t0.size, dtype=np.uint8), np.ones(t1.size, dtype=np.uint8)])
        ts = np.concatenate([t0, t1])
        order = np.argsort(ts, kind="stable")
        return cls(ids[order], ts[order])


@dataclass(frozen=True)
class FitResult:
    """Exponential-contrast fit g2(tau) = 1 - A exp(-gamma_fit |tau|).

    g2_zero = 1 - A is reported unclamped; values outside [0, 9] flag a
    problem with the data rather than being silently truncated.
    a_err is the bootstrap standard error of A (None before bootstrapping).
    """

    amplitude: float
    gamma_fit: float
    g2_zero: float
    window_ns: float
    a_err: float | None = None
    n_bootstrap: int = 0
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "A": self.amplitude,
            "a_err": self.a_err,
            "gamma_fit_per_ns": self.gamma_fit,
            "g2_zero": self.g2_zero,
            "window_ns": self.window_ns,
            "n_bootstrap": self.n_bootstrap,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(amplitude=float(d["A"]),
                   gamma_fit=float(d["gamma_fit_per_ns"]),
                   g2_zero=float(d["g2_zero"]),
                   window_ns=float(d["window_ns"]),
                   a_err=None if d.get("a_err") is None else float(d["a_err"]),
                   n_bootstrap=int(d.get("n_bootstrap", 0)),
                   seed=d.get("seed"))


@dataclass(frozen=True)
class SaturationData:
    """Transmission versus drive power for the saturation fit.

    s0            input power in units where the on-resonance saturation
                  parameter of a single emitter equals beta * s0
                  (strictly increasing, > 0)
    transmission  measured power transmission at each drive power, in (0, 1]
    """

    s0: np.ndarray
    transmission: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s0, dtype=float)
        t = np.asarray(self.transmission, dtype=float)
        object.__setattr__(self, "s0", s)
        object.__setattr__(self, "transmission", t)
        if s.ndim != 1 or s.shape != t.shape:
            raise DataError("saturation-shape-mismatch", "s0 and transmission must be 1d and equal length")
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise DataError("power-not-positive", "drive powers must be finite and > 0")
        if np.any(np.diff(s) <= 0):
            raise DataError("powers-not-increasing", "drive powers must be strictly increasing")
        if not np.all(np.isfinite(t)) or np.any(t <= 0) or np.any(t > 1.0 + 1e-12):
            raise DataError("transmission-out-of-range", "transmission must be in (0, 1]")

    @property
    def n_points(self) -> int:
        return int(self.s0.size)


@dataclass(frozen=True)
class SaturationFit:
    """Result of the transmission-saturation fit."""

    beta: float
    beta_err: float
    od0: float
    residual_rms: float

    def to_dict(self) -> dict:
        return {"beta": self.beta, "beta_err": self.beta_err,
                "od0": self.od0, "residual_rms": self.residual_rms}


@dataclass(frozen=True)
class RunRecord:
    """One experimental run: its transmission and its coincidence histogram."""

    transmission: float
    histogram: CoincidenceHistogram


def curve_values_ns(curve: G2Curve, tau_ns: np.ndarray, gamma_mhz: float = DEFAULT_GAMMA_MHZ) -> np.ndarray:
    """g2 of a model curve evaluated at |tau| in ns (1 beyond the grid)."""
    scale = 1.0 if curve.grid.unit == "ns" else time_unit_ns(gamma_mhz)
    at = np.abs(np.asarray(tau_ns, dtype=float)) / scale
    return np.interp(at, curve.grid.values, curve.values, right=1.0)


def _symmetric_centers(bin_width_ns: float, tau_max_ns: float) -> np.ndarray:
    if not (math.isfinite(bin_width_ns) and bin_width_ns > 0):
        raise ParameterError("bad-bin-width", f"bin_width_ns must be > 0, got {bin_width_ns!r}")
    if tau_max_ns < bin_width_ns:
        raise ParameterError("bad-tau-max", "tau_max_ns must cover at least one bin")
    k = int(round(tau_max_ns / bin_width_ns))
    return np.arange(-k, k + 1, dtype=float) * bin_width_ns


def synth_histogram(curve: G2Curve, rate1: float, rate2: float, acquisition_s: float,
                    seed: int, *, bin_width_ns: float = DEFAULT_BIN_NS,
                    tau_max_ns: float = DEFAULT_TAU_MAX_NS,
                    gamma_mhz: float = DEFAULT_GAMMA_MHZ) -> CoincidenceHistogram:
    """Poisson coincidence counts for a model g2 at given singles rates.

    Bin means are rate1 * rate2 * bin_width * acquisition * g2(tau_i), the
    uncorrelated-pair level modulated by the correlation function.
    """
    if rate1 <= 0 or rate2 <= 0 or acquisition_s <= 0:
        raise ParameterError("rates-not-positive", "rates and acquisition time must be > 0")
    centers = _symmetric_centers(bin_width_ns, tau_max_ns)
    g2 = curve_values_ns(curve, centers, gamma_mhz)
    mean = rate1 * rate2 * (bin_width_ns * 1e-9) * acquisition_s * g2
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean)
    return CoincidenceHistogram(centers, counts, bin_width_ns,
                                rate1=rate1, rate2=rate2, acquisition_s=acquisition_s,
                                transmission=curve.transmission)


def synth_timetags(curve: G2Curve, rate1: float, rate2: float, duration_s: float,
                   seed: int, *, gamma_mhz: float = DEFAULT_GAMMA_MHZ) -> TimeTagStream:
    """Time-tag stream whose cross-correlation follows a model g2.

    Detector 0 is drawn as a homogeneous Poisson process at rate1; detector 1
    is an inhomogeneous Poisson process with intensity
    rate2 * (1 + sum_j (g2(t - t_j) - 1)) over the detector-0 tags t_j,
    sampled by thinning.  Only the cross-correlation between the detectors is
    faithful; autocorrelations of the individual channels are Poissonian.
    """
    if rate1 <= 0 or rate2 <= 0 or duration_s <= 0:
        raise ParameterError("rates-not-positive", "rates and duration must be > 0")
    scale = 1.0 if curve.grid.unit == "ns" else time_unit_ns(gamma_mhz)
    support_ns = float(curve.grid.values[-1]) * scale
    tau_grid_ns = curve.grid.values * scale
    g2max = float(max(curve.values.max(), 1.0))
    # cap covers two simultaneously contributing neighbor tags; more within one
    # correlation window is vanishingly rare at the intended sparse rates
    lam_cap = rate2 * (1.0 + 2.0 * (g2max - 1.0))
    rng = np.random.default_rng(seed)

    n0 = rng.poisson(rate1 * duration_s)
    t0 = np.sort(rng.uniform(0.0, duration_s, n0)) * 1e9

    ncand = rng.poisson(lam_cap * duration_s)
    tc = np.sort(rng.uniform(0.0, duration_s, ncand)) * 1e9

    kept = []
    chunk = 4_000_000
    for a in range(0, tc.size, chunk):
        blk = tc[a:a + chunk]
        excess = np.zeros(blk.size)
        if t0.size:
            pos = np.searchsorted(t0, blk)
            for off in (-3, -2, -1, 0, 1, 2):
                idx = np.clip(pos + off, 0, t0.size - 1)
                dt = np.abs(blk - t0[idx])
                near = (dt <= support_ns) & (pos + off >= 0) & (pos + off < t0.size)
                if np.any(near):
                    excess[near] += np.interp(dt[near], tau_grid_ns, curve.values, right=1.0) - 1.0
        lam = rate2 * np.maximum(1.0 + excess, 0.0)
        accept = rng.uniform(size=blk.size) < lam / lam_cap
        kept.append(blk[accept])
    t1 = np.concatenate(kept) if kept else np.empty(0)

    return TimeTagStream.from_channels(np.round(t0).astype(np.int64),
                                       np.round(t1).astype(np.int64))


def histogram_timetags(stream: TimeTagStream, *, bin_width_ns: float = DEFAULT_BIN_NS,
                       tau_max_ns: float = DEFAULT_TAU_MAX_NS,
                       pulse_period_ns: float | None = None,
                       gate_ns: tuple[float, float] = (1000.0, 9000.0),
                       discard_pulses: int = 20) -> CoincidenceHistogram:
    """Cross-correlation histogram of a time-tag stream.

    Every inter-detector pair with |t1 - t0| inside the histogram range is
    counted once, at tau = t1 - t0.  With pulse_period_ns set, tags are first
    gated to the window gate_ns within each pulse and the first
    discard_pulses pulses are dropped, mirroring pulsed probing where the
    early pulses see an uncooled ensemble.
    """
    t0 = stream.channel(0).astype(np.float64)
    t1 = stream.channel(1).astype(np.float64)
    acq = None
    if pulse_period_ns is not None:
        if not (0.0 <= gate_ns[0] < gate_ns[1] <= pulse_period_ns):
            raise ParameterError("bad-gate", "need 0 <= gate start < gate end <= pulse period")
        start = discard_pulses * pulse_period_ns

        def gate(t):
            phase = np.mod(t, pulse_period_ns)
            return t[(t >= start) & (phase >= gate_ns[0]) & (phase < gate_ns[1])]

        t0, t1 = gate(t0), gate(t1)
        if stream.n_tags:
            pulses = int(stream.timestamps_ns.max() // pulse_period_ns) + 1
            live = max(pulses - discard_pulses, 0)
            acq = live * (gate_ns[1] - gate_ns[0]) * 1e-9
    elif stream.n_tags > 1:
        acq = float(stream.timestamps_ns.max() - stream.timestamps_ns.min()) * 1e-9

    centers = _symmetric_centers(bin_width_ns, tau_max_ns)
    edges = np.concatenate([centers - bin_width_ns / 2.0, [centers[-1] + bin_width_ns / 2.0]])
    counts = np.zeros(centers.size, dtype=np.int64)
    if t0.size and t1.size:
        reach = centers[-1] + bin_width_ns / 2.0
        lo = np.searchsorted(t1, t0 - reach, side="left")
        hi = np.searchsorted(t1, t0 + reach, side="right")
        n = hi - lo
        total = int(n.sum())
        if total:
            ids = np.repeat(np.arange(t0.size), n)
            offs = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
            diffs = t1[lo[ids] + offs] - t0[ids]
            counts, _ = np.histogram(diffs, edges)
            counts = counts.astype(np.int64)

    r1 = t0.size / acq if acq else None
    r2 = t1.size / acq if acq else None
    return CoincidenceHistogram(centers, counts, bin_width_ns,
                                rate1=r1, rate2=r2, acquisition_s=acq)


def _fold(hist: CoincidenceHistogram):
    """Fold a symmetric histogram onto tau >= 0.

    Returns (centers >= 0, folded counts, multiplicity per folded bin).
    """
    tau = hist.tau_ns
    pos = tau > 1e-9
    zero = np.abs(tau) <= 1e-9
    centers = tau[pos]
    folded = hist.counts[pos].astype(np.int64).copy()
    neg_centers = -tau[tau < -1e-9][::-1]
    neg_counts = hist.counts[tau < -1e-9][::-1]
    # centers are symmetric by construction, so the reversed negative side
    # lines up with the positive side bin by bin
    if neg_centers.size == centers.size and np.allclose(neg_centers, centers):
        folded += neg_counts
        mult = np.full(centers.size, 2.0)
    else:
        raise DataError("bins-not-symmetric", "cannot fold an asymmetric histogram")
    if np.any(zero):
        centers = np.concatenate([[0.0], centers])
        folded = np.concatenate([[int(hist.counts[zero][0])], folded])
        mult = np.concatenate([[1.0], mult])
    return centers, folded, mult


def normalize_histogram(hist: CoincidenceHistogram, *, tail_start_ns: float = TAIL_START_NS,
                        min_tail_counts: int = 100) -> G2Curve:
    """Normalize coincidences to g2 by the uncorrelated level at long delay.

    Positive and negative delays are folded together first.  The reference
    level is the mean counts per raw bin over |tau| > tail_start_ns; a tail
    holding fewer than min_tail_counts coincidences in total is refused
    because the normalization error would dominate everything downstream.
    """
    centers, folded, mult = _fold(hist)
    tail = centers > tail_start_ns
    if not np.any(tail):
        raise DataError("no-tail", f"histogram must extend beyond {tail_start_ns:g} ns for normalization")
    tail_total = int(folded[tail].sum())
    if tail_total < min_tail_counts:
        raise DataError("tail-underpopulated",
                        f"only {tail_total} counts at |tau| > {tail_start_ns:g} ns, "
                        f"need >= {min_tail_counts}")
    level = tail_total / float(mult[tail].sum())
    values = folded / (mult * level)
    grid = TauGrid(centers, symmetric=True, unit="ns")
    return G2Curve(grid, values, transmission=hist.transmission)


def _likelihood_mask(hist: CoincidenceHistogram, window_ns: float,
                     tail_start_ns: float) -> np.ndarray:
    """Bins entering the contrast likelihood.

    The contrast window around tau = 0 carries the dip or peak; the
    normalization tail anchors the uncorrelated level.  Intermediate delays
    are excluded: that is where the quantum-beat structure lives, which the
    single-exponential contrast model cannot represent.  Without the tail
    the multinomial likelihood is scale free and gamma develops a degenerate
    ridge at the window edge, so the anchor is what makes (A, gamma)
    identifiable at finite counts.
    """
    at = np.abs(hist.tau_ns)
    return (at <= window_ns + 1e-9) | (at > tail_start_ns)


def _auto_window(hist: CoincidenceHistogram, tail_start_ns: float = TAIL_START_NS) -> float:
    """30 ns for antibunching dips, 15 ns once bunching dominates.

    The sign of the short-delay excess over the long-delay level decides;
    bunched correlations decay faster than the dip recovers, so they get the
    narrower window.
    """
    near = np.abs(hist.tau_ns) <= 5.0 + 1e-9
    far = np.abs(hist.tau_ns) > tail_start_ns
    if not np.any(near) or not np.any(far):
        raise DataError("window-undetermined", "histogram too short to choose a fit window")
    return 15.0 if hist.counts[near].mean() > hist.counts[far].mean() else 30.0


GAMMA_FIT_BAND = (0.004, 0.4)


def _fit_window_counts(tau_ns: np.ndarray, counts: np.ndarray, warm_start=None):
    """Maximize the multinomial likelihood of 1 - A exp(-gamma |tau|).

    Returns (A, gamma, nll); raises NumericalError on non-convergence.
    The likelihood conditions on the total count over the included bins, so
    no normalization of the histogram is needed.

    gamma is constrained to GAMMA_FIT_BAND, between a decay too slow for the
    contrast window to see and one faster than the 2 ns binning.  Because
    the normalization tail anchors the uncorrelated level, the amplitude
    stays identified even when gamma drifts to a band edge on weakly
    contrasted data, so edge solutions are kept.  A warm_start (A, gamma)
    is trusted when it converges, keeping bootstrap refits cheap.
    """
    at = np.abs(tau_ns)
    c = counts.astype(float)
    ctot = c.sum()
    lg_lo, lg_hi = math.log(GAMMA_FIT_BAND[0]), math.log(GAMMA_FIT_BAND[1])

    def nll(x):
        a, lg = x
        if abs(a) > 1e3 or not lg_lo <= lg <= lg_hi:
            return 1e300
        g = 1.0 - a * np.exp(-math.exp(lg) * at)
        if np.any(g <= 1e-12):
            return 1e300
        return float(ctot * math.log(g.sum()) - c @ np.log(g))

    def solve(x0):
        res = optimize.minimize(nll, x0, method="Nelder-Mead",
                                options={"maxiter": 4000, "xatol": 1e-8, "fatol": 1e-11})
        if not res.success or res.fun >= 1e299:
            return None
        gamma = math.exp(res.x[1])
        # an amplitude at the guard rail means the likelihood never saw the
        # uncorrelated level; the contrast model does not describe such data
        if abs(res.x[0]) > 900.0:
            return None
        return float(res.x[0]), gamma, float(res.fun)

    if warm_start is not None:
        got = solve((warm_start[0], math.log(warm_start[1])))
        if got is not None:
            return got

    # contrast guess from the center bin against the outer quarter of the window
    outer = at >= 0.75 * at.max()
    base = max(c[outer].mean(), 0.5)
    a0 = float(np.clip(1.0 - c[np.argmin(at)] / base, -30.0, 0.99))
    starts = [(a0, 1.0 / 30.6), (a0, 0.1), (a0, 0.008),
              (0.98, 0.008), (0.98, 1.0 / 30.6), (-1.0, 0.1)]
    best = None
    for a_s, g_s in starts:
        got = solve((a_s, math.log(g_s)))
        if got is not None and (best is None or got[2] < best[2]):
            best = got
    if best is None:
        raise NumericalError("fit-failed", "contrast fit did not converge from any start")
    return best


def mle_fit_g2(hist: CoincidenceHistogram, *, window_ns: float | None = None,
               tail_start_ns: float = TAIL_START_NS) -> FitResult:
    """Maximum-likelihood g2(0) from raw coincidence counts.

    Fits g2(tau) = 1 - A exp(-gamma |tau|) by maximizing the multinomial
    likelihood sum(c_i ln g_i) - C ln(sum g_i) over the contrast window plus
    the normalization tail (see _likelihood_mask); conditioning on the total
    count C makes the fit independent of the absolute coincidence rate, so
    the histogram does not need to be normalized first.  The window defaults
    to 30 ns for antibunched data and 15 ns when bunching is detected.
    g2_zero = 1 - A, reported unclamped.
    """
    if window_ns is None:
        window_ns = _auto_window(hist, tail_start_ns)
    if not (math.isfinite(window_ns) and window_ns > 0):
        raise ParameterError("bad-window", f"window_ns must be > 0, got {window_ns!r}")
    mask = _likelihood_mask(hist, window_ns, tail_start_ns)
    if np.count_nonzero(np.abs(hist.tau_ns) <= window_ns + 1e-9) < 5:
        raise DataError("window-too-narrow", "fit window holds fewer than 5 bins")
    tau = hist.tau_ns[mask]
    cts = hist.counts[mask]
    if cts.sum() == 0:
        raise DataError("empty-window", "no coincidences inside the fit region")
    a, gamma, _ = _fit_window_counts(tau, cts)
    return FitResult(amplitude=a, gamma_fit=gamma, g2_zero=1.0 - a, window_ns=float(window_ns))


def bootstrap_error(fit: FitResult, hist: CoincidenceHistogram, *, n_samples: int = 50,
                    seed: int = 0, max_failures: float = 0.2,
                    tail_start_ns: float = TAIL_START_NS) -> FitResult:
    """Bootstrap standard error of the fitted contrast.

    Synthetic datasets are drawn from the fitted model over the same bins the
    fit used, multinomially conditioned on the observed total count, and
    refit; a_err is the sample standard deviation of the refitted amplitudes.
    More than max_failures of failed refits marks the fit unstable.
    """
    if n_samples < 2:
        raise ParameterError("too-few-samples", "need at least 2 bootstrap samples")
    mask = _likelihood_mask(hist, fit.window_ns, tail_start_ns)
    tau = hist.tau_ns[mask]
    cts = hist.counts[mask]
    ctot = int(cts.sum())
    if ctot == 0:
        raise DataError("empty-window", "no coincidences inside the fit window")
    model = 1.0 - fit.amplitude * np.exp(-fit.gamma_fit * np.abs(tau))
    model = np.maximum(model, 1e-12)
    p = model / model.sum()
    rng = np.random.default_rng(seed)
    amps = []
    failures = 0
    for _ in range(n_samples):
        counts = rng.multinomial(ctot, p)
        try:
            a, _, _ = _fit_window_counts(tau, counts,
                                         warm_start=(fit.amplitude, fit.gamma_fit))
        except NumericalError:
            failures += 1
            continue
        amps.append(a)
    if failures > max_failures * n_samples:
        raise NumericalError("unstable-fit",
                             f"{failures}/{n_samples} bootstrap refits failed")
    a_err = float(np.std(amps, ddof=1))
    return replace(fit, a_err=a_err, n_bootstrap=n_samples, seed=seed)


def bin_runs_by_od(runs, bins: OdBinSpec | None = None) -> dict[int, CoincidenceHistogram]:
    """Pool run histograms into OD bins via OD = -ln(transmission).

    Returns a dict from bin index to the pooled histogram.  Runs with
    non-positive transmission cannot be assigned an OD and land in the
    overflow entry (key -1) with a warning, as do runs outside the binning
    scheme.
    """
    if bins is None:
        bins = OdBinSpec.default()
    groups: dict[int, list] = {}
    for run in runs:
        t = run.transmission
        if not (isinstance(t, (int, float)) and math.isfinite(t)) or t <= 0:
            warnings.warn(f"run with non-positive transmission {t!r} sent to overflow bin")
            idx = -1
        else:
            idx = bins.bin_index(-math.log(t))
        groups.setdefault(idx, []).append(run.histogram)
    return {idx: CoincidenceHistogram.pooled(hists) for idx, hists in sorted(groups.items())}


def saturation_transmission(beta: float, od0: float, s0) -> np.ndarray:
    """Transmission of a saturable chain versus drive power.

    Solves ln T + beta * s0 * (T - 1) = -od0 for T at each power; the
    left side is strictly increasing in T so the root in (0, 1) is unique.
    At weak drive this reduces to T = exp(-od0).
    """
    if not (math.isfinite(beta) and 0.0 < beta < 0.5):
        raise ParameterError("beta-out-of-range", f"beta must be in (0, 0.5), got {beta}")
    if not (math.isfinite(od0) and od0 > 0):
        raise ParameterError("od0-not-positive", f"od0 must be > 0, got {od0!r}")
    s = np.atleast_1d(np.asarray(s0, dtype=float))
    out = np.empty(s.size)
    lo = min(1e-12, math.exp(-od0) * 1e-3)
    for i, si in enumerate(s):
        k = beta * si
        out[i] = optimize.brentq(lambda t: math.log(t) + k * (t - 1.0) + od0,
                                 lo, 1.0, xtol=1e-15, rtol=1e-14)
    return out


def fit_beta_saturation(data: SaturationData, od0: float, *,
                        beta_bounds: tuple[float, float] = (1e-5, 0.49)) -> SaturationFit:
    """Least-squares estimate of beta from transmission saturation.

    The zero-power optical depth od0 is taken as known (from a weak-drive
    calibration); beta is the only free parameter, entering through the
    saturation parameter beta * s0 of each drive power.  Data that never
    approach saturation, or that are fully saturated throughout, carry no
    information on beta and are refused.
    """
    if data.n_points < 5:
        raise DataError("too-few-points", f"need >= 5 powers, got {data.n_points}")

    def resid(b):
        return saturation_transmission(float(b[0]), od0, data.s0) - data.transmission

    res = optimize.least_squares(resid, x0=[0.01], bounds=([beta_bounds[0]], [beta_bounds[1]]),
                                 xtol=1e-14, ftol=1e-14)
    if not res.success:
        raise NumericalError("fit-failed", "saturation fit did not converge")
    beta = float(res.x[0])
    s_eff = beta * data.s0
    if s_eff.max() < 0.5 or s_eff.min() > 2.0:
        raise DataError("uninformative",
                        "drive powers must span the onset of saturation (beta * s0 near 1); "
                        f"fitted range is [{s_eff.min():.3g}, {s_eff.max():.3g}]")
    dof = max(data.n_points - 1, 1)
    sigma2 = float(res.fun @ res.fun) / dof
    jtj = float(np.dot(res.jac[:, 0], res.jac[:, 0]))
    if jtj <= 0 or not math.isfinite(jtj):
        raise DataError("uninformative", "saturation model is flat in beta over these powers")
    beta_err = math.sqrt(sigma2 / jtj)
    return SaturationFit(beta=beta, beta_err=beta_err, od0=float(od0),
                         residual_rms=math.sqrt(float(res.fun @ res.fun) / data.n_points))


def synth_saturation_data(beta: float, od0: float, s0, *, rel_noise: float = 0.0,
                          seed: int | None = None) -> SaturationData:
    """Saturation measurement with multiplicative Gaussian transmission noise."""
    s = np.asarray(s0, dtype=float)
    t = saturation_transmission(beta, od0, s)
    if rel_noise < 0:
        raise ParameterError("bad-noise", f"rel_noise must be >= 0, got {rel_noise}")
    if rel_noise > 0:
        rng = np.random.default_rng(seed)
        t = t * (1.0 + rel_noise * rng.standard_normal(t.size))
        t = np.clip(t, 1e-15, 1.0)
    return SaturationData(s, t)
