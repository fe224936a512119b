"""Command-line interface: reproducible simulation, synthesis, and analysis runs.

Subcommands
    simulate   ideal and/or distribution-averaged g2(tau) curves at given ODs
    sweep      g2(0) versus OD table, optional beta fit to measured points
    oracle     brute-force master-equation g2(tau) for small chains
    synth      synthetic coincidence histograms or detector time tags
    analyze    histogram/time-tag data -> normalized g2 and contrast fit JSON
    fit-beta   transmission-saturation data -> beta estimate JSON

Every parameter can come from a JSON config file (--config) or a flag; flags
win.  Each output file gets a sidecar <name>.config.json recording the fully
resolved configuration and the provenance of every value (flag, config or
default), which is sufficient to regenerate the file.  Outputs carry no
timestamps: identical config and seed give byte-identical files.

Exit codes: 0 success, 2 parameter/config error, 3 numerical failure,
4 malformed or insufficient data.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np
from scipy import optimize

from .core import (
    DataError,
    G2Curve,
    NumericalError,
    ParameterError,
    PhysicalParams,
    TauGrid,
    time_unit_ns,
)
from .transport import chain_g2, chain_g2_zero, od_per_atom
from .oracle import OracleConfig, oracle_g2
from .ensemble import (
    OdBinSpec,
    LOADING_GAIN,
    LOADING_MAX_OD,
    build_number_distribution,
    averaged_g2,
    od_to_atoms,
    sweep_g2_vs_od,
)
from . import photonstats as ps

__all__ = ["main"]


# ---------------------------------------------------------------------------
# parameter resolution

class _Param:
    """One configurable value: flag name, type, default, help text."""

    def __init__(self, name, ptype, default, help, repeatable=False):
        self.name = name
        self.ptype = ptype
        self.default = default
        self.help = help
        self.repeatable = repeatable

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def _resolve(params, args, config):
    """Merge flag > config file > default, tracking provenance per value."""
    values, prov = {}, {}
    for p in params:
        flagval = getattr(args, p.name, None)
        if flagval is not None:
            values[p.name], prov[p.name] = flagval, "flag"
        elif config is not None and p.name in config:
            raw = config[p.name]
            if p.repeatable and not isinstance(raw, list):
                raw = [raw]
            try:
                values[p.name] = ([p.ptype(v) for v in raw] if p.repeatable
                                  else p.ptype(raw))
            except (TypeError, ValueError) as exc:
                raise ParameterError("bad-config-value",
                                     f"config field {p.name!r}: {exc}")
            prov[p.name] = "config"
        else:
            values[p.name], prov[p.name] = p.default, "default"
    return values, prov


def _sidecar(path: str, command: str, values: dict, prov: dict, extra: dict | None = None):
    doc = {"command": command,
           "params": {k: {"value": values[k], "source": prov[k]} for k in sorted(values)}}
    if extra:
        doc.update(extra)
    with open(path + ".config.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(path: str | None) -> dict | None:
    if path is None:
        return None
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ParameterError("config-missing", f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ParameterError("config-invalid", f"config file is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ParameterError("config-invalid", "config file must hold a JSON object")
    return cfg


# ---------------------------------------------------------------------------
# file formats

def _fmt(x: float) -> str:
    return repr(float(x))


def write_curve_csv(path: str, curve: G2Curve, gamma_mhz: float):
    """Two-sided curve CSV with both physical and natural delay columns."""
    scale = 1.0 if curve.grid.unit == "ns" else time_unit_ns(gamma_mhz)
    tau, g2 = curve.mirrored()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau_ns", "tau_gamma", "g2"])
        for t, v in zip(tau, g2):
            t_ns = t * scale if curve.grid.unit == "gamma" else t
            t_gm = t if curve.grid.unit == "gamma" else t / time_unit_ns(gamma_mhz)
            w.writerow([_fmt(t_ns), _fmt(t_gm), _fmt(v)])


def write_histogram_csv(path: str, hist: ps.CoincidenceHistogram):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau_ns", "counts"])
        for t, c in zip(hist.tau_ns, hist.counts):
            w.writerow([_fmt(t), int(c)])


def read_histogram_csv(path: str) -> ps.CoincidenceHistogram:
    tau, counts = [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or [h.strip() for h in header[:2]] != ["tau_ns", "counts"]:
            raise DataError("bad-histogram-file", f"{path}: expected header tau_ns,counts")
        for row in r:
            if not row:
                continue
            tau.append(float(row[0]))
            counts.append(int(float(row[1])))
    if len(tau) < 3:
        raise DataError("histogram-too-small", f"{path}: need at least 3 bins")
    width = tau[1] - tau[0]
    return ps.CoincidenceHistogram(np.array(tau), np.array(counts), bin_width_ns=width)


def write_timetags_csv(path: str, stream: ps.TimeTagStream):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["detector_id", "timestamp_ns"])
        for d, t in zip(stream.detector_ids, stream.timestamps_ns):
            w.writerow([int(d), int(t)])


def read_timetags_csv(path: str) -> ps.TimeTagStream:
    ids, ts = [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or [h.strip() for h in header[:2]] != ["detector_id", "timestamp_ns"]:
            raise DataError("bad-timetag-file", f"{path}: expected header detector_id,timestamp_ns")
        for row in r:
            if not row:
                continue
            ids.append(int(row[0]))
            ts.append(int(row[1]))
    return ps.TimeTagStream(np.array(ids, dtype=np.uint8), np.array(ts, dtype=np.int64))


def write_saturation_csv(path: str, data: ps.SaturationData):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s0", "transmission"])
        for s, t in zip(data.s0, data.transmission):
            w.writerow([_fmt(s), _fmt(t)])


def read_saturation_csv(path: str) -> ps.SaturationData:
    s0, tr = [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or [h.strip() for h in header[:2]] != ["s0", "transmission"]:
            raise DataError("bad-saturation-file", f"{path}: expected header s0,transmission")
        for row in r:
            if not row:
                continue
            s0.append(float(row[0]))
            tr.append(float(row[1]))
    return ps.SaturationData(np.array(s0), np.array(tr))


def _write_json(path: str, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# shared parameter groups

_PHYS = [
    _Param("beta", float, 0.0081, "forward coupling fraction"),
    _Param("detuning", float, 0.0, "drive detuning in units of Gamma"),
    _Param("gamma_mhz", float, ps.DEFAULT_GAMMA_MHZ, "natural linewidth Gamma/2pi in MHz"),
]
_SPREAD = [
    _Param("spread", float, 0.10, "relative width of the preparation spread"),
    _Param("budget", float, 1000.0, "photons per run for the OD estimate"),
    _Param("loading_gain", float, LOADING_GAIN, "exponential growth rate of runs per unit OD"),
    _Param("loading_max_od", float, LOADING_MAX_OD, "highest nominal loading OD of the campaign"),
]


def _grid_from(values) -> TauGrid:
    return TauGrid.linear(values["tau_max"], values["n_points"])


def _atoms_for_od(od: float, beta: float) -> int:
    return int(round(od_to_atoms(od, beta)))


def _distribution(values, od):
    bins = OdBinSpec(OdBinSpec.default().edges, photon_budget=values["budget"])
    idx = bins.bin_index(od)
    if idx < 0:
        raise ParameterError("od-outside-scheme", f"OD {od:g} is outside the binning scheme")
    return build_number_distribution(
        bins, idx, values["beta"], preparation_spread=values["spread"],
        loading_gain=values["loading_gain"], loading_max_od=values["loading_max_od"])


# ---------------------------------------------------------------------------
# subcommands

_SIMULATE = _PHYS + _SPREAD + [
    _Param("od", float, None, "optical depth (repeatable)", repeatable=True),
    _Param("n_atoms", int, None, "atom number (repeatable, alternative to --od)", repeatable=True),
    _Param("tau_max", float, 12.0, "largest delay in units of 1/Gamma"),
    _Param("n_points", int, 481, "delay grid points"),
    _Param("kind", str, "ideal", "curve kind: ideal, averaged or both"),
    _Param("output", str, "curve.csv", "output CSV path (stem when several curves)"),
]


def cmd_simulate(values, prov) -> int:
    if values["kind"] not in ("ideal", "averaged", "both"):
        raise ParameterError("bad-kind", f"kind must be ideal, averaged or both, got {values['kind']!r}")
    ods = values["od"]
    natoms = values["n_atoms"]
    if ods is not None and natoms is not None:
        raise ParameterError("od-and-n-atoms", "give either --od or --n-atoms, not both")
    if ods is None and natoms is None:
        raise ParameterError("no-configuration", "need at least one --od or --n-atoms")
    grid = _grid_from(values)
    kinds = ("ideal", "averaged") if values["kind"] == "both" else (values["kind"],)

    targets = []
    if ods is not None:
        targets = [(f"od{od:g}", od, _atoms_for_od(od, values["beta"])) for od in ods]
    else:
        targets = [(f"n{n}", None, int(n)) for n in natoms]

    multi = len(targets) > 1 or len(kinds) > 1
    for label, od, n in targets:
        params = PhysicalParams(beta=values["beta"], n_atoms=n, detuning=values["detuning"])
        for kind in kinds:
            if kind == "averaged":
                if od is None:
                    od = n * od_per_atom(values["beta"])
                dist = _distribution(values, od)
                curve = averaged_g2(dist, params, grid)
            else:
                curve = chain_g2(params, grid)
            if multi:
                stem = values["output"]
                stem = stem[:-4] if stem.endswith(".csv") else stem
                path = f"{stem}_{label}_{kind}.csv"
            else:
                path = values["output"]
            write_curve_csv(path, curve, values["gamma_mhz"])
            _sidecar(path, "simulate", values, prov,
                     {"curve": {"label": label, "kind": kind, "n_atoms": n,
                                "transmission": curve.transmission}})
            print(f"wrote {path}: {kind} curve, N={n}, g2(0)={curve.values[0]:.6g}")
    return 0


_SWEEP = _PHYS + _SPREAD + [
    _Param("od_min", float, 0.0, "first OD of the sweep"),
    _Param("od_max", float, 7.0, "last OD of the sweep"),
    _Param("od_step", float, 0.25, "OD step"),
    _Param("averaged", int, 1, "1 to add the distribution-averaged column, 0 for ideal only"),
    _Param("fit_points", str, None, "CSV of measured (od, g2_0) points to fit beta against"),
    _Param("output", str, "sweep.csv", "output CSV path"),
]


def cmd_sweep(values, prov) -> int:
    if values["od_step"] <= 0:
        raise ParameterError("bad-od-step", "od_step must be > 0")
    grid = np.arange(values["od_min"], values["od_max"] + 1e-9, values["od_step"])
    if grid.size == 0:
        raise ParameterError("empty-od-grid", "the requested OD grid is empty")
    bins = OdBinSpec(OdBinSpec.default().edges, photon_budget=values["budget"])
    rows = sweep_g2_vs_od(values["beta"], grid, bins=bins,
                          preparation_spread=values["spread"],
                          averaged=bool(values["averaged"]),
                          detuning=values["detuning"],
                          loading_gain=values["loading_gain"],
                          loading_max_od=values["loading_max_od"])
    path = values["output"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["od", "n_mean", "g2_0_ideal", "g2_0_averaged"])
        for r in rows:
            w.writerow([_fmt(r.od), _fmt(r.n_mean), _fmt(r.g2_0_ideal),
                        "" if r.g2_0_averaged is None else _fmt(r.g2_0_averaged)])
    extra = {}
    if values["fit_points"] is not None:
        od_pts, g2_pts = _read_points_csv(values["fit_points"])
        beta_hat, beta_err = _fit_beta_points(od_pts, g2_pts, values["detuning"])
        extra["beta_fit"] = {"beta": beta_hat, "beta_err": beta_err,
                             "n_points": int(od_pts.size)}
        _write_json(path + ".betafit.json", extra["beta_fit"])
        print(f"beta fit to {od_pts.size} points: {beta_hat:.5f} +- {beta_err:.5f}")
    _sidecar(path, "sweep", values, prov, extra or None)
    print(f"wrote {path}: {len(rows)} rows")
    return 0


def _read_points_csv(path: str):
    od, g2 = [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or [h.strip() for h in header[:2]] != ["od", "g2_0"]:
            raise DataError("bad-points-file", f"{path}: expected header od,g2_0")
        for row in r:
            if not row:
                continue
            od.append(float(row[0]))
            g2.append(float(row[1]))
    if len(od) < 2:
        raise DataError("too-few-points", f"{path}: need at least 2 points")
    return np.asarray(od), np.asarray(g2)


def _fit_beta_points(od_pts: np.ndarray, g2_pts: np.ndarray, detuning: float):
    """Least squares over beta of the ideal g2(0)-vs-OD curve.

    round(N(od)) makes the model piecewise in beta, so the 1d minimum is
    found by bounded scalar search rather than a gradient method; the error
    comes from the SSR curvature sampled wide enough to span several steps.
    """
    if np.any(od_pts < 0) or np.any(od_pts > 8.0):
        raise DataError("od-out-of-range", "measured ODs must lie in [0, 8]")

    def model(beta):
        out = np.empty(od_pts.size)
        for i, od in enumerate(od_pts):
            n = _atoms_for_od(float(od), beta)
            out[i] = chain_g2_zero(PhysicalParams(beta=beta, n_atoms=n, detuning=detuning))
        return out

    def ssr(beta):
        d = model(beta) - g2_pts
        return float(d @ d)

    res = optimize.minimize_scalar(ssr, bounds=(1e-4, 0.1), method="bounded",
                                   options={"xatol": 1e-7})
    if not res.success:
        raise NumericalError("fit-failed", "beta fit to g2 points did not converge")
    beta_hat = float(res.x)
    dof = max(od_pts.size - 1, 1)
    sigma2 = ssr(beta_hat) / dof
    h = max(0.05 * beta_hat, 2e-4)
    curv = (ssr(beta_hat + h) - 2.0 * ssr(beta_hat) + ssr(max(beta_hat - h, 1e-5))) / h**2
    if curv <= 0 or not math.isfinite(curv):
        raise DataError("uninformative", "g2 points carry no information on beta")
    return beta_hat, math.sqrt(2.0 * sigma2 / curv)


_ORACLE = [
    _Param("beta", float, 0.1, "forward coupling fraction"),
    _Param("detuning", float, 0.0, "drive detuning in units of Gamma"),
    _Param("gamma_mhz", float, ps.DEFAULT_GAMMA_MHZ, "natural linewidth Gamma/2pi in MHz"),
    _Param("n_atoms", int, 1, "atom number (the solver cost grows as 4^N)"),
    _Param("tau_max", float, 10.0, "largest delay in units of 1/Gamma"),
    _Param("n_points", int, 201, "delay grid points"),
    _Param("output", str, "oracle.csv", "output CSV path"),
]


def cmd_oracle(values, prov) -> int:
    params = PhysicalParams(beta=values["beta"], n_atoms=values["n_atoms"],
                            detuning=values["detuning"])
    result = oracle_g2(params, _grid_from(values), OracleConfig())
    curve = result.curve
    path = values["output"]
    write_curve_csv(path, curve, values["gamma_mhz"])
    _sidecar(path, "oracle", values, prov,
             {"curve": {"transmission": curve.transmission,
                        "extrapolation_gap": result.extrapolation_gap}})
    print(f"wrote {path}: oracle curve, N={values['n_atoms']}, g2(0)={curve.values[0]:.6g}")
    return 0


_SYNTH = _PHYS + _SPREAD + [
    _Param("od", float, None, "optical depth of the simulated configuration"),
    _Param("n_atoms", int, None, "atom number (alternative to --od)"),
    _Param("averaged", int, 0, "1 to synthesize from the distribution-averaged curve"),
    _Param("kind", str, "histogram", "output kind: histogram or timetags"),
    _Param("rate1", float, 3.0e4, "singles rate on detector 0, 1/s"),
    _Param("rate2", float, 3.0e4, "singles rate on detector 1, 1/s"),
    _Param("duration", float, 60.0, "acquisition time in s"),
    _Param("seed", int, 0, "random seed"),
    _Param("bin_width_ns", float, ps.DEFAULT_BIN_NS, "histogram bin width in ns"),
    _Param("tau_max_ns", float, ps.DEFAULT_TAU_MAX_NS, "histogram half range in ns"),
    _Param("tau_max", float, 12.0, "model curve extent in units of 1/Gamma"),
    _Param("n_points", int, 481, "model curve grid points"),
    _Param("output", str, "synth.csv", "output CSV path"),
]


def _synth_curve(values) -> G2Curve:
    if (values["od"] is None) == (values["n_atoms"] is None):
        raise ParameterError("no-configuration", "give exactly one of --od or --n-atoms")
    if values["od"] is not None:
        od = values["od"]
        n = _atoms_for_od(od, values["beta"])
    else:
        n = int(values["n_atoms"])
        od = n * od_per_atom(values["beta"])
    params = PhysicalParams(beta=values["beta"], n_atoms=n, detuning=values["detuning"])
    grid = _grid_from(values)
    if values["averaged"]:
        return averaged_g2(_distribution(values, od), params, grid)
    return chain_g2(params, grid)


def cmd_synth(values, prov) -> int:
    curve = _synth_curve(values)
    path = values["output"]
    if values["kind"] == "histogram":
        hist = ps.synth_histogram(curve, values["rate1"], values["rate2"],
                                  values["duration"], values["seed"],
                                  bin_width_ns=values["bin_width_ns"],
                                  tau_max_ns=values["tau_max_ns"],
                                  gamma_mhz=values["gamma_mhz"])
        write_histogram_csv(path, hist)
        print(f"wrote {path}: {hist.n_bins} bins, {hist.total_counts} coincidences")
    elif values["kind"] == "timetags":
        stream = ps.synth_timetags(curve, values["rate1"], values["rate2"],
                                   values["duration"], values["seed"],
                                   gamma_mhz=values["gamma_mhz"])
        write_timetags_csv(path, stream)
        print(f"wrote {path}: {stream.n_tags} tags")
    else:
        raise ParameterError("bad-kind", f"kind must be histogram or timetags, got {values['kind']!r}")
    _sidecar(path, "synth", values, prov, {"true_g2_zero": float(curve.values[0])})
    return 0


_ANALYZE = [
    _Param("input", str, None, "input CSV (histogram or time tags)"),
    _Param("format", str, "auto", "input format: histogram, timetags or auto"),
    _Param("gamma_mhz", float, ps.DEFAULT_GAMMA_MHZ, "natural linewidth Gamma/2pi in MHz"),
    _Param("bin_width_ns", float, ps.DEFAULT_BIN_NS, "histogram bin width for time tags, ns"),
    _Param("tau_max_ns", float, ps.DEFAULT_TAU_MAX_NS, "histogram half range for time tags, ns"),
    _Param("pulse_period_ns", float, None, "pulse period for gated correlation, ns"),
    _Param("window_ns", float, None, "contrast fit window (default: auto 30/15 ns)"),
    _Param("tail_start_ns", float, ps.TAIL_START_NS, "start of the normalization tail, ns"),
    _Param("min_tail_counts", int, 100, "minimum total counts in the tail"),
    _Param("n_bootstrap", int, 50, "bootstrap samples for the contrast error"),
    _Param("seed", int, 0, "bootstrap random seed"),
    _Param("curve_output", str, None, "optional path for the normalized g2 CSV"),
    _Param("output", str, "fit.json", "fit report JSON path"),
]


def _sniff_format(path: str) -> str:
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
    head = [h.strip() for h in header[:2]]
    if head == ["tau_ns", "counts"]:
        return "histogram"
    if head == ["detector_id", "timestamp_ns"]:
        return "timetags"
    raise DataError("unknown-format", f"{path}: unrecognized header {header!r}")


def cmd_analyze(values, prov) -> int:
    if values["input"] is None:
        raise ParameterError("no-input", "analyze needs --input")
    fmt = values["format"]
    if fmt == "auto":
        fmt = _sniff_format(values["input"])
    if fmt == "timetags":
        stream = read_timetags_csv(values["input"])
        kwargs = {}
        if values["pulse_period_ns"] is not None:
            kwargs["pulse_period_ns"] = values["pulse_period_ns"]
        hist = ps.histogram_timetags(stream, bin_width_ns=values["bin_width_ns"],
                                     tau_max_ns=values["tau_max_ns"], **kwargs)
    elif fmt == "histogram":
        hist = read_histogram_csv(values["input"])
    else:
        raise ParameterError("bad-format", f"format must be histogram, timetags or auto, got {fmt!r}")

    curve = ps.normalize_histogram(hist, tail_start_ns=values["tail_start_ns"],
                                   min_tail_counts=values["min_tail_counts"])
    fit = ps.mle_fit_g2(hist, window_ns=values["window_ns"],
                        tail_start_ns=values["tail_start_ns"])
    fit = ps.bootstrap_error(fit, hist, n_samples=values["n_bootstrap"],
                             seed=values["seed"], tail_start_ns=values["tail_start_ns"])
    path = values["output"]
    _write_json(path, fit.to_dict())
    _sidecar(path, "analyze", values, prov)
    if values["curve_output"] is not None:
        write_curve_csv(values["curve_output"], curve, values["gamma_mhz"])
        _sidecar(values["curve_output"], "analyze", values, prov)
    print(f"wrote {path}: g2(0) = {fit.g2_zero:.4f} +- {fit.a_err:.4f} "
          f"(window {fit.window_ns:g} ns)")
    return 0


_FIT_BETA = [
    _Param("input", str, None, "saturation CSV (s0, transmission)"),
    _Param("od0", float, None, "zero-power optical depth from the weak-drive calibration"),
    _Param("output", str, "beta.json", "fit report JSON path"),
]


def cmd_fit_beta(values, prov) -> int:
    if values["input"] is None or values["od0"] is None:
        raise ParameterError("no-input", "fit-beta needs --input and --od0")
    data = read_saturation_csv(values["input"])
    fit = ps.fit_beta_saturation(data, values["od0"])
    path = values["output"]
    _write_json(path, fit.to_dict())
    _sidecar(path, "fit-beta", values, prov)
    print(f"wrote {path}: beta = {fit.beta:.5f} +- {fit.beta_err:.5f}")
    return 0


# ---------------------------------------------------------------------------
# entry point

_COMMANDS = {
    "simulate": (_SIMULATE, cmd_simulate, "ideal/averaged g2(tau) curves"),
    "sweep": (_SWEEP, cmd_sweep, "g2(0) versus OD table"),
    "oracle": (_ORACLE, cmd_oracle, "brute-force master-equation g2(tau)"),
    "synth": (_SYNTH, cmd_synth, "synthetic histograms or time tags"),
    "analyze": (_ANALYZE, cmd_analyze, "normalize and fit measured correlations"),
    "fit-beta": (_FIT_BETA, cmd_fit_beta, "beta from transmission saturation"),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chiralchain",
        description="photon correlations of a chirally coupled emitter chain")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (params, _, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None,
                       help="JSON file with defaults for any flag")
        for prm in params:
            kwargs = {"type": prm.ptype, "default": None, "help": prm.help}
            if prm.repeatable:
                kwargs["action"] = "append"
            p.add_argument(prm.flag, **kwargs)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    params, runner, _ = _COMMANDS[args.command]
    try:
        config = _load_config(args.config)
        values, prov = _resolve(params, args, config)
        return runner(values, prov)
    except ParameterError as exc:
        print(f"parameter error [{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error [{exc.code}]: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error [{exc.code}]: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"data error [io]: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"data error [malformed-value]: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
