"""Command-line interface: outputs, config resolution, exit codes, reproducibility."""

import csv
import json

import numpy as np
import pytest

from chiralchain.cli import main


def run(tmp_path, *args):
    return main([str(a) for a in args])


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_simulate_single_curve(tmp_path):
    out = tmp_path / "curve.csv"
    assert run(tmp_path, "simulate", "--beta", 0.0081, "--od", 3.15,
               "--output", out) == 0
    header, rows = _read_csv(out)
    assert header == ["tau_ns", "tau_gamma", "g2"]
    assert len(rows) % 2 == 1  # two-sided, odd bin count around tau = 0
    tau_gamma = np.array([float(r[1]) for r in rows])
    g2 = np.array([float(r[2]) for r in rows])
    mid = np.argmin(np.abs(tau_gamma))
    assert tau_gamma[mid] == 0.0
    assert g2[mid] == pytest.approx(0.843, abs=0.002)
    np.testing.assert_allclose(g2, g2[::-1])  # even in tau
    # tau_ns column is the natural column scaled by 1/Gamma in ns
    tau_ns = np.array([float(r[0]) for r in rows])
    np.testing.assert_allclose(tau_ns, tau_gamma * 1e3 / (2 * np.pi * 5.2), rtol=1e-12)
    sidecar = json.loads((tmp_path / "curve.csv.config.json").read_text())
    assert sidecar["command"] == "simulate"
    assert sidecar["params"]["beta"] == {"value": 0.0081, "source": "flag"}


def test_simulate_four_panel_preset(tmp_path):
    stem = tmp_path / "panel.csv"
    assert run(tmp_path, "simulate", "--od", 3.15, "--od", 5.13, "--od", 5.88,
               "--od", 6.75, "--kind", "both", "--tau-max", 8, "--n-points", 81,
               "--output", stem) == 0
    files = sorted(p.name for p in tmp_path.glob("panel_*.csv"))
    assert len(files) == 8
    assert "panel_od6.75_averaged.csv" in files
    _, rows = _read_csv(tmp_path / "panel_od6.75_averaged.csv")
    center = [float(r[2]) for r in rows if float(r[1]) == 0.0]
    assert 17.0 < center[0] < 27.0


def test_simulate_flat_for_empty_chain(tmp_path):
    out = tmp_path / "flat.csv"
    assert run(tmp_path, "simulate", "--n-atoms", 0, "--output", out) == 0
    _, rows = _read_csv(out)
    assert all(float(r[2]) == 1.0 for r in rows)


def test_simulate_parameter_errors(tmp_path):
    assert run(tmp_path, "simulate", "--beta", 0.7, "--od", 3.0) == 2
    assert run(tmp_path, "simulate") == 2
    assert run(tmp_path, "simulate", "--od", 1.0, "--n-atoms", 5) == 2
    assert run(tmp_path, "simulate", "--od", 1.0, "--kind", "weird") == 2


def test_config_file_resolution(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"beta": 0.01, "od": 2.0, "n_points": 41, "tau_max": 4.0}))
    out = tmp_path / "c.csv"
    assert run(tmp_path, "simulate", "--config", cfg, "--od", 1.0,
               "--output", out) == 0
    side = json.loads((tmp_path / "c.csv.config.json").read_text())
    p = side["params"]
    assert p["od"] == {"value": [1.0], "source": "flag"}  # flag beats config
    assert p["beta"] == {"value": 0.01, "source": "config"}
    assert p["detuning"]["source"] == "default"
    assert run(tmp_path, "simulate", "--config", tmp_path / "missing.json") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("not json")
    assert run(tmp_path, "simulate", "--config", bad, "--od", 1.0) == 2


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["synth", "--od", 3.0, "--duration", 5.0, "--seed", 7]
    assert run(tmp_path, *args, "--output", a) == 0
    assert run(tmp_path, *args, "--output", b) == 0
    assert a.read_bytes() == b.read_bytes()
    side_a = json.loads((tmp_path / "a.csv.config.json").read_text())
    side_b = json.loads((tmp_path / "b.csv.config.json").read_text())
    side_a["params"].pop("output"), side_b["params"].pop("output")
    assert side_a == side_b


def test_sweep_table_and_beta_fit(tmp_path):
    out = tmp_path / "sweep.csv"
    assert run(tmp_path, "sweep", "--od-min", 0, "--od-max", 3, "--od-step", 0.5,
               "--output", out) == 0
    header, rows = _read_csv(out)
    assert header == ["od", "n_mean", "g2_0_ideal", "g2_0_averaged"]
    assert len(rows) == 7
    assert float(rows[0][2]) == 1.0

    # measured points digitized from the ideal curve at beta = 0.0081
    from chiralchain import PhysicalParams, chain_g2_zero, od_to_atoms
    pts = tmp_path / "points.csv"
    with open(pts, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["od", "g2_0"])
        for od in np.arange(0.5, 5.01, 0.5):
            n = int(round(od_to_atoms(float(od), 0.0081)))
            w.writerow([od, chain_g2_zero(PhysicalParams(0.0081, n))])
    out2 = tmp_path / "sweepfit.csv"
    assert run(tmp_path, "sweep", "--od-min", 1, "--od-max", 2, "--od-step", 0.5,
               "--fit-points", pts, "--output", out2) == 0
    fit = json.loads((tmp_path / "sweepfit.csv.betafit.json").read_text())
    assert fit["beta"] == pytest.approx(0.0081, abs=0.001)
    assert fit["n_points"] == 10


def test_sweep_rejects_bad_grid(tmp_path):
    assert run(tmp_path, "sweep", "--od-step", -1) == 2
    assert run(tmp_path, "sweep", "--od-min", 5, "--od-max", 1) == 2
    assert run(tmp_path, "sweep", "--od-max", 12) == 2


def test_oracle_command_single_emitter_limit(tmp_path):
    out = tmp_path / "orc.csv"
    assert run(tmp_path, "oracle", "--beta", 1.0, "--n-atoms", 1,
               "--tau-max", 4, "--n-points", 41, "--output", out) == 0
    _, rows = _read_csv(out)
    center = [float(r[2]) for r in rows if float(r[1]) == 0.0]
    assert center[0] == pytest.approx(9.0, abs=1e-3)


def test_synth_analyze_round_trip(tmp_path):
    hist = tmp_path / "h.csv"
    assert run(tmp_path, "synth", "--od", 4.0, "--rate1", 4e4, "--rate2", 4e4,
               "--duration", 120, "--seed", 3, "--output", hist) == 0
    header, rows = _read_csv(hist)
    assert header == ["tau_ns", "counts"]
    rep = tmp_path / "fit.json"
    curve = tmp_path / "norm.csv"
    assert run(tmp_path, "analyze", "--input", hist, "--output", rep,
               "--curve-output", curve) == 0
    fit = json.loads(rep.read_text())
    assert set(fit) == {"A", "a_err", "gamma_fit_per_ns", "g2_zero",
                        "window_ns", "n_bootstrap", "seed"}
    side = json.loads((tmp_path / "fit.json.config.json").read_text())
    assert side["command"] == "analyze"
    from chiralchain import PhysicalParams, chain_g2_zero, od_to_atoms
    true = chain_g2_zero(PhysicalParams(0.0081, int(round(od_to_atoms(4.0, 0.0081)))))
    assert fit["g2_zero"] == pytest.approx(true, abs=4 * fit["a_err"])
    header, _ = _read_csv(curve)
    assert header == ["tau_ns", "tau_gamma", "g2"]


def test_analyze_timetag_input(tmp_path):
    tags = tmp_path / "tags.csv"
    assert run(tmp_path, "synth", "--od", 3.0, "--kind", "timetags",
               "--duration", 20, "--seed", 4, "--output", tags) == 0
    header, _ = _read_csv(tags)
    assert header == ["detector_id", "timestamp_ns"]
    rep = tmp_path / "fit.json"
    assert run(tmp_path, "analyze", "--input", tags, "--output", rep) == 0
    fit = json.loads(rep.read_text())
    assert 0.0 < fit["g2_zero"] < 1.0


def test_analyze_data_errors(tmp_path):
    assert run(tmp_path, "analyze", "--input", tmp_path / "missing.csv") == 4
    garbled = tmp_path / "garbled.csv"
    garbled.write_text("detector_id,timestamp_ns\n0,abc\n")
    assert run(tmp_path, "analyze", "--input", garbled) == 4
    unknown = tmp_path / "unknown.csv"
    unknown.write_text("x,y\n1,2\n")
    assert run(tmp_path, "analyze", "--input", unknown) == 4
    assert run(tmp_path, "analyze") == 2
    short = tmp_path / "short.csv"
    with open(short, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau_ns", "counts"])
        for t in np.arange(-50, 51, 2.0):
            w.writerow([t, 100])
    assert run(tmp_path, "analyze", "--input", short) == 4  # no tail past 200 ns


def test_fit_beta_command(tmp_path):
    from chiralchain import synth_saturation_data
    from chiralchain.cli import write_saturation_csv
    sat = tmp_path / "sat.csv"
    data = synth_saturation_data(0.0083, 4.0, np.geomspace(10.0, 1000.0, 12),
                                 rel_noise=0.02, seed=42)
    write_saturation_csv(str(sat), data)
    rep = tmp_path / "beta.json"
    assert run(tmp_path, "fit-beta", "--input", sat, "--od0", 4.0,
               "--output", rep) == 0
    fit = json.loads(rep.read_text())
    assert fit["beta"] == pytest.approx(0.0083, abs=3e-4)
    assert run(tmp_path, "fit-beta", "--input", sat) == 2  # od0 missing
    few = tmp_path / "few.csv"
    few.write_text("s0,transmission\n1,0.5\n2,0.4\n3,0.3\n")
    assert run(tmp_path, "fit-beta", "--input", few, "--od0", 4.0) == 4
