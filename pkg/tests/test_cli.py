import csv
import json
import math

import numpy as np
import pytest
import yaml

from dynbeats import __version__
from dynbeats.cli import main


def _write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


FIG2 = {"model": "modes", "physics": {"od": 11.6, "n_atoms": 40}, "pulse": {"fwhm_ns": 10, "center_ns": 20}}


def test_simulate_modes_three_peaks(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--config", _write(tmp_path, FIG2), "--out", str(out)]) == 0
    summary = json.loads((out / "run_summary.json").read_text())
    assert summary["version"] == __version__
    assert len(summary["config_hash"]) == 64
    assert summary["features"]["n_peaks"] == 3
    assert summary["features"]["n_valleys"] >= 2
    rows = _rows(out / "run_trace.csv")
    assert list(rows[0]) == ["t_ns", "intensity_norm", "field_re", "field_im"]
    assert len(rows) == 3001


def test_simulate_single_mode_one_valley(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--config", _write(tmp_path, FIG2), "--model", "single-mode", "--out", str(out)]) == 0
    f = json.loads((out / "run_summary.json").read_text())["features"]
    assert f["n_valleys"] == 1
    assert f["tau_zero_trigger_ns"] == pytest.approx(f["tau_zero_ns"] + 1.1)


def test_simulate_continuum_without_atoms_returns_input(tmp_path):
    cfg = {"model": "continuum", "physics": {"od": 0.0}}
    out = tmp_path / "o"
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = _rows(out / "run_trace.csv")
    t = np.array([float(r["t_ns"]) for r in rows])
    inten = np.array([float(r["intensity_norm"]) for r in rows])
    sigma = 10 / (2 * math.sqrt(2 * math.log(2)))
    np.testing.assert_allclose(inten, np.exp(-((t - 20) ** 2) / sigma**2), atol=1e-10)


def test_simulate_background_and_offset_flags(tmp_path):
    out = tmp_path / "o"
    args = ["simulate", "--config", _write(tmp_path, FIG2), "--out", str(out), "--background", "1.5e-3",
            "--offset-ns", "2.0"]
    assert main(args) == 0
    s = json.loads((out / "run_summary.json").read_text())
    assert s["config"]["analysis"]["background"] == 1.5e-3
    f = s["features"]
    assert f["tau_zero_trigger_ns"] == pytest.approx(f["tau_zero_ns"] + 2.0)
    assert min(float(r["intensity_norm"]) for r in _rows(out / "run_trace.csv")) >= 1.5e-3


def test_deterministic_outputs(tmp_path):
    cfg = _write(tmp_path, FIG2)
    for d in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / d), "--seed", "11"]) == 0
    for name in ("run_trace.csv", "run_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_compare_oracle_models(tmp_path):
    cfg = dict(FIG2, physics={"od": 8.0, "n_atoms": 10})
    out = tmp_path / "o"
    assert main(["compare", "--config", _write(tmp_path, cfg), "--model", "modes,hl,spectral", "--out", str(out)]) == 0
    rep = json.loads((out / "run_compare.json").read_text())
    assert len(rep["pairs"]) == 3
    assert all(p["relative_l2"] < 1e-4 and p["within_tolerance"] for p in rep["pairs"])


def test_compare_mirror_identity(tmp_path):
    cfg = {"physics": {"od": 11.6, "n_atoms": 40, "kd": math.pi, "placement": "lattice"}}
    out = tmp_path / "o"
    assert main(["compare", "--config", _write(tmp_path, cfg), "--model", "single-mode,modes", "--out", str(out)]) == 0
    pair = json.loads((out / "run_compare.json").read_text())["pairs"][0]
    assert pair["tolerance"] == 1e-8 and pair["relative_l2"] < 1e-8


def test_compare_needs_two_models(tmp_path):
    assert main(["compare", "--config", _write(tmp_path, FIG2), "--model", "modes", "--out", str(tmp_path)]) == 2


def test_sweep_table(tmp_path):
    cfg = dict(FIG2, model="single-mode", sweep={"od": [0, 3, 10, 30], "fwhm_ns": [10, 13], "n_samples": 4001})
    out = tmp_path / "o"
    assert main(["sweep", "--config", _write(tmp_path, cfg), "--out", str(out), "--jobs", "2"]) == 0
    rows = _rows(out / "run_sweep.csv")
    assert len(rows) == 8
    assert rows[0]["status"] == "no-valley"
    for fwhm in ("10.0", "13.0"):
        taus = [float(r["tau_zero_ns"]) for r in rows if r["fwhm_ns"] == fwhm and r["status"] == "ok"]
        assert all(a > b for a, b in zip(taus, taus[1:]))
    assert float(rows[2]["one_plus_od_half"]) == 6.0


def test_sweep_empty_list_is_config_error(tmp_path):
    cfg = dict(FIG2, sweep={"od": []})
    assert main(["sweep", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 2


def test_spectrum_continuum_beer_lambert(tmp_path):
    cfg = {"model": "continuum", "physics": {"od": 11.6}, "spectrum": {"delta_min_mhz": -20, "delta_max_mhz": 20,
                                                                     "n_points": 401}}
    out = tmp_path / "o"
    assert main(["spectrum", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = _rows(out / "run_spectrum.csv")
    centre = rows[200]
    assert float(centre["delta_mhz"]) == 0.0
    assert float(centre["transmittance"]) == pytest.approx(math.exp(-11.6), rel=1e-12)


def test_spectrum_broadened_asymmetric_with_components(tmp_path):
    cfg = {"model": "broadened", "physics": {"od": 11.6}, "spectrum": {"per_component": True, "n_points": 401}}
    out = tmp_path / "o"
    assert main(["spectrum", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    tr = np.array([float(r["transmittance"]) for r in _rows(out / "run_spectrum.csv")])
    assert np.max(np.abs(tr - tr[::-1])) > 1e-2
    assert (out / "run_components.csv").exists()
    assert "transmittance_0" in _rows(out / "run_spectrum.csv")[0]


def test_spectrum_n_atom_close_to_continuum(tmp_path):
    base = {"physics": {"od": 11.6, "n_atoms": 200, "placement": "lattice"}}
    for model in ("modes", "continuum"):
        cfg = dict(base, model=model)
        assert main(["spectrum", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / model)]) == 0
    a = _rows(tmp_path / "modes" / "run_spectrum.csv")
    b = _rows(tmp_path / "continuum" / "run_spectrum.csv")
    diff = max(abs(complex(float(x["t_re"]), float(x["t_im"])) - complex(float(y["t_re"]), float(y["t_im"])))
               for x, y in zip(a, b))
    assert diff < 0.01


def test_components_csv_input(tmp_path):
    (tmp_path / "comps.csv").write_text("shift_mhz,od_i\n0.0,5.8\n0.0,5.8\n")
    cfg = {"model": "broadened", "physics": {"od": 11.6}, "broadening": {"components_csv": "comps.csv"},
           "spectrum": {"n_points": 201}}
    out = tmp_path / "o"
    assert main(["spectrum", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = _rows(out / "run_spectrum.csv")
    assert float(rows[100]["transmittance"]) == pytest.approx(math.exp(-11.6), rel=1e-12)


def test_drive_csv_input(tmp_path):
    t = np.linspace(-10, 150, 3201)
    np.savetxt(tmp_path / "drive.csv", np.c_[t, np.exp(-((t - 20) ** 2) / (2 * 4.2466**2))], delimiter=",",
               header="t_ns,amplitude", comments="")
    cfg = {"model": "hl", "physics": {"od": 11.6, "n_atoms": 40}, "pulse": {"drive_csv": "drive.csv"}}
    out = tmp_path / "o"
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    f = json.loads((out / "run_summary.json").read_text())["features"]
    assert f["n_valleys"] >= 2


@pytest.mark.parametrize("cfg", [
    {"model": "nope"},
    {"physics": {"gamma_1d_ratio": 0.03}},
    {"physics": {"od": 10, "n_atoms": 40, "gamma_1d_ratio": 0.5}},
    {"physics": {"od": 10, "n_atoms": 2.5}},
    {"pulse": {"fwhm_ns": -1}},
    {"pulse": {"drive_csv": "missing.csv"}},
    {"grid": {"t_start_ns": 10, "t_end_ns": 5}},
    {"grid": {"n_points": 1000}},
    {"bogus_section": {}},
    {"analysis": {"fit_upper": 0.1, "fit_lower": 0.2}},
])
def test_config_errors_exit_2(tmp_path, cfg):
    full = {"physics": {"od": 5.0, "n_atoms": 10}}
    for k, v in cfg.items():
        full[k] = v
    assert main(["simulate", "--config", _write(tmp_path, full), "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file_exit_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.yaml")]) == 2


def test_bad_background_flag_exit_2(tmp_path):
    assert main(["simulate", "--config", _write(tmp_path, FIG2), "--background", "1.5",
                 "--out", str(tmp_path)]) == 2


def test_gaussian_only_model_with_drive_exit_2(tmp_path):
    t = np.linspace(-10, 150, 3201)
    np.savetxt(tmp_path / "drive.csv", np.c_[t, np.exp(-((t - 20) ** 2) / 18)], delimiter=",")
    cfg = {"model": "modes", "physics": {"od": 5.0, "n_atoms": 10}, "pulse": {"drive_csv": "drive.csv"}}
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    # the drive is still on at the start of its own record
    t = np.linspace(15, 60, 901)
    np.savetxt(tmp_path / "drive.csv", np.c_[t, np.exp(-((t - 20) ** 2) / 18)], delimiter=",")
    cfg = {"model": "hl", "physics": {"od": 5.0, "n_atoms": 10}, "pulse": {"drive_csv": "drive.csv"}}
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 3


def test_od_derived_from_ratio(tmp_path):
    cfg = {"model": "continuum", "physics": {"n_atoms": 100, "gamma_1d_ratio": 0.05}}
    out = tmp_path / "o"
    assert main(["spectrum", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    s = json.loads((out / "run_spectrum.json").read_text())
    assert s["config"]["physics"]["od"] == pytest.approx(10.0)
