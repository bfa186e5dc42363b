import json
import math
import os

import numpy as np
import pytest

from blochsim.cli import main
from blochsim.output import bundle_hash, read_populations_csv

SMALL = {
    "name": "tiny",
    "model": {"kind": "single_band", "J": 1.0, "omega": 1.0, "n_sites": 21},
    "initial_state": {"kind": "site_delta", "n": 0},
    "time": {"t0": 0.0, "t1": 2 * math.pi},
    "frames": {"per_period": 20},
    "analysis": {"revival_times": [2 * math.pi], "convergence_check": False},
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out.split()
    assert out == ["fig1a", "fig1b", "fig2a", "fig2b", "fig2c", "fig4a", "fig4b"]


def test_run_bundle_contents(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    bundle = tmp_path / "out" / "tiny"
    for name in ("populations.csv", "observables.csv", "report.json",
                 "metadata.json", "checksums.json"):
        assert (bundle / name).is_file()
    assert (bundle / "figs" / "populations.png").is_file()
    assert (bundle / "figs" / "observables.png").is_file()
    with open(bundle / "populations.csv") as fh:
        assert fh.readline().strip() == "t,n,P"
    with open(bundle / "observables.csv") as fh:
        assert fh.readline().strip() == "t,fidelity,sigma_idx,deltaE,participation"
    times, pops = read_populations_csv(bundle / "populations.csv")
    assert pops.shape[1] == 21
    assert np.abs(pops.sum(axis=1) - 1).max() < 1e-9
    meta = json.loads((bundle / "metadata.json").read_text())
    assert meta["config"]["model"]["J"] == 1.0
    checks = json.loads((bundle / "checksums.json").read_text())
    assert checks["bundle_sha256"] == bundle_hash(bundle)


def test_determinism_rerun_hash_identical(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--no-figures"])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--no-figures"])
    assert bundle_hash(tmp_path / "a" / "tiny") == bundle_hash(tmp_path / "b" / "tiny")


def test_metadata_round_trip(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--no-figures"])
    meta = str(tmp_path / "a" / "tiny" / "metadata.json")
    assert main(["run", "--config", meta, "--out", str(tmp_path / "b"),
                 "--no-figures"]) == 0
    assert bundle_hash(tmp_path / "a" / "tiny") == bundle_hash(tmp_path / "b" / "tiny")


def test_set_override_echoed(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--set", "model.J=0.3",
                 "--out", str(tmp_path / "out"), "--no-figures"]) == 0
    meta = json.loads((tmp_path / "out" / "tiny" / "metadata.json").read_text())
    assert meta["config"]["model"]["J"] == 0.3


def test_unknown_key_rejected(tmp_path, capsys):
    bad = dict(SMALL)
    bad["model"] = dict(SMALL["model"], coupling=2.0)
    cfg = write_cfg(tmp_path, bad)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_preset_exit_2(capsys):
    assert main(["run", "--preset", "nope"]) == 2


def test_numerical_abort_exit_3(tmp_path, capsys):
    bad = {
        "name": "overfull",
        "model": {"kind": "driven_ho", "omega": 1.0, "J": 0.5, "Omega": 1.2,
                  "n_fock": 50},
        "initial_state": {"kind": "coherent", "alpha": math.sqrt(40.0)},
        "time": {"t0": 0.0, "t1": 1.0},
    }
    cfg = write_cfg(tmp_path, bad)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 3
    assert "numerical abort" in capsys.readouterr().err


def test_env_output_root(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, SMALL)
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("BLOCHSIM_OUT", str(tmp_path / "envroot"))
    assert main(["run", "--config", cfg, "--no-figures"]) == 0
    assert (tmp_path / "envroot" / "tiny" / "report.json").is_file()


def test_dump_preset(capsys):
    assert main(["run", "--preset", "fig1a", "--dump-preset"]) == 0
    dumped = json.loads(capsys.readouterr().out)
    assert dumped["model"]["n_sites"] == 401
    assert dumped["time"]["dt"] == pytest.approx(2 * math.pi / 2000)


def test_seed_override(tmp_path):
    cfg = dict(SMALL, name="seeded")
    cfg["model"] = dict(SMALL["model"], disorder={"std_dev": 0.1, "seed": 1})
    path = write_cfg(tmp_path, cfg)
    main(["run", "--config", path, "--seed", "42",
          "--out", str(tmp_path / "out"), "--no-figures"])
    meta = json.loads((tmp_path / "out" / "seeded" / "metadata.json").read_text())
    assert meta["config"]["model"]["disorder"]["seed"] == 42
    assert meta["seeds"] == [42]


def test_spectrum_j_zero_adiabatic_equals_diabatic(tmp_path):
    cfg = dict(SMALL, name="flatJ")
    cfg["model"] = dict(SMALL["model"], J=1e-15)
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "spec.csv"
    assert main(["spectrum", "--config", path, "--t0", "0", "--t1", "1",
                 "--points", "5", "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.abs(data[:, 2] - data[:, 3]).max() < 1e-9


def test_spectrum_lz_flat_band(tmp_path):
    cfg = {
        "name": "flatband",
        "model": {"kind": "lz_grid", "omega": 0.5, "lambda": 1.0,
                  "J": 0.5 / math.pi, "n_levels": 41},
        "initial_state": {"kind": "adiabatic_index", "q": "middle"},
        "time": {"t0": 0.0, "t1": 1.0},
    }
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "spec.csv"
    assert main(["spectrum", "--config", path, "--t0", "0.05", "--t1", "0.95",
                 "--points", "4", "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    # middle adiabatic level is time-independent at the flat-band point
    mid = data[np.abs(data[:, 1] - 41) < 0.5][:, 3]
    # level stays flat up to the finite-size wobble of a 41-level grid
    assert np.ptp(mid) < 2e-2


def test_oracle_bessel(capsys):
    assert main(["oracle", "bessel", "--J", "10", "--omega", "1",
                 "--levels", "5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "k,amplitude"
    from scipy import special
    row0 = [ln for ln in lines[1:] if ln.startswith("0,")][0]
    assert float(row0.split(",")[1]) == pytest.approx(special.jv(0, 20.0))


def test_oracle_ho_coherent(capsys):
    assert main(["oracle", "ho-coherent", "--alpha", "2.0", "--omega", "1",
                 "--Omega", "1.2", "--J", "0", "--t0", "0", "--t1", "1",
                 "--points", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    t, re, im = map(float, lines[-1].split(","))
    assert complex(re, im) == pytest.approx(2.0 * np.exp(-1j * 1.0))


def test_oracle_unknown_exit_2(capsys):
    assert main(["oracle", "frobnicate"]) == 2


def test_both_preset_and_config_rejected(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["run", "--preset", "fig1a", "--config", cfg]) == 2
