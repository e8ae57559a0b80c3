import json
from pathlib import Path

import pytest

from lame_edge.cli import (
    EXIT_ACCEPTANCE,
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    cross_field_errors,
    load_config,
    main,
)

REPO = Path(__file__).resolve().parent.parent


def write_config(tmp_path: Path, **overrides) -> Path:
    cfg = {
        "version": 1,
        "profile": {"lambda": [1.0, 0.3], "mu": [1.0, 0.2], "m": 2, "p": 0.9},
        "order": 1,
        "ladder": [8, 16, 32, 64],
        "rho_tilde": 4,
        "probes": {"kinds": ["e3", "sigma1"], "directions": [[1.0, 0.0]]},
        "cutoff": {"kind": "gaussian"},
        "quadrature": {"nodes": 48},
        "calibrate": False,
        "seed": 7,
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestValidate:
    def test_bundled_configs_valid(self):
        for name in ("homogeneous", "gradient"):
            assert main(["validate", "--config", str(REPO / "configs" / f"{name}.json")]) == EXIT_OK

    def test_smallness_violation_named(self, tmp_path):
        path = write_config(tmp_path, rho_tilde=2)
        with pytest.raises(ConfigError, match="smallness"):
            load_config(path)
        assert main(["validate", "--config", str(path)]) == EXIT_CONFIG

    def test_non_dyadic_ladder_named(self, tmp_path):
        path = write_config(tmp_path, ladder=[10, 30, 60, 120])
        errors = cross_field_errors(json.loads(path.read_text()))
        assert any("dyadic" in e for e in errors)
        assert main(["validate", "--config", str(path)]) == EXIT_CONFIG

    def test_order_beyond_profile_derivatives(self, tmp_path):
        path = write_config(tmp_path)
        cfg = json.loads(path.read_text())
        cfg["profile"]["m"] = 0
        path.write_text(json.dumps(cfg))
        errors = cross_field_errors(cfg)
        assert any("exceeds profile derivative order" in e for e in errors)
        assert main(["validate", "--config", str(path)]) == EXIT_CONFIG

    def test_inadmissible_profile_named(self, tmp_path):
        path = write_config(tmp_path)
        cfg = json.loads(path.read_text())
        cfg["profile"]["mu"] = [1.0, -1.0]
        path.write_text(json.dumps(cfg))
        assert main(["validate", "--config", str(path)]) == EXIT_CONFIG

    def test_schema_violation(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"version": 1, "profile": {}}))
        assert main(["validate", "--config", str(path)]) == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


class TestStroh:
    def test_output_round_trips(self, tmp_path, capsys):
        path = write_config(tmp_path, profile={"lambda": [1.0], "mu": [1.0], "m": 2, "p": 0.9})
        out = tmp_path / "out"
        assert main(["stroh", "--config", str(path), "--out", str(out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "eigenvalues" in text
        payload = json.loads((out / "stroh.json").read_text())
        assert payload["Z"]["iota_squared"]["re"][0][0] == pytest.approx(1.5)
        assert payload["Z"]["iota_linear"]["re"][0][0] == pytest.approx(1.5)
        # eigenvalues are +-i with multiplicity three
        ims = sorted(payload["eigenvalues_im"])
        assert ims[:3] == pytest.approx([-1.0] * 3, abs=1e-6)
        assert ims[3:] == pytest.approx([1.0] * 3, abs=1e-6)
        assert max(payload["residuals"].values()) < 1e-10
        # deterministic serialization round-trip
        assert json.loads(json.dumps(payload, sort_keys=True)) == payload


class TestGeometryCheck:
    def test_passes_and_writes_table(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "geo"
        assert main(["geometry-check", "--config", str(path), "--out", str(out)]) == EXIT_OK
        table = (out / "geometry_checks.csv").read_text().splitlines()
        assert table[0].startswith("chart,")
        assert len(table) == 4
        assert all(line.endswith("true") for line in table[1:])


class TestForwardCommand:
    def test_csv_columns(self, tmp_path):
        path = write_config(tmp_path, order=0, ladder=[8, 16, 32, 64],
                            probes={"kinds": ["sigma1"], "directions": [[1.0, 0.0]]})
        out = tmp_path / "fwd"
        assert main(["forward", "--config", str(path), "--out", str(out)]) == EXIT_OK
        rows = (out / "pairings.csv").read_text().splitlines()
        assert rows[0] == "N,probe_id,m,re,im,tail,nodes"
        assert len(rows) == 5
        assert rows[1].startswith("8,sigma1@(1,0),0,")
        assert rows[1].endswith(f",{4 * 48**2}")
        manifest = json.loads((out / "manifest.json").read_text())
        assert "pairings.csv" in manifest["outputs"]


class TestTolScale:
    def test_tol_scale_flag_parses_and_runs(self, tmp_path):
        path = write_config(tmp_path, order=0, ladder=[8, 16, 32, 64],
                            probes={"kinds": ["sigma1"], "directions": [[1.0, 0.0]]})
        out = tmp_path / "ts"
        rc = main(["forward", "--config", str(path), "--out", str(out),
                   "--tol-scale", "10.0"])
        assert rc == EXIT_OK
        assert (out / "pairings.csv").exists()


class TestAnsatzCheck:
    def test_emits_decay_csv(self, tmp_path):
        path = write_config(tmp_path, order=0, ladder=[8, 16, 32, 64],
                            profile={"lambda": [1.0], "mu": [1.0], "m": 2, "p": 0.9})
        out = tmp_path / "ans"
        rc = main(["ansatz-check", "--config", str(path), "--out", str(out)])
        assert rc == EXIT_OK
        rows = (out / "residual_decay.csv").read_text().splitlines()
        assert rows[0] == "N,residual_norm,fitted_slope"
        assert len(rows) == 5


class TestReconstructCommand:
    def test_small_run_and_determinism(self, tmp_path):
        path = write_config(
            tmp_path,
            order=1,
            expect={"lambda": 1.0, "mu": 1.0, "order0_rtol": 0.05},
        )
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        rc1 = main(["reconstruct", "--config", str(path), "--out", str(out1)])
        rc2 = main(["reconstruct", "--config", str(path), "--out", str(out2)])
        assert rc1 == EXIT_OK and rc2 == EXIT_OK
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
        assert (out1 / "ladders.csv").read_bytes() == (out2 / "ladders.csv").read_bytes()
        report = json.loads((out1 / "report.json").read_text())
        assert report["order0"]["lambda"] == pytest.approx(1.0, rel=0.05)
        assert set(report["order_m"]) == {"plus_one", "plus_a3_squared", "predicted"}
        assert report["variant_verdict"] == "calibration-only"

    def test_parallel_runner_matches_serial(self, tmp_path):
        path = write_config(tmp_path, order=0, ladder=[8, 16, 32, 64],
                            probes={"kinds": ["e3", "sigma1"], "directions": [[1.0, 0.0]]})
        out1, out2 = tmp_path / "serial", tmp_path / "jobs2"
        assert main(["reconstruct", "--config", str(path), "--out", str(out1)]) == EXIT_OK
        assert main(["reconstruct", "--config", str(path), "--out", str(out2),
                     "--jobs", "2"]) == EXIT_OK
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
        assert (out1 / "ladders.csv").read_bytes() == (out2 / "ladders.csv").read_bytes()

    def test_expect_breach_exits_2(self, tmp_path):
        path = write_config(
            tmp_path,
            order=0,
            expect={"lambda": 5.0, "mu": 5.0, "order0_rtol": 0.01},
        )
        out = tmp_path / "breach"
        assert main(["reconstruct", "--config", str(path), "--out", str(out)]) == EXIT_ACCEPTANCE
        report = json.loads((out / "report.json").read_text())
        assert report["expect_failures"]
