"""Configuration parsing/validation, artifact emission, CSV fidelity, and
exit-code contracts of the command-line shell."""

import json
import os

import numpy as np
import pytest
from scipy.io import mmread

from cylshock import ConfigError
from cylshock.cli import apply_overrides, main, parse_config, run


class TestParseConfig:
    def test_minimal_with_defaults(self):
        cfg = parse_config({"inflow": {"eps_swirl": 0.02}})
        assert cfg.inflow.eps_swirl == 0.02
        assert cfg.background.gamma == 1.4
        assert cfg.background.u0m == 2.0
        assert cfg.solver.n_y == 129 and cfg.solver.n_t == 65
        assert cfg.inflow.n_r == cfg.solver.n_t

    def test_negative_amplitude_names_field(self):
        with pytest.raises(ConfigError) as err:
            parse_config({"inflow": {"eps_swirl": -1}})
        assert any("inflow.eps_swirl" in e for e in err.value.errors)

    def test_unknown_key_suggests(self):
        with pytest.raises(ConfigError) as err:
            parse_config({"inflow": {"epsSwirl": 0.1}})
        joined = " ".join(err.value.errors)
        assert "epsSwirl" in joined and "eps_swirl" in joined

    def test_all_errors_reported(self):
        with pytest.raises(ConfigError) as err:
            parse_config(
                {
                    "inflow": {"eps_swirl": -1, "eps_entropy": -2},
                    "solver": {"n_y": 3},
                }
            )
        assert len(err.value.errors) == 3

    def test_malformed_json(self):
        with pytest.raises(ConfigError) as err:
            parse_config("{not json")
        assert any("malformed" in e for e in err.value.errors)

    def test_round_trip(self):
        cfg = parse_config({"inflow": {"eps_swirl": 0.02}, "solver": {"n_y": 33, "n_t": 17}})
        again = parse_config(cfg.serialize())
        assert again.raw == cfg.raw
        assert again.config_hash == cfg.config_hash

    def test_type_errors(self):
        with pytest.raises(ConfigError):
            parse_config({"solver": {"n_y": 33.5}})
        with pytest.raises(ConfigError):
            parse_config({"inflow": {"eps_swirl": "big"}})


class TestOverridesAndHash:
    def test_override_types(self):
        raw = {}
        errs = apply_overrides(
            raw, ["solver.n_y=33", "inflow.eps_swirl=0.02", "solver.mode=nested"]
        )
        assert not errs
        assert raw["solver"]["n_y"] == 33
        assert raw["inflow"]["eps_swirl"] == 0.02
        assert raw["solver"]["mode"] == "nested"

    def test_bad_override_shape(self):
        assert apply_overrides({}, ["oops"]) != []
        assert apply_overrides({}, ["a.b.c=1"]) != []

    def test_hash_semantics(self):
        base = parse_config({"inflow": {"eps_swirl": 0.02}})
        same = parse_config({"inflow": {"eps_swirl": 0.02}, "output": {"dir": "elsewhere"}})
        different = parse_config({"inflow": {"eps_swirl": 0.03}})
        assert base.config_hash == same.config_hash
        assert base.config_hash != different.config_hash


@pytest.fixture(scope="module")
def perturbed_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = parse_config(
        {
            "inflow": {"eps_swirl": 0.02, "eps_entropy": 0.01},
            "solver": {"n_y": 33, "n_t": 17},
            "output": {"dir": str(out)},
        }
    )
    return run(cfg), cfg


class TestRunArtifacts:
    def test_background_run_exit_zero_and_flat_shock(self, tmp_path):
        code = main(["solve", "--grid", "33x17", "--out", str(tmp_path)])
        assert code == 0
        shock = np.genfromtxt(tmp_path / "shock.csv", delimiter=",", names=True)
        assert np.max(np.abs(shock["f"])) <= 1e-10

    def test_converged_artifacts(self, perturbed_run):
        artifacts, _ = perturbed_run
        assert artifacts.status == "converged"
        for name, path in artifacts.paths.items():
            assert os.path.exists(path), name
            assert os.path.getsize(path) > 0, name
        shock = np.genfromtxt(artifacts.paths["shock"], delimiter=",", names=True)
        assert np.max(np.abs(shock["f"])) > 1e-4

    def test_checksums_present(self, perturbed_run):
        artifacts, _ = perturbed_run
        assert set(artifacts.checksums) == set(artifacts.paths)
        assert all(len(v) == 64 for v in artifacts.checksums.values())

    def test_csv_reread_reproduces_diagnostics(self, perturbed_run):
        artifacts, _ = perturbed_run
        report = json.load(open(artifacts.paths["report"]))
        diag = report["report"]["diagnostics"]
        data = np.genfromtxt(artifacts.paths["fields"], delimiter=",", names=True)
        gamma = report["config"]["gas"]["gamma"]
        bern = 0.5 * (data["u_x"] ** 2 + data["u_r"] ** 2 + data["u_theta"] ** 2)
        bern += gamma * data["p"] / ((gamma - 1.0) * data["rho"])
        assert abs(np.max(np.abs(bern - 4.5)) - diag["bernoulli_deviation"]) < 1e-9
        assert abs(np.max(data["Mach"]) - diag["mach_downstream_max"]) < 1e-9
        assert abs(np.min(data["rho"]) - diag["rho_min"]) < 1e-9

    def test_divergence_exit_two_with_named_failure(self, tmp_path):
        code = main(
            [
                "solve",
                "--grid",
                "33x17",
                "--set",
                "inflow.eps_swirl=0.6",
                "--set",
                "inflow.eps_entropy=0.35",
                "--set",
                "solver.max_sweeps=30",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 2
        report = json.load(open(tmp_path / "report.json"))
        assert report["status"] == "diverged"
        assert "sweep cap" in report["failure"]

    def test_config_error_exit_one(self, tmp_path):
        code = main(["solve", "--set", "inflow.epsSwirl=0.1", "--out", str(tmp_path)])
        assert code == 1

    def test_plots_emitted(self, tmp_path):
        code = main(["solve", "--grid", "33x17", "--out", str(tmp_path), "--emit-plots"])
        assert code == 0
        for name in ("shock.svg", "mach.svg", "convergence.svg"):
            assert (tmp_path / name).stat().st_size > 0

    def test_matrix_dump_symmetric(self, tmp_path):
        code = main(
            [
                "solve",
                "--grid",
                "33x17",
                "--set",
                "output.emit_matrix=true",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        mat = mmread(tmp_path / "system_potential.mtx").tocsr()
        asym = abs(mat - mat.T).max()
        assert asym == 0.0
        rhs = mmread(tmp_path / "system_potential_rhs.mtx")
        assert rhs.shape[0] == mat.shape[0]

    def test_non_reference_background(self, tmp_path):
        # the background fixed point holds for any admissible gas section
        code = main(
            [
                "solve",
                "--grid",
                "33x17",
                "--set",
                "gas.u0_minus=2.5",
                "--set",
                "inflow.eps_swirl=0.01",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        report = json.load(open(tmp_path / "report.json"))
        assert report["report"]["diagnostics"]["mach_downstream_max"] < 1.0

    def test_out_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CYLSHOCK_OUT_ROOT", str(tmp_path))
        cfg = parse_config(
            {"solver": {"n_y": 33, "n_t": 17}, "output": {"dir": "nested/run"}}
        )
        artifacts = run(cfg)
        assert artifacts.paths["report"].startswith(str(tmp_path))


class TestVerifyAndSweep:
    def test_verify_jump_battery(self, capsys):
        code = main(["verify", "--battery", "jump"])
        out = capsys.readouterr().out
        assert code == 0
        assert "PASS" in out and "FAIL" not in out

    def test_sweep_table(self, tmp_path, capsys):
        code = main(
            [
                "sweep",
                "--grid",
                "33x17",
                "--set",
                "inflow.eps_swirl=0.02",
                "--set",
                "inflow.eps_entropy=0.01",
                "--factors",
                "1,0.5",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        study = json.load(open(tmp_path / "sweep.json"))
        assert study["f_ratio_spread"] < 0.20
