import argparse
import csv
import json

import pytest

from ifm_lab.cli import (
    DEFAULTS,
    PAPER_SCALE,
    _cell,
    _parse_grid,
    _resolve_config,
    main,
)
from ifm_lab.schemes import eta_ev, eta_zeno, zeno_absorption


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def header_of(path):
    with open(path, newline="") as fh:
        return fh.readline().rstrip("\r\n")


class TestGridParsing:
    def test_linspace_form(self):
        grid = _parse_grid("0.05:0.95:19")
        assert len(grid) == 19
        assert grid[0] == pytest.approx(0.05)
        assert grid[-1] == pytest.approx(0.95)

    def test_comma_form(self):
        assert _parse_grid("0.3,0.5") == [0.3, 0.5]

    @pytest.mark.parametrize("bad", ["0:1:5", "0.5:1.5:3", "a,b", "0.1:0.9", ""])
    def test_rejects_bad_grids(self, bad):
        from ifm_lab.cli import ConfigError

        with pytest.raises(ConfigError):
            _parse_grid(bad)


class TestConfigResolution:
    def namespace(self, **kwargs):
        return argparse.Namespace(config=None, paper_scale=False, **kwargs)

    def test_defaults_pass_through(self):
        config = _resolve_config("zeno", self.namespace())
        assert config == DEFAULTS["zeno"]

    def test_flag_overrides(self):
        config = _resolve_config("zeno", self.namespace(n_max=16))
        assert config["n_max"] == 16
        assert config["n_min"] == DEFAULTS["zeno"]["n_min"]

    def test_paper_scale_bumps_only_unset_keys(self):
        args = self.namespace(shots=777)
        args.paper_scale = True
        config = _resolve_config("ev-sweep", args)
        assert config["shots"] == 777
        assert config["m_circuits"] == PAPER_SCALE["m_circuits"]

    def test_paper_scale_replay_is_idempotent(self, tmp_path):
        args = self.namespace()
        args.paper_scale = True
        scaled = _resolve_config("ev-sweep", args)
        assert scaled["shots"] == PAPER_SCALE["shots"]
        # a manifest stores the scaled config; replaying it with the flag
        # still set must not rescale anything
        config_file = tmp_path / "replay.json"
        config_file.write_text(json.dumps(scaled))
        replay_args = argparse.Namespace(config=str(config_file), paper_scale=True)
        assert _resolve_config("ev-sweep", replay_args) == scaled

    def test_unknown_key_rejected(self, tmp_path):
        config_file = tmp_path / "bad.json"
        config_file.write_text(json.dumps({"bogus": 1}))
        assert main(["zeno", "--config", str(config_file), "--out-dir", str(tmp_path)]) == 2

    def test_cell_formatting(self):
        import numpy as np

        assert _cell(True) == "true"
        assert _cell(np.bool_(False)) == "false"
        assert _cell(0.1) == repr(0.1)
        assert _cell(np.float64(0.25)) == "0.25"
        assert _cell(np.int64(3)) == "3"
        assert _cell(None) == ""
        assert _cell("ev") == "ev"


class TestCommandsSucceed:
    def test_ev_sweep(self, tmp_path):
        code = main(
            [
                "ev-sweep",
                "--grid",
                "0.3,0.5",
                "--shots",
                "200",
                "--m-circuits",
                "2",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert code == 0
        assert header_of(tmp_path / "ev_sweep.csv") == (
            "scheme_id,r,eta_hat,std_error,shots,m_circuits,seed,"
            "eta_theory,eta_band_minus,eta_band_plus"
        )
        rows = read_rows(tmp_path / "ev_sweep.csv")
        assert [row["r"] for row in rows] == ["0.3", "0.5"]
        assert float(rows[1]["eta_theory"]) == eta_ev(0.5)
        assert (tmp_path / "ev_sweep.svg").stat().st_size > 0
        manifest = json.loads((tmp_path / "ev_sweep_manifest.json").read_text())
        assert manifest["command"] == "ev-sweep"
        assert manifest["config"]["shots"] == 200
        assert manifest["outputs"] == ["ev_sweep.csv", "ev_sweep.svg"]

    def test_multi_object(self, tmp_path):
        code = main(
            [
                "multi-object",
                "--n-max",
                "2",
                "--shots",
                "200",
                "--m-circuits",
                "2",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert code == 0
        assert header_of(tmp_path / "multi_object.csv") == (
            "scheme_id,n,eta_hat,std_error,shots,m_circuits,seed,eta_theory,eta_optimal"
        )
        rows = read_rows(tmp_path / "multi_object.csv")
        assert [row["n"] for row in rows] == ["1", "2"]
        assert all(row["scheme_id"] == "cascade" for row in rows)
        assert float(rows[0]["eta_optimal"]) > float(rows[0]["eta_theory"])

    def test_noise_robustness(self, tmp_path):
        code = main(
            [
                "noise-robustness",
                "--modes",
                "2,3",
                "--fractions",
                "0.9",
                "--trials",
                "300",
                "--bins",
                "10",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert code == 0
        assert header_of(tmp_path / "robustness_hist.csv") == (
            "m,eta_target,sigma,trial_count,bin_left,bin_right,count"
        )
        assert header_of(tmp_path / "robustness_std.csv") == "m,eta_target,std"
        hist = read_rows(tmp_path / "robustness_hist.csv")
        assert len(hist) == 2 * 10
        assert sum(int(row["count"]) for row in hist if row["m"] == "2") == 300
        stds = read_rows(tmp_path / "robustness_std.csv")
        assert len(stds) == 2
        assert float(stds[0]["eta_target"]) == pytest.approx(0.45)

    def test_optimal_r(self, tmp_path):
        code = main(["optimal-r", "--n-max", "3", "--out-dir", str(tmp_path)])
        assert code == 0
        assert header_of(tmp_path / "optimal_r.csv") == "n,i,R_i_opt,boundary_flag,eta_opt"
        rows = read_rows(tmp_path / "optimal_r.csv")
        assert len(rows) == 1 + 2 + 3
        assert rows[0]["boundary_flag"] == "true"
        report = json.loads((tmp_path / "prefix_report.json").read_text())
        assert report["passed"] is True
        assert report["max_deviation"] < 1e-2

    def test_baseline(self, tmp_path):
        code = main(["baseline", "--n-max", "2", "--out-dir", str(tmp_path)])
        assert code == 0
        assert header_of(tmp_path / "baseline.csv") == (
            "scheme_id,n_objects,mesh_sigma,shots,seed,p_ifm_present,p_abs_present,"
            "p_ifm_absent,p_abs_absent,ifm_ratio,abs_ratio"
        )
        rows = read_rows(tmp_path / "baseline.csv")
        assert [row["scheme_id"] for row in rows] == ["ev", "cascade", "cascade"]
        for row in rows:
            assert float(row["ifm_ratio"]) > 10.0
            assert float(row["abs_ratio"]) > 10.0

    def test_tree(self, tmp_path):
        code = main(["tree", "--layers", "3", "--out-dir", str(tmp_path)])
        assert code == 0
        payload = json.loads((tmp_path / "tree.json").read_text())
        assert payload["modes"] == 8
        assert payload["depth"] == 6
        assert payload["n_objects"] == 7
        assert payload["chain_multiset"] == {"3": 1, "2": 1, "1": 2}
        flat = sorted(node for chain in payload["chains"] for node in chain)
        assert flat == list(range(1, 8))

    def test_zeno(self, tmp_path):
        code = main(["zeno", "--n-max", "4", "--out-dir", str(tmp_path)])
        assert code == 0
        assert header_of(tmp_path / "zeno.csv") == "n,absorption,eta"
        rows = read_rows(tmp_path / "zeno.csv")
        assert len(rows) == 4
        assert float(rows[0]["eta"]) == 0.0
        assert float(rows[0]["absorption"]) == zeno_absorption(1)
        etas = [float(row["eta"]) for row in rows]
        assert etas == sorted(etas)
        assert etas[3] == eta_zeno(4)

    def test_success_prints_outputs(self, tmp_path, capsys):
        main(["zeno", "--n-max", "2", "--out-dir", str(tmp_path)])
        out = capsys.readouterr().out
        assert str(tmp_path / "zeno.csv") in out
        assert str(tmp_path / "zeno_manifest.json") in out


class TestManifestReplay:
    def test_replay_reproduces_bytes(self, tmp_path):
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        argv = [
            "ev-sweep",
            "--grid",
            "0.3,0.5,0.7",
            "--shots",
            "500",
            "--m-circuits",
            "3",
            "--mesh-sigma",
            "0.01",
        ]
        assert main(argv + ["--out-dir", str(dir_a)]) == 0
        manifest = dir_a / "ev_sweep_manifest.json"
        assert main(["ev-sweep", "--config", str(manifest), "--out-dir", str(dir_b)]) == 0
        assert (dir_a / "ev_sweep.csv").read_bytes() == (dir_b / "ev_sweep.csv").read_bytes()
        assert (dir_a / "ev_sweep.svg").read_bytes() == (dir_b / "ev_sweep.svg").read_bytes()

    def test_manifest_for_wrong_command_rejected(self, tmp_path, capsys):
        assert main(["zeno", "--n-max", "2", "--out-dir", str(tmp_path)]) == 0
        manifest = tmp_path / "zeno_manifest.json"
        code = main(["ev-sweep", "--config", str(manifest), "--out-dir", str(tmp_path)])
        assert code == 2
        assert "belongs to command" in capsys.readouterr().err


class TestFailureExits:
    def test_bad_grid_point(self, tmp_path, capsys):
        code = main(["ev-sweep", "--grid", "1.5", "--out-dir", str(tmp_path)])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_mode_cap_enforced(self, tmp_path, capsys):
        code = main(["multi-object", "--n-max", "9", "--out-dir", str(tmp_path)])
        assert code == 2
        assert "19 modes" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "argv",
        [
            ["baseline", "--n-max", "0"],
            ["zeno", "--n-min", "0"],
            ["zeno", "--n-min", "5", "--n-max", "2"],
            ["noise-robustness", "--bins", "0", "--trials", "10"],
            ["optimal-r", "--n-max", "9"],
        ],
    )
    def test_config_errors(self, argv, tmp_path):
        assert main(argv + ["--out-dir", str(tmp_path)]) == 2

    def test_flag_budget_exceeded(self, tmp_path, capsys):
        argv = [
            "ev-sweep",
            "--grid",
            "0.9,0.92,0.95",
            "--shots",
            "1",
            "--m-circuits",
            "2",
            "--seed",
            "77",
            "--out-dir",
            str(tmp_path),
        ]
        assert main(argv) == 3
        assert "flagged" in capsys.readouterr().err
        # outputs written before the failure stay inspectable and replayable
        manifest = json.loads((tmp_path / "ev_sweep_manifest.json").read_text())
        assert manifest["outputs"] == ["ev_sweep.csv", "ev_sweep.svg"]

    def test_flagged_points_become_missing_cells(self, tmp_path):
        argv = [
            "ev-sweep",
            "--grid",
            "0.9,0.92,0.95",
            "--shots",
            "1",
            "--m-circuits",
            "2",
            "--seed",
            "77",
            "--max-flagged",
            "1.0",
            "--out-dir",
            str(tmp_path),
        ]
        assert main(argv) == 0
        rows = read_rows(tmp_path / "ev_sweep.csv")
        empties = [row for row in rows if row["eta_hat"] == ""]
        assert len(empties) == 2
        for row in empties:
            assert row["std_error"] == ""
            assert row["eta_theory"] != ""


class TestOutputDirectory:
    def test_env_var_fallback(self, tmp_path, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("IFM_LAB_OUT", str(target))
        assert main(["zeno", "--n-max", "2"]) == 0
        assert (target / "zeno.csv").exists()

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("IFM_LAB_OUT", str(tmp_path / "ignored"))
        chosen = tmp_path / "chosen"
        assert main(["zeno", "--n-max", "2", "--out-dir", str(chosen)]) == 0
        assert (chosen / "zeno.csv").exists()
        assert not (tmp_path / "ignored").exists()
