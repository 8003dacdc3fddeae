import json
from pathlib import Path

import numpy as np
import pytest

from levysolow.cli import ConfigError, config_doc, main, parse_config

FIG5_DOC = {
    "variant": "three_eq",
    "savings": {"s1": 0.2, "s2": 0.8, "gamma": 0.5, "phi": 1.0},
    "production": {"B": 1.5, "a": 0.33},
    "noise": {"sigma": 0.1, "lam": 0.01, "jump_scale": 0.1},
    "model": {"rho": 0.02, "v": 0.02, "beta_inv": 0.4, "eta_a": 0.1},
    "integrator": {"dt": 0.01, "T": 50.0},
    "seed": 12,
}


def write_config(tmp_path: Path, doc: dict, name="config.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def read_rows(path: Path) -> list[list[str]]:
    lines = path.read_text().splitlines()
    return [line.split(",") for line in lines]


class TestConfigParsing:
    def test_unknown_top_level_key_named(self):
        with pytest.raises(ConfigError, match="'bogus'"):
            parse_config({"bogus": 1})

    def test_unknown_nested_key_named(self):
        with pytest.raises(ConfigError, match="savings.'slope'"):
            parse_config({"savings": {"slope": 3}})

    def test_round_trip(self):
        rc = parse_config(FIG5_DOC)
        doc = config_doc(rc)
        rc2 = parse_config(doc)
        assert config_doc(rc2) == doc

    def test_sidecar_accepted_as_config(self):
        rc = parse_config(FIG5_DOC)
        sidecar = {"schema": "levysolow.sidecar/1", "config": config_doc(rc)}
        rc2 = parse_config(sidecar)
        assert config_doc(rc2) == config_doc(rc)


class TestSimulateCommand:
    def test_row_count_and_header(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FIG5_DOC)
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_rows(out / "simulate.csv")
        assert rows[0] == ["t", "k", "I", "X"]
        assert len(rows) == 1 + 5001
        meta = json.loads((out / "simulate.meta.json").read_text())
        assert meta["seed"] == 12
        assert meta["schema"] == "levysolow.sidecar/1"

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, {**FIG5_DOC, "integrator": {"dt": 0.01, "T": 2.0}})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out2)]) == 0
        assert (out1 / "simulate.csv").read_bytes() == (out2 / "simulate.csv").read_bytes()

    def test_rerun_from_sidecar_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, {**FIG5_DOC, "integrator": {"dt": 0.01, "T": 2.0}})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
        rc = main(
            [
                "simulate",
                "--config",
                str(out1 / "simulate.meta.json"),
                "--set",
                f"out_dir={out2}",
            ]
        )
        assert rc == 0
        assert (out1 / "simulate.csv").read_bytes() == (out2 / "simulate.csv").read_bytes()

    def test_constant_column_at_equilibrium(self, tmp_path):
        doc = {
            "variant": "deterministic",
            "savings": {"s1": 0.2, "s2": 0.8, "gamma": 1.0, "phi": 1.0},
            "production": {"B": 1.5, "a": 0.3},
            "model": {"beta_mult": 2.0},
            "integrator": {"dt": 0.01, "T": 1.0},
            "init": [1.0],
        }
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(write_config(tmp_path, doc)), "--out", str(out)]) == 0
        rows = read_rows(out / "simulate.csv")
        assert {r[1] for r in rows[1:]} == {"1"}

    def test_lf_line_endings_and_decimal_points(self, tmp_path):
        cfg = write_config(tmp_path, {**FIG5_DOC, "integrator": {"dt": 0.01, "T": 0.1}})
        out = tmp_path / "out"
        main(["simulate", "--config", str(cfg), "--out", str(out)])
        raw = (out / "simulate.csv").read_bytes()
        assert b"\r" not in raw
        assert b"," in raw and b";" not in raw


class TestBifurcateCommand:
    DOC = {
        "variant": "deterministic",
        "savings": {"s1": 0.2, "s2": 0.8, "gamma": 0.5, "phi": 1.0},
        "production": {"B": 1.5, "a": 0.3},
        "model": {"beta_mult": 2.0},
        "gamma_grid": [0.5, 1.0, 2.0, 2.5, 3.0, 4.0, 5.0],
    }

    def test_gamma_c_in_sidecar(self, tmp_path):
        out = tmp_path / "out"
        assert main(["bifurcate", "--config", str(write_config(tmp_path, self.DOC)), "--out", str(out)]) == 0
        meta = json.loads((out / "bifurcate.meta.json").read_text())
        assert abs(meta["gamma_c"] - 7.0 / 3.0) < 1e-9

    def test_row_structure(self, tmp_path):
        out = tmp_path / "out"
        main(["bifurcate", "--config", str(write_config(tmp_path, self.DOC)), "--out", str(out)])
        rows = read_rows(out / "bifurcation.csv")[1:]
        by_gamma: dict[str, list[list[str]]] = {}
        for r in rows:
            by_gamma.setdefault(r[0], []).append(r)
        assert [len(by_gamma[g]) for g in ("0.5", "1", "2")] == [1, 1, 1]
        assert [len(by_gamma[g]) for g in ("2.5", "3", "4", "5")] == [3, 3, 3, 3]

    def test_single_gamma_above_critical(self, tmp_path):
        doc = {**self.DOC, "gamma_grid": [4.0]}
        out = tmp_path / "out"
        main(["bifurcate", "--config", str(write_config(tmp_path, doc)), "--out", str(out)])
        rows = read_rows(out / "bifurcation.csv")[1:]
        assert [r[3] for r in rows] == ["stable", "unstable", "stable"]
        ks = [float(r[2]) for r in rows]
        assert ks == sorted(ks)

    def test_grid_required(self, tmp_path):
        doc = {k: v for k, v in self.DOC.items() if k != "gamma_grid"}
        rc = main(["bifurcate", "--config", str(write_config(tmp_path, doc)), "--out", str(tmp_path / "o")])
        assert rc == 2


class TestPhasePotentialCommand:
    DOC = {
        "variant": "deterministic",
        "savings": {"s1": 0.2, "s2": 0.8, "gamma": 0.5, "phi": 1.0},
        "production": {"B": 1.5, "a": 0.3},
        "model": {"beta_mult": 2.0},
        "gamma_list": [1.0, 4.0],
        "k_grid": {"lo": 0.5, "hi": 1.5, "n": 3},
    }

    def test_equilibrium_row_zeroes(self, tmp_path):
        out = tmp_path / "out"
        assert main(["phase-potential", "--config", str(write_config(tmp_path, self.DOC)), "--out", str(out)]) == 0
        rows = read_rows(out / "phase_potential_gamma1.csv")[1:]
        mid = rows[1]  # k = 1.0
        assert float(mid[0]) == 1.0
        assert float(mid[1]) == 0.0
        assert float(mid[2]) == 0.0

    def test_one_file_per_gamma(self, tmp_path):
        out = tmp_path / "out"
        main(["phase-potential", "--config", str(write_config(tmp_path, self.DOC)), "--out", str(out)])
        assert (out / "phase_potential_gamma1.csv").exists()
        assert (out / "phase_potential_gamma4.csv").exists()

    def test_continuity_in_gamma(self, tmp_path):
        doc = {**self.DOC, "gamma_list": [0.0, 1e-8], "k_grid": {"lo": 0.5, "hi": 2.0, "n": 7}}
        out = tmp_path / "out"
        main(["phase-potential", "--config", str(write_config(tmp_path, doc)), "--out", str(out)])
        a = np.loadtxt(out / "phase_potential_gamma0.csv", delimiter=",", skiprows=1)
        b = np.loadtxt(out / "phase_potential_gamma1e-08.csv", delimiter=",", skiprows=1)
        assert np.max(np.abs(a - b)) < 1e-6


class TestLyapunovCommand:
    def test_linear_mode(self, tmp_path):
        doc = {
            "variant": "deterministic",
            "savings": {"s1": 0.2, "s2": 0.8, "gamma": 0.0, "phi": 1.0},
            "production": {"B": 1.5, "a": 0.3},
            "model": {"beta_mult": 2.0},
            "integrator": {"dt": 0.001, "T": 10.0},
            "lyapunov_system": "linear",
            "sigma_sweep": [0.0],
            "seeds_per_point": 1,
        }
        out = tmp_path / "out"
        assert main(["lyapunov", "--config", str(write_config(tmp_path, doc)), "--out", str(out)]) == 0
        rows = read_rows(out / "lyapunov.csv")
        assert rows[0] == ["sigma", "estimate", "half_width", "unreliable"]
        assert abs(float(rows[1][1]) + 0.7) < 1e-3

    def test_ou_mode_and_sweep_echo(self, tmp_path):
        doc = {
            "variant": "ou",
            "model": {"eta_a": 0.1},
            "integrator": {"dt": 0.01, "T": 20.0},
            "lyapunov_system": "ou",
            "sigma_sweep": [0.05, 0.1],
            "seeds_per_point": 2,
        }
        out = tmp_path / "out"
        assert main(["lyapunov", "--config", str(write_config(tmp_path, doc)), "--out", str(out)]) == 0
        rows = read_rows(out / "lyapunov.csv")[1:]
        assert [float(r[0]) for r in rows] == [0.05, 0.1]
        for r in rows:
            assert abs(float(r[1]) + 0.1) / 0.1 < 0.05
            assert r[3] == "0"

    def test_sweep_required(self, tmp_path):
        doc = {"lyapunov_system": "ou"}
        rc = main(["lyapunov", "--config", str(write_config(tmp_path, doc)), "--out", str(tmp_path / "o")])
        assert rc == 2


class TestSlowfastCommand:
    def test_rows_and_pair_files(self, tmp_path):
        doc = {
            "savings": {"s1": 0.2, "s2": 0.8, "gamma": 0.5, "phi": 1.0},
            "production": {"B": 1.5, "a": 0.3},
            "model": {"beta_mult": 2.0, "kappa": 1.0, "eta_a": 0.1},
            "noise": {"sigma": 0.1, "alpha_stable": 1.0},
            "integrator": {"dt": 0.01, "T": 5.0},
            "eps_list": [0.2, 0.1, 0.05],
            "seed": 7,
        }
        out = tmp_path / "out"
        assert main(["slowfast", "--config", str(write_config(tmp_path, doc)), "--out", str(out)]) == 0
        rows = read_rows(out / "slowfast.csv")[1:]
        assert len(rows) == 3
        rms = [float(r[1]) for r in rows]
        assert rms[0] > rms[1] > rms[2]
        pair = read_rows(out / "slowfast_eps0.05.csv")
        assert pair[0] == ["t", "k_full", "k_reduced"]
        assert len(pair) == 1 + 501

    def test_deterministic_limit(self, tmp_path):
        doc = {
            "savings": {"s1": 0.2, "s2": 0.8, "gamma": 0.5, "phi": 1.0},
            "production": {"B": 1.5, "a": 0.3},
            "model": {"beta_mult": 2.0, "kappa": 1.0, "eta_a": 0.1},
            "noise": {"sigma": 0.0},
            "integrator": {"dt": 2e-4, "T": 5.0},
            "eps_list": [1e-3],
            "k0": 1.2,
        }
        out = tmp_path / "out"
        assert main(["slowfast", "--config", str(write_config(tmp_path, doc)), "--out", str(out)]) == 0
        rows = read_rows(out / "slowfast.csv")[1:]
        assert float(rows[0][1]) < 1e-3

    def test_eps_required(self, tmp_path):
        rc = main(["slowfast", "--config", str(write_config(tmp_path, {})), "--out", str(tmp_path / "o")])
        assert rc == 2


class TestEnsembleCommand:
    DOC = {
        "variant": "three_eq",
        "savings": {"s1": 0.2, "s2": 0.8, "gamma": 0.5, "phi": 1.0},
        "production": {"B": 1.5, "a": 0.3},
        "noise": {"sigma": 0.1, "lam": 0.05, "jump_scale": 0.3},
        "model": {"rho": 0.75, "beta_inv": 0.4, "v": 0.6, "eta_a": 1.0},
        "integrator": {"dt": 0.01, "T": 1.0},
        "n_paths": 8,
        "quantiles": [0.05, 0.5, 0.95],
        "seed": 3,
    }

    def test_long_format_and_nonnegative_variance(self, tmp_path):
        out = tmp_path / "out"
        assert main(["ensemble", "--config", str(write_config(tmp_path, self.DOC)), "--out", str(out)]) == 0
        rows = read_rows(out / "ensemble.csv")
        assert rows[0] == ["t", "component", "mean", "var", "q0.05", "q0.5", "q0.95"]
        assert len(rows) == 1 + 3 * 101
        assert all(float(r[3]) >= 0.0 for r in rows[1:])

    def test_singleton_matches_simulate(self, tmp_path):
        doc = {**self.DOC, "n_paths": 1, "quantiles": []}
        out = tmp_path / "out"
        main(["ensemble", "--config", str(write_config(tmp_path, doc)), "--out", str(out)])
        main(["simulate", "--config", str(write_config(tmp_path, doc, "c2.json")), "--out", str(out)])
        sim = read_rows(out / "simulate.csv")[1:]
        ens_rows = [r for r in read_rows(out / "ensemble.csv")[1:] if r[1] == "k"]
        for srow, erow in zip(sim, ens_rows):
            assert srow[1] == erow[2]

    def test_compare_identity_when_lam_zero(self, tmp_path):
        doc = {**self.DOC, "compare_drivers": True, "quantiles": []}
        doc["noise"] = {**doc["noise"], "lam": 0.0}
        out = tmp_path / "out"
        assert main(["ensemble", "--config", str(write_config(tmp_path, doc)), "--out", str(out)]) == 0
        rows = read_rows(out / "ensemble_compare.csv")
        header, vals = rows[0], rows[1]
        ratios = {h: float(v) for h, v in zip(header, vals)}
        assert ratios["kurtosis_ratio"] == 1.0
        assert ratios["max_step_ratio"] == 1.0

    def test_workers_identical_output(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        doc1 = {**self.DOC, "n_workers": 1}
        doc4 = {**self.DOC, "n_workers": 4}
        main(["ensemble", "--config", str(write_config(tmp_path, doc1, "w1.json")), "--out", str(out1)])
        main(["ensemble", "--config", str(write_config(tmp_path, doc4, "w4.json")), "--out", str(out2)])
        assert (out1 / "ensemble.csv").read_bytes() == (out2 / "ensemble.csv").read_bytes()


class TestCliPlumbing:
    def test_unknown_key_exit_code(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"bogus": 1})
        rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "bogus" in capsys.readouterr().err

    def test_invalid_param_exit_code(self, tmp_path):
        doc = {**FIG5_DOC, "savings": {"s1": 0.9, "s2": 0.1}}
        rc = main(["simulate", "--config", str(write_config(tmp_path, doc)), "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_runtime_error_exit_code(self, tmp_path):
        # investment off its invariant axis explodes under these parameters
        doc = {**FIG5_DOC, "init": [1.0, 1.0, 0.0], "integrator": {"dt": 0.01, "T": 50.0}}
        rc = main(["simulate", "--config", str(write_config(tmp_path, doc)), "--out", str(tmp_path / "o")])
        assert rc == 3

    def test_io_error_exit_code(self, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("x")
        cfg = write_config(tmp_path, {**FIG5_DOC, "integrator": {"dt": 0.01, "T": 0.1}})
        rc = main(["simulate", "--config", str(cfg), "--out", str(blocker / "sub")])
        assert rc == 4

    def test_missing_config_file(self, tmp_path):
        rc = main(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
        assert rc == 4

    def test_set_overrides(self, tmp_path):
        cfg = write_config(tmp_path, {**FIG5_DOC, "integrator": {"dt": 0.01, "T": 0.5}})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", str(cfg), "--out", str(out1), "--set", "savings.gamma=4.0"])
        meta = json.loads((out1 / "simulate.meta.json").read_text())
        assert meta["config"]["savings"]["gamma"] == 4.0
        main(["simulate", "--config", str(cfg), "--out", str(out2), "--set", "seed=99"])
        meta2 = json.loads((out2 / "simulate.meta.json").read_text())
        assert meta2["seed"] == 99

    def test_seed_flag_overrides(self, tmp_path):
        cfg = write_config(tmp_path, {**FIG5_DOC, "integrator": {"dt": 0.01, "T": 0.5}})
        out = tmp_path / "o"
        main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "777"])
        meta = json.loads((out / "simulate.meta.json").read_text())
        assert meta["seed"] == 777

    def test_bad_set_syntax(self, tmp_path):
        rc = main(["simulate", "--set", "nonsense", "--out", str(tmp_path / "o")])
        assert rc == 2
