"""CLI commands: schemas, validation, determinism, exit codes."""

import json

import numpy as np
import pytest

from phmc.cli import main, read_dataset


def run_cli(tmp_path, command, config, name="cfg.json", extra=()):
    cfg_path = tmp_path / name
    cfg_path.write_text(json.dumps(config))
    return main([command, "--config", str(cfg_path), *extra])


@pytest.fixture()
def poisson_dataset(tmp_path):
    out = tmp_path / "data"
    config = {
        "model": "poisson",
        "theta": {"rho": 0.8, "alpha": 0.5, "sigma_h": 0.2},
        "T": 25,
        "seed": 7,
        "out_dir": str(out),
    }
    assert run_cli(tmp_path, "simulate", config) == 0
    return out / "dataset.csv"


class TestSimulate:
    def test_writes_dataset_truth_and_manifest(self, tmp_path):
        out = tmp_path / "sim"
        config = {
            "model": "poisson",
            "theta": {"rho": 0.8, "alpha": 0.5, "sigma_h": 0.2},
            "T": 100,
            "seed": 1,
            "out_dir": str(out),
        }
        assert run_cli(tmp_path, "simulate", config) == 0
        lines = (out / "dataset.csv").read_text().splitlines()
        assert lines[0] == "t,y,h"
        assert len(lines) == 101
        y, h = read_dataset(out / "dataset.csv")
        assert np.all(y >= 0) and np.all(y == np.floor(y))
        assert h is not None and len(h) == 100
        truth = json.loads((out / "truth.json").read_text())
        assert truth["theta"]["rho"] == 0.8
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest) == {"config_hash", "seed", "code_version", "wall_time_s"}

    def test_single_row_dataset(self, tmp_path):
        out = tmp_path / "sim1"
        config = {
            "model": "lgssm",
            "d": 2,
            "theta": {"kappa_1": 0.5, "kappa_2": 0.5, "sigma_y": 0.25, "sigma_h": 0.2, "rho": 0.8},
            "T": 1,
            "seed": 2,
            "out_dir": str(out),
        }
        assert run_cli(tmp_path, "simulate", config) == 0
        assert len((out / "dataset.csv").read_text().splitlines()) == 2

    def test_rerun_is_byte_identical(self, tmp_path):
        config = {
            "model": "poisson",
            "theta": {"rho": 0.8, "alpha": 0.5, "sigma_h": 0.2},
            "T": 30,
            "seed": 11,
            "out_dir": str(tmp_path / "a"),
        }
        assert run_cli(tmp_path, "simulate", config) == 0
        first = (tmp_path / "a" / "dataset.csv").read_bytes()
        config["out_dir"] = str(tmp_path / "b")
        assert run_cli(tmp_path, "simulate", config, name="cfg2.json") == 0
        assert (tmp_path / "b" / "dataset.csv").read_bytes() == first

    def test_reports_all_config_errors(self, tmp_path, capsys):
        config = {"model": "nope", "T": 0, "seed": "x"}
        assert run_cli(tmp_path, "simulate", config) == 1
        err = capsys.readouterr().err
        assert err.count("config error:") >= 3


class TestGradVariance:
    def test_schema_and_row_count(self, tmp_path, poisson_dataset):
        out = tmp_path / "gv"
        config = {
            "model": "poisson",
            "theta": {"rho": 0.0, "alpha": 1.0, "sigma_h": 0.8},
            "dataset": str(poisson_dataset),
            "n_grid": [25, 40],
            "runs": 3,
            "seed": 3,
            "out_dir": str(out),
        }
        assert run_cli(tmp_path, "grad-variance", config) == 0
        lines = (out / "grad_variance.csv").read_text().splitlines()
        assert lines[0] == "estimator,N,component,variance,runs"
        assert len(lines) == 1 + 2 * 2 * 3  # estimators x grid x components

    def test_single_run_rejected(self, tmp_path, poisson_dataset, capsys):
        config = {
            "model": "poisson",
            "theta": {"rho": 0.0, "alpha": 1.0, "sigma_h": 0.8},
            "dataset": str(poisson_dataset),
            "n_grid": [25],
            "runs": 1,
            "seed": 3,
            "out_dir": str(tmp_path / "gv1"),
        }
        assert run_cli(tmp_path, "grad-variance", config) == 1
        assert "runs" in capsys.readouterr().err


class TestSample:
    def base_config(self, dataset, out):
        return {
            "model": "poisson",
            "dataset": str(dataset),
            "sampler": "phmc",
            "K": 12,
            "burn_in": 2,
            "thin": 2,
            "N": 30,
            "L": 2,
            "epsilon": 0.02,
            "seed": 5,
            "theta_init": {"rho": 0.5, "alpha": 0.3, "sigma_h": 0.3},
            "out_dir": str(out),
        }

    def test_phmc_outputs(self, tmp_path, poisson_dataset):
        out = tmp_path / "chain"
        config = self.base_config(poisson_dataset, out)
        assert run_cli(tmp_path, "sample", config) == 0
        lines = (out / "chain.csv").read_text().splitlines()
        assert lines[0] == "iter,param_1,param_2,param_3,log_z,accepted"
        assert len(lines) == 1 + (12 - 2) // 2
        lat = (out / "latents.csv").read_text().splitlines()
        assert lat[0] == "iter," + ",".join(f"h_{t}" for t in range(1, 26))
        summary = json.loads((out / "summary.json").read_text())
        assert "acceptance_rate" in summary
        assert summary["param_names"] == ["rho", "alpha", "sigma_h"]

    def test_single_kept_draw_window(self, tmp_path, poisson_dataset):
        out = tmp_path / "chain1"
        config = self.base_config(poisson_dataset, out)
        config.update(K=6, burn_in=5, thin=1)
        assert run_cli(tmp_path, "sample", config) == 0
        assert len((out / "chain.csv").read_text().splitlines()) == 2

    def test_k_not_above_burn_in_rejected(self, tmp_path, poisson_dataset, capsys):
        config = self.base_config(poisson_dataset, tmp_path / "x")
        config.update(K=5, burn_in=5)
        assert run_cli(tmp_path, "sample", config) == 1
        assert "K" in capsys.readouterr().err

    def test_rerun_byte_identical(self, tmp_path, poisson_dataset):
        out = tmp_path / "c1"
        config = self.base_config(poisson_dataset, out)
        assert run_cli(tmp_path, "sample", config) == 0
        first = {
            name: (out / name).read_bytes()
            for name in ("chain.csv", "latents.csv", "summary.json")
        }
        m1 = json.loads((out / "manifest.json").read_text())
        assert run_cli(tmp_path, "sample", config, name="cfg2.json") == 0
        for name, payload in first.items():
            assert (out / name).read_bytes() == payload, name
        m2 = json.loads((out / "manifest.json").read_text())
        m1.pop("wall_time_s"), m2.pop("wall_time_s")
        assert m1 == m2

    def test_pmmh_and_prior_init(self, tmp_path, poisson_dataset):
        out = tmp_path / "pm"
        config = self.base_config(poisson_dataset, out)
        config.update(sampler="pmmh", rw_scale=0.1, theta_init="prior")
        assert run_cli(tmp_path, "sample", config) == 0
        assert (out / "chain.csv").exists()

    def test_hmc_reference_requires_lgssm(self, tmp_path, poisson_dataset, capsys):
        config = self.base_config(poisson_dataset, tmp_path / "h")
        config.update(sampler="hmc-reference")
        assert run_cli(tmp_path, "sample", config) == 1
        assert "hmc-reference" in capsys.readouterr().err

    def test_hmc_reference_on_lgssm(self, tmp_path):
        sim_out = tmp_path / "lg"
        sim = {
            "model": "lgssm",
            "d": 1,
            "theta": {"kappa_1": 0.5, "sigma_y": 0.25, "sigma_h": 0.2, "rho": 0.8},
            "T": 12,
            "seed": 9,
            "out_dir": str(sim_out),
        }
        assert run_cli(tmp_path, "simulate", sim, name="sim.json") == 0
        out = tmp_path / "href"
        config = {
            "model": "lgssm",
            "d": 1,
            "dataset": str(sim_out / "dataset.csv"),
            "sampler": "hmc-reference",
            "K": 10,
            "N": 10,
            "L": 3,
            "epsilon": 0.01,
            "seed": 6,
            "theta_init": {"kappa_1": 0.4, "sigma_y": 0.3, "sigma_h": 0.25, "rho": 0.5},
            "out_dir": str(out),
        }
        assert run_cli(tmp_path, "sample", config) == 0
        assert (out / "chain.csv").exists()

    def test_runtime_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,y\n1,0\n2,1e200\n3,0\n")
        out = tmp_path / "rt"
        config = {
            "model": "lgssm",
            "d": 1,
            "dataset": str(bad),
            "sampler": "pmmh",
            "K": 5,
            "N": 10,
            "rw_scale": 0.1,
            "seed": 1,
            "theta_init": {"kappa_1": 0.0, "sigma_y": 0.25, "sigma_h": 0.2, "rho": 0.5},
            "out_dir": str(out),
        }
        assert run_cli(tmp_path, "sample", config) == 2


class TestSweep:
    def test_single_point_epsilon_grid(self, tmp_path, poisson_dataset):
        out = tmp_path / "sw"
        config = {
            "kind": "epsilon_L_grid",
            "model": "poisson",
            "dataset": str(poisson_dataset),
            "grid_epsilon": [0.02],
            "grid_L": [2],
            "chains": 2,
            "K": 8,
            "N": 25,
            "seed": 4,
            "theta_init": {"rho": 0.5, "alpha": 0.3, "sigma_h": 0.3},
            "out_dir": str(out),
        }
        assert run_cli(tmp_path, "sweep", config) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "epsilon,L,median_acceptance,sd_acceptance,chains"
        assert len(lines) == 2

    def test_particles_sweep(self, tmp_path, poisson_dataset):
        out = tmp_path / "swp"
        config = {
            "kind": "particles",
            "model": "poisson",
            "dataset": str(poisson_dataset),
            "grid_N": [20, 35],
            "chains": 2,
            "K": 8,
            "L": 2,
            "epsilon": 0.02,
            "N": 20,
            "seed": 4,
            "theta_init": {"rho": 0.5, "alpha": 0.3, "sigma_h": 0.3},
            "out_dir": str(out),
        }
        assert run_cli(tmp_path, "sweep", config) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "N,median_acceptance,sd_acceptance,chains"
        assert len(lines) == 3

    def test_dimension_sweep(self, tmp_path):
        out = tmp_path / "swd"
        config = {
            "kind": "dimension",
            "grid_d": [2],
            "chains": 2,
            "K": 6,
            "N": 20,
            "T": 10,
            "seed": 4,
            "out_dir": str(out),
        }
        assert run_cli(tmp_path, "sweep", config) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "sampler,d,d_theta,epsilon,L,median_acceptance,sd_acceptance,chains"
        assert len(lines) == 3  # phmc + pmmh rows
        assert (out / "dataset_d2.csv").exists()

    def test_invalid_kind_rejected(self, tmp_path, capsys):
        assert run_cli(tmp_path, "sweep", {"kind": "bogus", "seed": 0}) == 1
        assert "kind" in capsys.readouterr().err

    def test_worker_pool_matches_serial_results(self, tmp_path, poisson_dataset, monkeypatch):
        config = {
            "kind": "particles",
            "model": "poisson",
            "dataset": str(poisson_dataset),
            "grid_N": [15, 25],
            "chains": 2,
            "K": 6,
            "L": 2,
            "epsilon": 0.03,
            "N": 15,
            "seed": 12,
            "theta_init": {"rho": 0.5, "alpha": 0.3, "sigma_h": 0.3},
            "out_dir": str(tmp_path / "serial"),
        }
        assert run_cli(tmp_path, "sweep", config) == 0
        serial = (tmp_path / "serial" / "sweep.csv").read_bytes()
        monkeypatch.setenv("PHMC_WORKERS", "2")
        config["out_dir"] = str(tmp_path / "pooled")
        assert run_cli(tmp_path, "sweep", config, name="cfg_pool.json") == 0
        assert (tmp_path / "pooled" / "sweep.csv").read_bytes() == serial


class TestOverrides:
    def test_set_overrides_top_level_scalars(self, tmp_path):
        out = tmp_path / "ov"
        config = {
            "model": "poisson",
            "theta": {"rho": 0.8, "alpha": 0.5, "sigma_h": 0.2},
            "T": 5,
            "seed": 1,
            "out_dir": str(out),
        }
        code = run_cli(tmp_path, "simulate", config, extra=["--set", "T=9", "--set", "seed=3"])
        assert code == 0
        assert len((out / "dataset.csv").read_text().splitlines()) == 10

    def test_out_flag_overrides_out_dir(self, tmp_path):
        config = {
            "model": "poisson",
            "theta": {"rho": 0.8, "alpha": 0.5, "sigma_h": 0.2},
            "T": 5,
            "seed": 1,
            "out_dir": str(tmp_path / "ignored"),
        }
        target = tmp_path / "redirected"
        assert run_cli(tmp_path, "simulate", config, extra=["--out", str(target)]) == 0
        assert (target / "dataset.csv").exists()
