"""Harness pipeline, sweep bookkeeping, CLI, and determinism tests."""

import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from pwlink.errors import ConfigError
from pwlink.harness import (
    CSV_COLUMNS,
    RunConfig,
    SweepRow,
    dump_constellation,
    dump_regions,
    reach_at_q_threshold,
    run_point,
    sweep_power,
    sweep_reach,
    validate_channel,
    write_config_sidecar,
    write_sweep_csv,
)

# Short two-span link that still exercises fiber, EDFA, and both detectors.
FAST = dict(
    n_spans=2,
    n_test=4096,
    ssfm_step_km=2.0,
    samples_per_symbol=4,
    launch_powers_dbm=(-2.0, 2.0),
    seed=77,
)


class TestRunConfig:
    def test_defaults_valid(self):
        RunConfig()

    def test_n_test_floor(self):
        with pytest.raises(ConfigError):
            RunConfig(n_test=1024)

    def test_bad_detectors(self):
        with pytest.raises(ConfigError):
            RunConfig(detectors=("pw", "svm"))

    def test_reach_must_align_to_spans(self):
        cfg = RunConfig(**FAST)
        with pytest.raises(ConfigError):
            cfg.link(reach_km=120.0)
        assert cfg.link(reach_km=160.0).n_spans == 2


class TestRunPoint:
    def test_transparent_channel_is_error_free(self):
        cfg = RunConfig(**{**FAST, "gamma_per_w_km": 0.0, "ase_enabled": False})
        res = run_point(cfg, -2.0)
        assert res.reports["med"].ber == 0.0
        assert res.reports["pw"].ber == 0.0

    def test_same_seed_bit_identical(self):
        cfg = RunConfig(**FAST)
        a = run_point(cfg, 2.0, replicate=1)
        b = run_point(cfg, 2.0, replicate=1)
        for det in ("pw", "med"):
            assert a.reports[det].n_bit_errors == b.reports[det].n_bit_errors
        assert a.radii == b.radii

    def test_dm_and_dum_differ(self):
        # Deep nonlinear regime so the short link still produces errors.
        cfg = RunConfig(**FAST)
        dum = run_point(cfg, 8.0)
        dm = run_point(RunConfig(**{**FAST, "dispersion_managed": True}), 8.0)
        assert dum.reports["med"].n_bit_errors > 0
        assert dm.reports["med"].n_bit_errors != dum.reports["med"].n_bit_errors


class TestSweeps:
    def test_power_sweep_rows(self):
        cfg = RunConfig(**FAST)
        rows = sweep_power(cfg)
        assert len(rows) == 2 * 2  # two powers, two detectors
        assert {r.detector for r in rows} == {"pw", "med"}
        assert all(r.mode == "power" for r in rows)
        med = [r for r in rows if r.detector == "med"]
        assert [r.power_dbm for r in med] == [-2.0, 2.0]
        for r in rows:
            assert (r.radius is None) == (r.detector == "med")

    def test_reach_sweep_rows_and_bookkeeping(self):
        cfg = RunConfig(
            **{**FAST, "launch_powers_dbm": (0.0,), "reaches_km": (160.0, 320.0, 480.0)}
        )
        rows = sweep_reach(cfg)
        assert len(rows) == 3 * 2
        assert sorted({r.reach_km for r in rows}) == [160.0, 320.0, 480.0]

    def test_reach_sweep_requires_single_power(self):
        cfg = RunConfig(**{**FAST, "reaches_km": (160.0,)})
        with pytest.raises(ConfigError):
            sweep_reach(cfg)

    def test_reach_grid_bookkeeping_28_rows(self):
        # A 14-point reach grid yields 14 x 2 detector rows.
        cfg = RunConfig(
            n_spans=1,
            span_length_km=10.0,
            gamma_per_w_km=0.0,
            ase_enabled=False,
            n_test=4096,
            ssfm_step_km=5.0,
            samples_per_symbol=4,
            launch_powers_dbm=(0.0,),
            reaches_km=tuple(float(r) for r in range(10, 141, 10)),
            seed=5,
        )
        rows = sweep_reach(cfg)
        assert len(rows) == 28

    def test_empty_grids_rejected(self):
        with pytest.raises(ConfigError):
            sweep_power(RunConfig(**{**FAST, "launch_powers_dbm": ()}))
        with pytest.raises(ConfigError):
            sweep_reach(RunConfig(**{**FAST, "launch_powers_dbm": (0.0,)}))


class TestReachThreshold:
    def _rows(self, reaches, qs):
        return [
            SweepRow("reach", 10.0, True, r, -4.0, "med", 0.0, 0.0, q, 4096, 1, None)
            for r, q in zip(reaches, qs)
        ]

    def test_log_linear_interpolation(self):
        rows = self._rows([800.0, 880.0], [11.0, 9.0])
        reach = reach_at_q_threshold(rows, "med", 10.0)
        expected = np.exp(
            np.log(800) + (10 - 11) * (np.log(880) - np.log(800)) / (9 - 11)
        )
        assert reach == pytest.approx(expected)

    def test_unbracketed_returns_none(self):
        assert reach_at_q_threshold(self._rows([800, 880], [12, 11]), "med") is None
        assert reach_at_q_threshold(self._rows([800, 880], [9, 8]), "med") is None


class TestOutputs:
    def test_csv_roundtrip(self, tmp_path):
        cfg = RunConfig(**FAST)
        rows = sweep_power(cfg)
        path = tmp_path / "sweep.csv"
        write_sweep_csv(rows, path)
        sidecar = write_config_sidecar(cfg, path)
        with open(path) as f:
            parsed = list(csv.DictReader(f))
        assert list(parsed[0].keys()) == CSV_COLUMNS
        assert len(parsed) == len(rows)
        assert float(parsed[0]["q_db"]) == rows[0].q_db
        with open(sidecar) as f:
            assert json.load(f)["seed"] == 77

    def test_dump_constellation(self, tmp_path):
        cfg = RunConfig(**FAST)
        path = tmp_path / "const.csv"
        dump_constellation(cfg, 0.0, path)
        with open(path) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == cfg.n_test  # one row per symbol, both polarizations
        assert set(rows[0]) == {"index", "re_x", "im_x", "re_y", "im_y", "label_x", "label_y"}

    def test_dump_regions(self, tmp_path):
        cfg = RunConfig(**FAST)
        path = tmp_path / "regions.csv"
        dump_regions(cfg, 0.0, path, n_cells=16)
        with open(path) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 16 * 16
        labels = {int(r["label"]) for r in rows}
        assert labels <= set(range(16))


class TestDeterminism:
    def test_point_independence_under_grid_permutation(self):
        # Permuting the grid permutes rows; each row's values are unchanged.
        base = RunConfig(**FAST)
        perm = RunConfig(**{**FAST, "launch_powers_dbm": (2.0, -2.0)})
        rows_a = {(r.power_dbm, r.detector): r for r in sweep_power(base)}
        rows_b = {(r.power_dbm, r.detector): r for r in sweep_power(perm)}
        assert rows_a.keys() == rows_b.keys()
        for key, row in rows_a.items():
            assert rows_b[key].ber == row.ber
            assert rows_b[key].q_db == row.q_db
            assert rows_b[key].radius == row.radius

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        cfg1 = RunConfig(**FAST)
        cfg2 = RunConfig(**{**FAST, "workers": 2})
        p1, p2 = tmp_path / "w1.csv", tmp_path / "w2.csv"
        write_sweep_csv(sweep_power(cfg1), p1)
        write_sweep_csv(sweep_power(cfg2), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestValidateChannel:
    def test_all_checks_pass(self):
        ok, checks = validate_channel()
        assert ok, checks
        names = [c[0] for c in checks]
        assert names == [
            "dispersion_inverse_pair",
            "cw_spm_phase",
            "lossless_energy_conservation",
            "step_halving_field",
            "ase_variance",
        ]


class TestCli:
    def _run(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "pwlink.cli", *args],
            capture_output=True,
            text=True,
        )

    def test_validate_channel_exit_code(self, tmp_path):
        out = self._run("validate-channel", "--out", str(tmp_path))
        assert out.returncode == 0
        assert out.stdout.count("[PASS]") == 5

    def test_sweep_power_cli_with_config(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text(
            "# fast functional config\n"
            "n_spans = 2\n"
            "n_test = 4096\n"
            "ssfm_step_km = 2.0\n"
            "samples_per_symbol = 4\n"
            "launch_powers_dbm = -2, 2\n"
            "seed = 7\n"
        )
        out = self._run(
            "sweep-power", "--config", str(config), "--out", str(tmp_path), "--workers", "1"
        )
        assert out.returncode == 0, out.stderr
        csv_path = tmp_path / "sweep_power.csv"
        assert csv_path.exists()
        assert (tmp_path / "sweep_power.csv.config.json").exists()
        with open(csv_path) as f:
            assert len(list(csv.DictReader(f))) == 4

    def test_bad_config_key_fails(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("no_such_key = 3\n")
        out = self._run("sweep-power", "--config", str(config), "--out", str(tmp_path))
        assert out.returncode == 2
        assert "unknown config key" in out.stderr
