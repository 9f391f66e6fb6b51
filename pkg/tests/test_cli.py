"""Command-line interface and artifact writing."""

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from rwrelab.env import model_to_dict, benchmark_a
from rwrelab.lab.cli import main


def run_cli(*args):
    return main(list(args))


class TestBasics:
    def test_hypotheses_pass(self, tmp_path):
        rc = run_cli("hypotheses", "--model", "benchmark-A", "--out", str(tmp_path))
        assert rc == 0
        doc = json.loads((tmp_path / "hypotheses" / "summary.json").read_text())
        assert doc["results"]["pass_N"] and doc["results"]["pass_R"]
        assert doc["master_seed"] == 20260810

    def test_hypothesis_failure_blocks_without_force(self, tmp_path):
        rc = run_cli("regen", "--model", "deterministic-e1", "--out", str(tmp_path))
        assert rc == 2

    def test_force_runs_failing_model(self, tmp_path):
        rc = run_cli("estimate", "--model", "deterministic-e1", "--force",
                     "--out", str(tmp_path), "--replicas", "4",
                     "--n-steps", "256", "--confirm", "16")
        assert rc == 0
        doc = json.loads((tmp_path / "estimate" / "summary.json").read_text())
        assert doc["results"]["v_hat"] == [1.0, 0.0]
        assert doc["results"]["d_hat"] == [[0.0, 0.0], [0.0, 0.0]]

    def test_unknown_model_is_config_error(self, tmp_path):
        rc = run_cli("hypotheses", "--model", "no-such-model", "--out", str(tmp_path))
        assert rc == 1

    def test_check_failure_exit_code(self, tmp_path):
        # deterministic e1 pair has slope exactly 1: intersections check fails
        rc = run_cli("intersections", "--model", "deterministic-e1", "--force",
                     "--check", "--out", str(tmp_path), "--replicas", "4")
        assert rc == 2

    def test_path_dump_schema(self, tmp_path):
        rc = run_cli("simulate", "--model", "benchmark-A", "--out", str(tmp_path),
                     "--walks", "2", "--n-steps", "10")
        assert rc == 0
        lines = (tmp_path / "simulate" / "paths.csv").read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "walk,k,x1,x2,level"
        assert (tmp_path / "simulate" / "levels.png").exists()


class TestConfigFile:
    def test_yaml_config_with_overrides(self, tmp_path):
        cfg = {
            "experiment": "green",
            "out_dir": str(tmp_path / "a"),
            "r0": 0,
            "window": 6,
            "master_seed": 9,
        }
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(cfg))
        rc = run_cli("green", "--config", str(path), "--out", str(tmp_path / "b"))
        assert rc == 0
        assert (tmp_path / "b" / "green" / "green.csv").exists()

    def test_bad_yaml_cites_line(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("experiment: green\nn_grid: [1, 2\n")
        assert run_cli("green", "--config", str(path)) == 1

    def test_model_file(self, tmp_path):
        mpath = tmp_path / "model.yaml"
        mpath.write_text(yaml.safe_dump(model_to_dict(benchmark_a())))
        rc = run_cli("hypotheses", "--model", str(mpath), "--out", str(tmp_path))
        assert rc == 0


class TestDeterminism:
    def test_rerun_and_threads_bitwise_identical(self, tmp_path):
        args = ["variance", "--model", "benchmark-A", "--seed", "5"]
        # small but non-trivial run
        common = ["--n-steps", "128"]
        dirs = [tmp_path / n for n in ("one", "two", "four")]
        cfg = {
            "experiment": "variance",
            "n_grid": [16, 32, 64, 128],
            "environments": 16,
            "walks_per_env": 8,
            "master_seed": 5,
        }
        cfgp = tmp_path / "c.yaml"
        cfgp.write_text(yaml.safe_dump(cfg))
        for d, threads in zip(dirs, ("1", "1", "4")):
            rc = run_cli("variance", "--config", str(cfgp), "--out", str(d),
                         "--threads", threads)
            assert rc == 0
        ref_csv = (dirs[0] / "variance" / "variance.csv").read_bytes()
        ref_json = (dirs[0] / "variance" / "summary.json").read_bytes()
        for d in dirs[1:]:
            assert (d / "variance" / "variance.csv").read_bytes() == ref_csv
            assert (d / "variance" / "summary.json").read_bytes() == ref_json

    def test_green_rerun_identical(self, tmp_path):
        for d in ("g1", "g2"):
            assert run_cli("green", "--out", str(tmp_path / d), "--seed", "3") == 0
        a = (tmp_path / "g1" / "green" / "green.csv").read_bytes()
        b = (tmp_path / "g2" / "green" / "green.csv").read_bytes()
        assert a == b


class TestYchainCli:
    def test_transition_table(self, tmp_path):
        rc = run_cli("ychain", "--model", "micro", "--out", str(tmp_path),
                     "--variant", "common-env", "--samples", "200", "--confirm", "16")
        assert rc == 0
        lines = (tmp_path / "ychain" / "steps.csv").read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "variant,x1,x2,y1,y2,attempts,agree"
