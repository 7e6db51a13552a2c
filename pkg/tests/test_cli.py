import json
import re
import subprocess
import sys

import numpy as np
import pytest

from mfkernels import cli
from mfkernels import fileio
from mfkernels.measures import DiscreteMeasure, ParticleConfiguration, dirac
from mfkernels.particles import Variance, make_dataset


@pytest.fixture
def workdir(tmp_path, rng):
    fileio.save_measure(DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5]), tmp_path / "mu.json")
    fileio.save_measure(dirac(0.5), tmp_path / "nu.json")
    (tmp_path / "kernel.json").write_text(json.dumps({
        "family": "pullback",
        "base": {"kind": "gaussian", "gamma": 0.5},
        "feature_map": {"kind": "mean"},
    }))
    configs = [ParticleConfiguration(rng.uniform(size=(6, 1))) for _ in range(8)]
    ds = make_dataset(configs, Variance())
    fileio.save_dataset(ds, tmp_path / "data.jsonl")
    return tmp_path


def run_cli(args, capsys):
    code = cli.main([str(a) for a in args])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestW1Command:
    def test_prints_twelve_decimals(self, workdir, capsys):
        code, out, _ = run_cli(
            ["w1", "--mu", workdir / "mu.json", "--nu", workdir / "mu.json",
             "--metric", "euclidean"], capsys)
        assert code == 0
        assert out.strip() == "0.000000000000"

    def test_half_split(self, workdir, capsys):
        code, out, _ = run_cli(
            ["w1", "--mu", workdir / "mu.json", "--nu", workdir / "nu.json"], capsys)
        assert code == 0
        assert out.strip() == "0.500000000000"

    def test_kernel_metric_flag(self, workdir, capsys):
        code, out, _ = run_cli(
            ["w1", "--mu", workdir / "mu.json", "--nu", workdir / "nu.json",
             "--metric", "kernel:gaussian:0.5"], capsys)
        assert code == 0
        assert 0.0 < float(out) < 1.5

    def test_plan_dump(self, workdir, capsys):
        plan_path = workdir / "plan.csv"
        code, _, _ = run_cli(
            ["w1", "--mu", workdir / "mu.json", "--nu", workdir / "nu.json",
             "--plan", plan_path], capsys)
        assert code == 0
        plan = np.loadtxt(plan_path, delimiter=",", ndmin=2)
        np.testing.assert_allclose(plan.sum(axis=1), [0.5, 0.5], atol=1e-9)

    def test_sinkhorn_not_converged_exit_2(self, workdir, rng, capsys):
        fileio.save_measure(
            DiscreteMeasure(rng.uniform(size=(8, 1)), np.full(8, 1 / 8)),
            workdir / "a.json")
        fileio.save_measure(
            DiscreteMeasure(rng.uniform(size=(8, 1)), np.full(8, 1 / 8)),
            workdir / "b.json")
        code, out, err = run_cli(
            ["w1", "--mu", workdir / "a.json", "--nu", workdir / "b.json",
             "--solver", "sinkhorn", "--eps", "0.001", "--max-iters", "1"], capsys)
        assert code == 2
        assert "NOT_CONVERGED" in err
        assert out.strip()  # the flagged value is still reported

    def test_unknown_metric_is_usage_error(self, workdir, capsys):
        code, _, err = run_cli(
            ["w1", "--mu", workdir / "mu.json", "--nu", workdir / "nu.json",
             "--metric", "hamming"], capsys)
        assert code == 1
        assert "USAGE" in err


class TestErrorMapping:
    def test_malformed_config_exit_1(self, workdir, capsys):
        bad = workdir / "bad.json"
        bad.write_text('{"broken')
        code, _, err = run_cli(["converge", "--config", bad], capsys)
        assert code == 1
        assert "CONFIG_PARSE" in err

    def test_unknown_keys_rejected(self, workdir, capsys):
        cfg = workdir / "cfg.json"
        cfg.write_text(json.dumps({
            "kernel": {"family": "pullback", "base": {"kind": "gaussian", "gamma": 0.5}},
            "mu": {"kind": "uniform_box", "lower": [0.0], "upper": [1.0]},
            "nu": {"kind": "uniform_box", "lower": [0.0], "upper": [1.0]},
            "m_grid": [4, 8], "seeds": {"count": 8}, "surprise": 1,
        }))
        code, _, err = run_cli(["converge", "--config", cfg], capsys)
        assert code == 1
        assert "CONFIG_PARSE" in err

    def test_unknown_limit_exit_1(self, workdir, capsys):
        cfg = workdir / "ul.json"
        cfg.write_text(json.dumps({
            "kernel": {"family": "double_sum",
                       "base": {"kind": "table", "grid": [[0.0], [1.0]],
                                "values": [[1.0, 1.0], [1.0, 1.0]]}},
            "mu": {"kind": "uniform_box", "lower": [0.0], "upper": [1.0]},
            "nu": {"kind": "uniform_box", "lower": [0.0], "upper": [1.0]},
            "m_grid": [4, 8], "seeds": {"count": 8},
        }))
        code, _, err = run_cli(["converge", "--config", cfg], capsys)
        assert code == 1
        assert "UNKNOWN_LIMIT" in err

    def test_missing_file_exit_1(self, workdir, capsys):
        code, _, err = run_cli(
            ["w1", "--mu", workdir / "nope.json", "--nu", workdir / "nu.json"], capsys)
        assert code in (1, 2)
        assert "error" in err.lower()

    def test_bad_flag_usage_error(self, capsys):
        code, _, err = run_cli(["w1", "--bogus", "x"], capsys)
        assert code == 1
        assert "USAGE" in err


class TestPipelineCommands:
    def test_fit_predict_flow(self, workdir, capsys):
        model = workdir / "model.json"
        code, _, _ = run_cli(
            ["fit", "--kernel", workdir / "kernel.json", "--data",
             workdir / "data.jsonl", "--lambda", "1e-6", "--out", model], capsys)
        assert code == 0
        code, out, _ = run_cli(
            ["predict", "--model", model, "--data", workdir / "data.jsonl"], capsys)
        assert code == 0
        preds = [float(v) for v in out.split()]
        labels = fileio.load_dataset(workdir / "data.jsonl").labels()
        assert np.max(np.abs(np.array(preds) - labels)) < 0.2

    def test_gram_output_square(self, workdir, capsys):
        code, out, _ = run_cli(
            ["gram", "--kernel", workdir / "kernel.json", "--centers",
             workdir / "data.jsonl"], capsys)
        assert code == 0
        rows = [r for r in out.splitlines() if r]
        assert len(rows) == 8 and len(rows[0].split(",")) == 8

    def test_kernel_eval(self, workdir, capsys):
        code, out, _ = run_cli(
            ["kernel", "eval", "--kernel", workdir / "kernel.json",
             "--mu", workdir / "mu.json", "--nu", workdir / "nu.json"], capsys)
        assert code == 0
        assert out.strip() == "1.000000000000"  # equal means

    def test_mmd_inline_base(self, workdir, capsys):
        code, out, _ = run_cli(
            ["mmd", "--base", "gaussian:0.5", "--mu", workdir / "mu.json",
             "--nu", workdir / "nu.json"], capsys)
        assert code == 0
        assert 0.0 < float(out) < 1.0

    def test_simulate_then_label(self, workdir, capsys):
        cfg = workdir / "sim.json"
        cfg.write_text(json.dumps({
            "dynamics": {"kind": "pure_diffusion",
                         "box": {"lower": [0.0], "upper": [1.0]},
                         "sigma": 0.4, "dt": 0.05},
            "m": 5, "steps": 10, "seed": 2, "stride": 5,
        }))
        traj = workdir / "traj.jsonl"
        code, _, _ = run_cli(["simulate", "--config", cfg, "--out", traj], capsys)
        assert code == 0
        obs = workdir / "obs.json"
        obs.write_text(json.dumps({"kind": "variance"}))
        labeled = workdir / "labeled.jsonl"
        code, _, _ = run_cli(
            ["label", "--data", traj, "--observable", obs, "--out", labeled], capsys)
        assert code == 0
        assert len(fileio.load_dataset(labeled)) == 3

    def test_mcshane_check_small(self, workdir, capsys):
        cfg = workdir / "mc.json"
        cfg.write_text(json.dumps({
            "kernel": json.loads((workdir / "kernel.json").read_text()),
            "m": 4, "n_pairs": 2, "seed": 1, "n_decoys": 3,
        }))
        code, out, _ = run_cli(["mcshane-check", "--config", cfg], capsys)
        assert code == 0
        assert float(out) <= 1e-12

    def test_modulus_json_output(self, workdir, capsys):
        cfg = workdir / "mod.json"
        cfg.write_text(json.dumps({
            "kernel": json.loads((workdir / "kernel.json").read_text()),
            "m": 4, "sampler": {"kind": "uniform_box", "lower": [0.0], "upper": [1.0]},
            "trials": 10, "seed": 1,
        }))
        out_file = workdir / "mod_out.json"
        code, _, _ = run_cli(
            ["modulus", "--config", cfg, "--out", out_file], capsys)
        assert code == 0
        obj = json.loads(out_file.read_text())
        assert obj["kind"] == "modulus_estimate" and len(obj["samples"]) == 10


class TestVersionAndProvenance:
    def test_version_nonempty_semver(self, capsys):
        code, out, _ = run_cli(["--version"], capsys)
        assert code == 0
        assert re.match(r"mfkernels \d+\.\d+\.\d+", out)

    def test_version_stable(self, capsys):
        _, out1, _ = run_cli(["--version"], capsys)
        _, out2, _ = run_cli(["--version"], capsys)
        assert out1 == out2

    def test_config_hash_matches_report(self, workdir, capsys):
        cfg = workdir / "conv.json"
        cfg.write_text(json.dumps({
            "kernel": json.loads((workdir / "kernel.json").read_text()),
            "mu": {"kind": "uniform_box", "lower": [0.0], "upper": [0.4]},
            "nu": {"kind": "uniform_box", "lower": [0.6], "upper": [1.0]},
            "m_grid": [4, 8], "seeds": {"count": 8},
        }))
        rep = workdir / "rep.json"
        code, _, _ = run_cli(
            ["--threads", "1", "converge", "--config", cfg, "--out", rep], capsys)
        assert code == 0
        code, out, _ = run_cli(["--version", "--config", cfg], capsys)
        assert code == 0
        printed = re.search(r"config_hash (\w+)", out).group(1)
        assert json.loads(rep.read_text())["config_hash"] == printed

    def test_console_script_installed(self):
        res = subprocess.run([sys.executable, "-m", "mfkernels.cli", "--version"],
                             capture_output=True, text=True)
        assert res.returncode == 0 and "mfkernels" in res.stdout


class TestHelpConsistency:
    def _iter_subparsers(self, parser):
        for action in parser._actions:
            if isinstance(action, type(parser._subparsers._group_actions[0])):
                for name, sub in action.choices.items():
                    yield name, sub

    def test_every_flag_documented_and_no_ghosts(self):
        parser = cli.build_parser()
        stack = [("mfkernels", parser)]
        seen = 0
        while stack:
            name, p = stack.pop()
            help_text = p.format_help()
            declared = set()
            for action in p._actions:
                for opt in action.option_strings:
                    declared.add(opt)
                    assert opt in help_text, f"{name}: {opt} missing from --help"
            # ghost scan over the flag listing only (the prose description
            # may legitimately mention other commands' flags)
            options_text = help_text[help_text.find("options:"):]
            for token in re.findall(r"(?<![\w-])--[a-z][a-z-]*", options_text):
                assert token in declared, f"{name}: {token} documented but not declared"
            seen += 1
            if p._subparsers:
                for action in p._subparsers._group_actions:
                    for sub_name, sub in action.choices.items():
                        stack.append((f"{name} {sub_name}", sub))
        assert seen >= 14  # root + 13 subcommands + nested kernel eval
