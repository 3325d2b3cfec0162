"""
Tests for the command-line driver: outputs, stdout JSON and exit codes.
"""

import json
from pathlib import Path

import pytest

from core.grid import constant_field, indicator_interval, make_grid
from data.field_store import read_json, save_field
from integration.cli import main


SYSTEMS = Path(__file__).resolve().parent.parent / "systems"
SMALL_GRID = ["--R", "16", "--N", "512"]


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def _run_config(tmp_path, experiments, system=None, name="run.json"):
    return _write(
        tmp_path / name,
        {
            "grid": {"dim": 1, "R": 16, "N": 512},
            "system": system or {"kind": "laplacian", "n": 2, "M": 1},
            "kernel_method": "symbol",
            "experiments": experiments,
            "output_dir": "out",
            "seed": 5,
        },
    )


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


class TestVerify:
    """Tests for the verify subcommand."""

    def test_passing_run(self, tmp_path, capsys):
        """Test exit code 0 with reports next to the config."""
        config = _run_config(tmp_path, ["semigroup", "fatou"])

        code = main(["verify", "--config", str(config)])

        assert code == 0
        assert _stdout_json(capsys)["passed"] is True
        assert read_json(tmp_path / "out" / "semigroup.json")["verdict"] == "PASS"
        assert read_json(tmp_path / "out" / "summary.json")["counts"]["PASS"] == 2

    def test_empty_experiment_list(self, tmp_path, capsys):
        """Test that an explicit empty list succeeds without computing."""
        config = _run_config(tmp_path, [])

        assert main(["verify", "--config", str(config)]) == 0
        assert _stdout_json(capsys)["experiments"] == []

    def test_violated_envelope(self, tmp_path):
        """Test exit code 1 when a metric leaves its envelope."""
        config = _run_config(tmp_path, ["semigroup"])
        envelopes = _write(
            tmp_path / "strict.json",
            {"version": 1, "envelopes": {"semigroup.residual": {"value": 1.0, "kind": "min"}}},
        )

        code = main(["verify", "--config", str(config), "--envelopes", str(envelopes)])

        assert code == 1
        assert read_json(tmp_path / "out" / "semigroup.json")["violations"] == ["semigroup.residual"]

    def test_skipped_experiments_exit_one(self, tmp_path):
        """Test that a failed Legendre-Hadamard gate skips and exits 1."""
        config = _run_config(tmp_path, ["semigroup"], system=str(SYSTEMS / "lame21m3.json"))

        assert main(["verify", "--config", str(config)]) == 1
        assert read_json(tmp_path / "out" / "semigroup.json")["verdict"] == "SKIPPED"

    def test_missing_config(self, tmp_path):
        """Test exit code 2 for a missing config file."""
        assert main(["verify", "--config", str(tmp_path / "absent.json")]) == 2

    def test_missing_envelope_file(self, tmp_path):
        """Test exit code 2 for a missing envelope file."""
        config = _run_config(tmp_path, [])

        assert main(["verify", "--config", str(config), "--envelopes", str(tmp_path / "none.json")]) == 2

    def test_unknown_experiment(self, tmp_path):
        """Test exit code 2 for an experiment outside the suite."""
        config = _run_config(tmp_path, ["teleport"])

        assert main(["verify", "--config", str(config)]) == 2

    def test_summary_is_deterministic(self, tmp_path):
        """Test byte-identical summaries for equal configs."""
        config = _run_config(tmp_path, ["semigroup", "boyd"])

        main(["verify", "--config", str(config), "--output", str(tmp_path / "a")])
        main(["verify", "--config", str(config), "--output", str(tmp_path / "b"), "--jobs", "2"])

        first = (tmp_path / "a" / "summary.json").read_bytes()
        assert first == (tmp_path / "b" / "summary.json").read_bytes()


class TestKernelAndSolve:
    """Tests for the kernel and solve subcommands."""

    def test_kernel_report(self, tmp_path, capsys):
        """Test the explicit harmonic kernel profile and report files."""
        code = main(
            ["kernel", "--system", str(SYSTEMS / "laplacian2.json"), "--method", "explicit", "--output", str(tmp_path)]
            + SMALL_GRID
        )

        assert code == 0
        assert (tmp_path / "kernel_profile.csv").exists()
        assert read_json(tmp_path / "kernel_report.json")["kernel_method"] == "explicit"
        assert _stdout_json(capsys)["normalization_error"] < 0.05

    def test_radial_lame_is_a_construction_failure(self, tmp_path):
        """Test exit code 3 when radial reflection meets a non-radial system."""
        code = main(
            ["kernel", "--system", str(SYSTEMS / "lame211.json"), "--method", "radial", "--output", str(tmp_path)]
            + SMALL_GRID
        )

        assert code == 3

    def test_bad_grid_size(self, tmp_path):
        """Test exit code 2 when N is not a power of two."""
        code = main(["kernel", "--system", str(SYSTEMS / "laplacian2.json"), "--R", "16", "--N", "500"])

        assert code == 2

    def test_missing_system_file(self, tmp_path):
        """Test exit code 2 for a missing system file."""
        assert main(["kernel", "--system", str(tmp_path / "absent.json")]) == 2

    def test_solve_constant(self, tmp_path, capsys):
        """Test that a constant datum gives the same constant above the boundary."""
        code = main(
            [
                "solve",
                "--system",
                str(SYSTEMS / "laplacian2.json"),
                "--constant",
                "2.0",
                "--heights",
                "0.5",
                "1.0",
                "--method",
                "symbol",
                "--output",
                str(tmp_path),
            ]
            + SMALL_GRID
        )

        result = _stdout_json(capsys)
        assert code == 0
        assert result["verdict"] == "PASS"
        assert result["heights"] == [0.5, 1.0]
        assert result["origin_values"] == [pytest.approx([2.0]), pytest.approx([2.0])]
        assert (tmp_path / "solution.csv").exists()

    def test_solve_wrong_constant_length(self, tmp_path):
        """Test exit code 2 when the constant has neither 1 nor M entries."""
        code = main(
            ["solve", "--system", str(SYSTEMS / "lame211.json"), "--constant", "1", "2", "3", "--output", str(tmp_path)]
            + SMALL_GRID
        )

        assert code == 2


class TestSpacesAndMaxop:
    """Tests for the spaces and maxop subcommands."""

    def test_norm_of_indicator(self, tmp_path, capsys):
        """Test ||1_[-1,1)||_2 = sqrt(2)."""
        grid = make_grid(1, 16.0, 512)
        save_field(tmp_path / "f.csv", indicator_interval(grid, -1.0, 1.0))
        spec = _write(tmp_path / "spec.json", {"kind": "lebesgue", "p": 2})

        code = main(["spaces", "norm", "--spec", str(spec), "--field", str(tmp_path / "f.csv")])

        assert code == 0
        assert _stdout_json(capsys)["norm"] == pytest.approx(2.0 ** 0.5)

    def test_boyd_rejects_weighted_specs(self, tmp_path):
        """Test exit code 2 for Boyd indices of a weighted space."""
        spec = _write(
            tmp_path / "spec.json",
            {"kind": "weighted_lebesgue", "p": 2, "weight": {"kind": "power", "gamma": 0.5}},
        )

        assert main(["spaces", "boyd", "--spec", str(spec)]) == 2

    def test_boyd_of_lebesgue(self, tmp_path, capsys):
        """Test p_X = q_X = p for L^p."""
        spec = _write(tmp_path / "spec.json", {"kind": "lebesgue", "p": 3})

        assert main(["spaces", "boyd", "--spec", str(spec)]) == 0
        result = _stdout_json(capsys)
        assert result["p_X"] == pytest.approx(3.0, abs=1e-6)
        assert result["q_X"] == pytest.approx(3.0, abs=1e-6)

    def test_maximal_function_output(self, tmp_path, capsys):
        """Test M c = c and the optional field output."""
        grid = make_grid(1, 16.0, 512)
        save_field(tmp_path / "c.csv", constant_field(grid, [3.0]))

        code = main(["maxop", "maximal", "--field", str(tmp_path / "c.csv"), "--output", str(tmp_path / "m.csv")])

        assert code == 0
        assert _stdout_json(capsys)["max"] == pytest.approx(3.0)
        assert (tmp_path / "m.csv").exists()

    def test_ap_constant_of_constant_weight(self, tmp_path, capsys):
        """Test [c]_{A_2} = 1."""
        grid = make_grid(1, 16.0, 512)
        save_field(tmp_path / "w.csv", constant_field(grid, [2.0]))

        assert main(["maxop", "ap", "--weight", str(tmp_path / "w.csv"), "--p", "2"]) == 0
        assert _stdout_json(capsys)["constant"] == pytest.approx(1.0)
