import numpy as np
import pytest
from click.testing import CliRunner

from llap import load_field
from llap.cli import (
    EXIT_CERTIFICATE,
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_NO_CONVERGENCE,
    main,
)
from test_config import REFERENCE

RAW_GAUSSIAN = REFERENCE.replace(
    "family = difference\nwidth1 = 1.0\nwidth2 = 2.0\namplitude = 1.0",
    "family = gaussian\nwidth = 1.0\namplitude = 1.0",
)


@pytest.fixture()
def runner():
    return CliRunner()


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestCertifyCommand:
    def test_pass_exit_zero(self, runner, tmp_path):
        cfg = _write(tmp_path, REFERENCE)
        result = runner.invoke(main, ["certify", cfg, "-o", str(tmp_path / "out")])
        assert result.exit_code == 0
        text = (tmp_path / "out" / "certificate.txt").read_text()
        assert "passed = true" in text
        assert "q = " in text

    def test_failing_certificate_exit_code(self, runner, tmp_path):
        cfg = _write(tmp_path, RAW_GAUSSIAN)
        result = runner.invoke(main, ["certify", cfg, "-o", str(tmp_path / "out")])
        assert result.exit_code == EXIT_CERTIFICATE
        text = (tmp_path / "out" / "certificate.txt").read_text()
        assert "passed = false" in text
        assert "divergence_indicator" in text

    def test_parse_error_exit_code(self, runner, tmp_path):
        cfg = _write(tmp_path, "[grid]\nd = 1\nmystery = 3\n")
        result = runner.invoke(main, ["certify", cfg])
        assert result.exit_code == EXIT_CONFIG
        assert "line 3" in result.output

    def test_precondition_violation_exit_code(self, runner, tmp_path):
        cfg = _write(tmp_path, REFERENCE.replace("n = 1024", "n = 1023"))
        result = runner.invoke(main, ["certify", cfg])
        assert result.exit_code == EXIT_CONFIG
        assert "even" in result.output


class TestSolveCommand:
    def test_reference_solve(self, runner, tmp_path):
        cfg = _write(tmp_path, REFERENCE.replace("seed = 0", "seed = 0\ndump_field = true"))
        out = tmp_path / "out"
        result = runner.invoke(main, ["solve", cfg, "-o", str(out)])
        assert result.exit_code == 0
        assert "converged" in result.output
        csv = (out / "iterations.csv").read_text().splitlines()
        assert csv[0] == "k,update_norm,ratio,apriori_bound"
        assert len(csv) >= 10
        summary = (out / "solve_summary.txt").read_text()
        assert "converged = true" in summary
        field = load_field(out / "field.llap")
        assert field.grid.n == 1024
        assert np.linalg.norm(field.values) > 0

    def test_refuses_failing_certificate(self, runner, tmp_path):
        cfg = _write(tmp_path, RAW_GAUSSIAN)
        result = runner.invoke(main, ["solve", cfg, "-o", str(tmp_path / "out")])
        assert result.exit_code == EXIT_CERTIFICATE
        assert "refused" in result.output

    def test_nonconvergence_exit_code(self, runner, tmp_path):
        cfg = _write(tmp_path, REFERENCE.replace("max_iter = 200", "max_iter = 1"))
        result = runner.invoke(main, ["solve", cfg, "-o", str(tmp_path / "out")])
        assert result.exit_code == EXIT_NO_CONVERGENCE
        assert "NOT converged" in result.output

    def test_deterministic_tables(self, runner, tmp_path):
        cfg = _write(tmp_path, REFERENCE)
        runner.invoke(main, ["solve", cfg, "-o", str(tmp_path / "a")])
        runner.invoke(main, ["solve", cfg, "-o", str(tmp_path / "b")])
        assert (tmp_path / "a" / "iterations.csv").read_bytes() == (
            tmp_path / "b" / "iterations.csv"
        ).read_bytes()
        assert (tmp_path / "a" / "solve_summary.txt").read_bytes() == (
            tmp_path / "b" / "solve_summary.txt"
        ).read_bytes()


class TestSequenceCommand:
    def test_sequence_outputs(self, runner, tmp_path):
        cfg = _write(tmp_path, REFERENCE)
        out = tmp_path / "out"
        result = runner.invoke(main, ["sequence", cfg, "-o", str(out)])
        assert result.exit_code == 0
        rows = (out / "sequence_rows.csv").read_text().splitlines()
        assert rows[0] == "m,l1_dist,wl1_dist,ratio_dist,gain,q,sol_dist,bound_rhs,bound_ok"
        assert len(rows) == 7
        assert all(line.endswith("true") for line in rows[1:])
        lemma = (out / "lemma_checks.csv").read_text().splitlines()
        assert len(lemma) == 7
        summary = (out / "sequence_summary.txt").read_text()
        assert "lemma_passed = true" in summary

    def test_member_failure_exit_code(self, runner, tmp_path):
        cfg = _write(tmp_path, REFERENCE.replace("l = 0.1", "l = 1.0"))
        result = runner.invoke(main, ["sequence", cfg, "-o", str(tmp_path / "out")])
        assert result.exit_code == EXIT_CERTIFICATE


class TestVerifyCommand:
    def test_reference_all_pass(self, runner, tmp_path):
        cfg = _write(tmp_path, REFERENCE)
        out = tmp_path / "out"
        result = runner.invoke(main, ["verify", cfg, "-o", str(out)])
        assert result.exit_code == 0
        assert "FAIL" not in result.output
        report = (out / "verify_report.csv").read_text().splitlines()
        assert report[0] == "check,passed,value,detail"
        assert all(",true," in line for line in report[1:])

    def test_raw_gaussian_negative_control_passes(self, runner, tmp_path):
        # The dichotomy check must recognize the divergence as the expected
        # behaviour of an inadmissible kernel.
        cfg = _write(tmp_path, RAW_GAUSSIAN)
        result = runner.invoke(main, ["verify", cfg, "-o", str(tmp_path / "out")])
        assert result.exit_code == 0
        assert "na_dichotomy" in result.output

    def test_zero_kernel_degenerate_cases(self, runner, tmp_path):
        cfg = _write(
            tmp_path, RAW_GAUSSIAN.replace("amplitude = 1.0", "amplitude = 0.0")
        )
        result = runner.invoke(main, ["verify", cfg, "-o", str(tmp_path / "out")])
        assert result.exit_code == 0


class TestFtSelftest:
    def test_default_grid(self, runner, tmp_path):
        result = runner.invoke(main, ["ft-selftest", "-o", str(tmp_path / "out")])
        assert result.exit_code == 0
        assert "ft_roundtrip" in result.output

    def test_with_config(self, runner, tmp_path):
        cfg = _write(tmp_path, REFERENCE)
        result = runner.invoke(main, ["ft-selftest", cfg, "-o", str(tmp_path / "out")])
        assert result.exit_code == 0


class TestExitCodeContract:
    def test_codes_are_distinct(self):
        codes = {EXIT_CONFIG, EXIT_CERTIFICATE, EXIT_NO_CONVERGENCE, EXIT_CHECK_FAILED}
        assert len(codes) == 4
        assert 0 not in codes
