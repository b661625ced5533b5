import pytest

from apps.core.exceptions import ArgumentError
from apps.core.renderers import parse_document
from apps.oracle.verification import Check, run_verification, write_reports


class TestRunVerification:
    @pytest.mark.parametrize("check", Check.values)
    def test_every_check_passes(self, check):
        reports = run_verification(check, range(3))
        assert reports
        assert all(r["pass"] for r in reports)
        assert {r["seed"] for r in reports} == {0, 1, 2}

    def test_lambda_grid(self):
        reports = run_verification("prop1", [0], lambdas=(0.1, 1.0, 10.0))
        assert [r["lambda"] for r in reports] == [0.1, 1.0, 10.0]
        assert all("sigmoid_tv_gap" in r for r in reports)

    def test_unknown_check(self):
        with pytest.raises(ArgumentError):
            run_verification("prop3", [0])

    def test_reports_are_lines(self, tmp_path):
        reports = run_verification("prop2", [0, 1])
        path = tmp_path / "reports.ndjson"
        write_reports(path, reports)
        lines = path.read_bytes().splitlines()
        assert len(lines) == len(reports)
        first = parse_document(lines[0])
        assert first["check"] == "prop2"
        assert first["pass"] is True


class TestJvpCheck:
    def test_random_architectures_within_relative_tolerance(self):
        reports = run_verification("jvp", range(200))
        assert len(reports) == 200
        worst = max(r["relative_error"] for r in reports)
        assert worst <= 1e-4
        assert {len(r["sizes"]) - 1 for r in reports} == {1, 2, 3, 4}
        assert max(max(r["sizes"]) for r in reports) > 16
