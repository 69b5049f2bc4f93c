"""Tests for the batch front-end."""

import json
import os
from unittest.mock import patch

import pytest

from ..gbc_mass.cli import build_parser, main, zoo_table
from ..gbc_mass.models import zoo

LOAD_DOTENV = "lessons.lab_0001_gbc_mass.gbc_mass.settings.load_dotenv"
RUN_MASS = "lessons.lab_0001_gbc_mass.gbc_mass.cli.run_mass"

SCHWARZSCHILD_RUN = """
[model]
name = "schwarzschild"
m = 1.0

[run]
methods = ["coordinate-adm", "coordinate-gbc"]
fit_exponent = 1.0

[ladder]
radii = [25.0, 50.0, 100.0, 200.0]

[quadrature]
nodes_per_angle = 4
"""

THREADED_RUN = """
[model]
name = "schwarzschild"
m = 1.0

[run]
methods = ["coordinate-adm", "lovelock-flux"]
fit_exponent = 1.0

[ladder]
radii = [25.0, 50.0, 100.0, 200.0]

[quadrature]
nodes_per_angle = 4
"""

FLAT_VERIFY = """
[model]
name = "flat-inclusion"
n = 5
d = 6

[run]
q = 2
checks = ["lovelock_trace", "p_contraction", "newton_trace", "gauss_relation"]
sample_points = 3
"""

NEGATIVE_CONTROL = """
[model]
name = "sphere-cap"

[run]
flip_riemann_sign = true
checks = ["gauss_relation"]
sample_points = 4

[ladder]
radii = [0.2, 0.4, 0.6]
"""


@pytest.fixture(autouse=True)
def clean_environment():
    with patch(LOAD_DOTENV), patch.dict(os.environ, {}, clear=True):
        yield


def write_config(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return str(path)


class TestParser:
    """Test the argument parser."""

    def test_subcommands(self):
        """Test that each subcommand parses."""
        parser = build_parser()
        for command in ("mass", "verify", "sweep", "zoo"):
            assert parser.parse_args([command]).command == command

    def test_repeatable_method(self):
        """Test that --method collects several methods."""
        args = build_parser().parse_args(
            ["mass", "--method", "coordinate-adm", "--method", "bulk-identity"]
        )
        assert args.method == ["coordinate-adm", "bulk-identity"]

    def test_unknown_method_rejected(self):
        """Test that argparse rejects methods outside the registry."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["mass", "--method", "magic"])

    def test_flip_only_on_verify(self):
        """Test that the debug flag belongs to verify."""
        args = build_parser().parse_args(["verify", "--flip-riemann-sign"])
        assert args.flip_riemann_sign is True
        with pytest.raises(SystemExit):
            build_parser().parse_args(["mass", "--flip-riemann-sign"])


class TestCommands:
    """Test the subcommands end to end."""

    def test_zoo(self, capsys):
        """Test that every model is listed."""
        assert main(["zoo"]) == 0
        out = capsys.readouterr().out
        for entry in zoo():
            assert entry.name in out
        assert len(zoo_table()) == len(zoo())

    def test_mass_writes_reports(self, tmp_path):
        """Test a two-method Schwarzschild run."""
        config = write_config(tmp_path, SCHWARZSCHILD_RUN)
        out = tmp_path / "reports"
        assert main(["mass", "--config", config, "--out", str(out)]) == 0
        payload = json.loads((out / "schwarzschild_mass_q1.json").read_text())
        assert payload["pass"] is True
        assert [e["method"] for e in payload["estimates"]] == [
            "coordinate-adm",
            "coordinate-gbc",
        ]
        assert payload["estimates"][0]["extrapolated"] == pytest.approx(1.0, abs=1e-4)
        assert (out / "schwarzschild_coordinate-adm_q1.csv").exists()
        assert payload["method"] == "coordinate-adm"
        assert payload["extrapolated"] == payload["estimates"][0]["extrapolated"]

    def test_mass_report_lists_events(self, tmp_path):
        """Test that the recorded run events reach the JSON report."""
        config = write_config(tmp_path, SCHWARZSCHILD_RUN)
        out = tmp_path / "reports"
        assert main(["mass", "--config", config, "--out", str(out)]) == 0
        payload = json.loads((out / "schwarzschild_mass_q1.json").read_text())
        names = [e["event"] for e in payload["events"]]
        assert names.count("flux.radius") == 8
        assert names.count("flux.extrapolated") == 2
        first = payload["events"][0]
        assert first["method"] == "coordinate-adm"
        assert first["rho"] == 25.0

    def test_single_method_flattens_payload(self, tmp_path):
        """Test that a one-method run reports its value at the top level."""
        config = write_config(tmp_path, SCHWARZSCHILD_RUN)
        out = tmp_path / "reports"
        code = main(
            ["mass", "--config", config, "--out", str(out), "--method", "coordinate-adm"]
        )
        assert code == 0
        payload = json.loads((out / "schwarzschild_mass_q1.json").read_text())
        assert payload["method"] == "coordinate-adm"
        assert payload["radii"] == [25.0, 50.0, 100.0, 200.0]
        assert len(payload["fluxes"]) == 4

    def test_verify_flat(self, tmp_path):
        """Test that flat space passes the selected checks."""
        config = write_config(tmp_path, FLAT_VERIFY)
        out = tmp_path / "reports"
        assert main(["verify", "--config", config, "--out", str(out)]) == 0
        payload = json.loads((out / "flat-inclusion_verify_q2.json").read_text())
        assert payload["pass"] is True
        assert "gauss_relation[q=2]" in [r["name"] for r in payload["reports"]]
        checked = [e for e in payload["events"] if e["event"] == "identity.checked"]
        assert [e["name"] for e in checked] == [r["name"] for r in payload["reports"]]

    def test_negative_control_fails(self, tmp_path):
        """Test that the flipped Riemann sign exits with 1."""
        config = write_config(tmp_path, NEGATIVE_CONTROL)
        out = tmp_path / "reports"
        assert main(["verify", "--config", config, "--out", str(out)]) == 1
        payload = json.loads((out / "sphere-cap_verify_q1.json").read_text())
        assert payload["flip_riemann_sign"] is True
        assert payload["pass"] is False

    def test_sweep_writes_table(self, tmp_path):
        """Test a small refinement study."""
        text = SCHWARZSCHILD_RUN + "\n[sweep]\nnodes = [2, 4]\nrungs = [3]\n"
        config = write_config(tmp_path, text)
        out = tmp_path / "reports"
        assert main(["sweep", "--config", config, "--out", str(out)]) == 0
        lines = (out / "schwarzschild_coordinate-adm_sweep_q1.csv").read_text().splitlines()
        assert lines[0].startswith("kind,nodes_per_angle")
        assert len(lines) == 4


class TestExitCodes:
    """Test error mapping."""

    def test_unknown_model(self, tmp_path, capsys):
        """Test that an unknown model is a config error."""
        assert main(["mass", "--model", "nope", "--out", str(tmp_path)]) == 2
        assert "nope" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        """Test that a missing file is a config error."""
        assert main(["mass", "--config", str(tmp_path / "missing.toml")]) == 2

    def test_ineligible_order(self, tmp_path):
        """Test that 2q >= n is rejected before any computation."""
        assert main(["mass", "--model", "flat", "--q", "2", "--out", str(tmp_path)]) == 2

    def test_invalid_environment(self, tmp_path):
        """Test that a bad environment value maps to a config error."""
        with patch.dict(os.environ, {"GBC_CONSTANT_VARIANT": "other"}):
            assert main(["mass", "--model", "flat", "--out", str(tmp_path)]) == 2

    @pytest.mark.parametrize("error", [AssertionError, FloatingPointError])
    def test_numeric_failure(self, tmp_path, capsys, error):
        """Test that a failed internal check or a float trap exits with 3."""
        with patch(RUN_MASS, side_effect=error("overflow in shell 3")):
            code = main(["mass", "--model", "flat", "--out", str(tmp_path)])
        assert code == 3
        assert "overflow in shell 3" in capsys.readouterr().err


class TestDeterminism:
    """Test that reports do not depend on the worker count."""

    @pytest.mark.parametrize("threads", [4, 8])
    def test_mass_payload_independent_of_threads(self, tmp_path, threads):
        """Test that a pooled run writes the same report as a serial one."""
        config = write_config(tmp_path, THREADED_RUN)
        payloads = []
        for count in (1, threads):
            out = tmp_path / f"threads{count}"
            argv = ["mass", "--config", config, "--out", str(out)]
            assert main([*argv, "--threads", str(count)]) == 0
            text = (out / "schwarzschild_mass_q1.json").read_text()
            payloads.append(json.loads(text))
        assert payloads[0] == payloads[1]
