import json
import math
import subprocess
import sys

import pytest

from ham_levy.cli import main, parse_config
from ham_levy.errors import ConflictError, SchemaError
from ham_levy.theory import CovarianceModel, sigma_limit


@pytest.fixture
def minimal(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({
        "command": "simulate",
        "law": {"family": "symmetric-two-point", "a": 1, "lambda": 1},
        "targets": {"t": 1, "R": 5},
        "mc": {"paths": 1000, "seed": 42},
    }))
    return path


class TestParse:
    def test_minimal_file(self, minimal):
        cfg = parse_config(minimal)
        assert cfg.command == "simulate"
        assert cfg.targets["t"] == [1.0] and cfg.targets["R"] == [5.0]
        assert cfg.mc["paths"] == 1000 and cfg.mc["seed"] == 42
        assert cfg.mc["threads"] >= 1
        assert cfg.output == {"directory": "ham_levy_out", "formats": ["csv", "json"]}
        assert cfg.law == {"family": "symmetric-two-point", "a": 1.0, "lambda": 1.0}

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"command": "moments", "law": {"family": "symmetric-two-point", "lamda": 1}}))
        with pytest.raises(SchemaError, match="lamda") as info:
            parse_config(path)
        assert info.value.path == ("law", "lamda")

    def test_flag_precedence(self, minimal):
        assert parse_config(minimal, flags={"paths": 10}).mc["paths"] == 10
        assert parse_config(minimal, dotted={("mc", "paths"): 10}).mc["paths"] == 10

    def test_conflicts(self, minimal):
        with pytest.raises(ConflictError):
            parse_config(minimal, command="variance")
        with pytest.raises(ConflictError):
            parse_config(minimal, flags={"paths": 10}, dotted={("mc", "paths"): 11})

    def test_paths_required(self):
        with pytest.raises(SchemaError, match="paths"):
            parse_config(command="clt")

    def test_family_defaults_echoed(self):
        cfg = parse_config(command="moments", dotted={("law",): {"family": "power-density", "eps": 0.1}})
        assert set(cfg.law) == {"family", "c1", "exp_a", "c2", "exp_b", "eps"}

    def test_non_positive_target(self):
        with pytest.raises(SchemaError):
            parse_config(command="covariance", flags={"t": [0.0]})


class TestExecute:
    def test_covariance_json(self, tmp_path):
        code = main(["covariance", "--t", "1", "--m2", "1", "--out", str(tmp_path)])
        assert code == 0
        res = json.loads((tmp_path / "covariance.json").read_text())["results"]
        assert res["second_moment"] == pytest.approx(math.cosh(1 / math.sqrt(2)), rel=1e-15)
        assert res["sigma_tt"] == sigma_limit(CovarianceModel(1.0), 1.0, 1.0)

    def test_derivatives(self, tmp_path):
        code = main(["derivatives", "--seed", "1", "--cases", "1000", "--out", str(tmp_path)])
        assert code == 0
        res = json.loads((tmp_path / "derivatives.json").read_text())["results"]
        assert res["max_one_residual"] <= 1e-12 and res["max_two_residual"] <= 1e-12
        assert res["max_outside_value"] == 0.0 and res["max_half_residual"] == 0.0

    def test_clt_without_paths(self, tmp_path, capsys):
        assert main(["clt", "--out", str(tmp_path)]) == 1
        assert "mc.paths" in capsys.readouterr().err

    def test_execution_error_recorded(self, tmp_path):
        code = main(["covariance", "--out", str(tmp_path), "--law.family", "discrete", "--law.atoms", "[[1, 1]]", "--t", "1"])
        assert code == 0  # m2 is finite; centring is irrelevant for covariance tables
        code = main(["simulate", "--paths", "5", "--out", str(tmp_path), "--law.family", "discrete", "--law.atoms", "[[1, 1]]"])
        assert code == 1
        err = json.loads((tmp_path / "simulate.json").read_text())["error"]
        assert err["code"] == "non_centered_law"

    def test_gate_exit_code(self, tmp_path):
        # with two Monte Carlo samples the gate may go either way; the exit code must mirror it
        code = main(["chaos", "--samples", "2", "--gate", "--out", str(tmp_path)])
        data = json.loads((tmp_path / "chaos.json").read_text())
        assert code == data["exit_code"] == (0 if data["gate"]["passed"] else 2)
        assert main(["chaos", "--samples", "2", "--out", str(tmp_path)]) == 0

    @pytest.mark.parametrize("command", ["moments", "chaos", "bounds"])
    def test_other_commands(self, tmp_path, command):
        assert main([command, "--samples", "20000", "--out", str(tmp_path)]) == 0
        assert (tmp_path / f"{command}.csv").read_bytes().count(b"\r\n") >= 2


@pytest.mark.parametrize("command", ["simulate", "variance", "clt"])
def test_byte_identical_rerun(tmp_path, command):
    outs = []
    for threads in (1, 3, 1):
        out = tmp_path / f"o{len(outs)}"
        args = [command, "--paths", "400", "--seed", "5", "--threads", str(threads), "--t", "1", "2", "--R", "2", "4", "--out", str(out)]
        assert main(args) in (0, 2)
        outs.append((out / f"{command}.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_module_entry(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "ham_levy", "covariance", "--t", "2", "--s", "1", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "covariance.csv").exists()
