import json
import math

import numpy as np
import pytest

from qsat.bench import CSV_COLUMNS
from qsat.cli import main
from qsat.qaoa import QaoaAngles, QaoaKsatProblem, SolverOptions, p1_exact, qaoa_exponent
from qsat.sat import is_satisfiable, sample_instance
from qsat.simulator import TrainConfig, optimize_angles


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestExponent:
    def test_gamma_zero_threshold(self, capsys):
        code, out, _ = run(capsys, "exponent", "--k", "8", "--p", "1", "--threshold", "--beta", "0.3", "--gamma", "0")
        assert code == 0
        record = json.loads(out)
        assert record["exponent_ln"]["re"] == pytest.approx(-0.68961, abs=1e-5)
        assert record["exponent_ln"]["re"] == pytest.approx(-(2.0**-8) * 176.54, rel=1e-10)
        assert record["exponent_log2"] == pytest.approx(record["exponent_ln"]["re"] / math.log(2), rel=1e-12)
        assert set(record) >= {"k", "p", "r", "beta", "gamma", "iterations", "residual"}

    def test_k_not_power_of_two(self, capsys):
        code, _, err = run(capsys, "exponent", "--k", "3", "--r", "4.0", "--beta", "0.1", "--gamma", "0.1")
        assert code == 1 and "error" in err

    def test_matches_library_byte_for_byte(self, capsys):
        code, out, _ = run(capsys, "exponent", "--k", "2", "--p", "1", "--r", "1.5", "--beta", "0.2", "--gamma", "-0.15")
        problem = QaoaKsatProblem(2, 1.5, QaoaAngles([0.2], [-0.15]))
        expected = json.dumps(qaoa_exponent(problem, SolverOptions(eps=1e-10, max_iter=1000)).to_record(problem))
        assert code == 0 and out == expected + "\n"

    def test_angles_file(self, capsys, tmp_path):
        path = tmp_path / "angles.json"
        path.write_text(json.dumps(QaoaAngles([0.2], [-0.15]).to_dict()))
        _, inline, _ = run(capsys, "exponent", "--k", "2", "--r", "1.5", "--beta", "0.2", "--gamma", "-0.15")
        code, from_file, _ = run(capsys, "exponent", "--k", "2", "--r", "1.5", "--angles", str(path))
        assert code == 0 and inline == from_file

    @pytest.mark.parametrize("argv", [
        ["--k", "4", "--r", "9.93", "--beta", "0.1", "--gamma", "0.1", "0.2"],
        ["--k", "4", "--r", "9.93", "--threshold", "--beta", "0.1", "--gamma", "0.1"],
        ["--k", "4", "--beta", "0.1", "--gamma", "0.1"],
        ["--k", "4", "--r", "9.93", "--p", "2", "--beta", "0.1", "--gamma", "0.1"],
        ["--k", "4", "--r", "9.93", "--beta", "0.1", "--gamma", "0.1", "--rho", "1.0"],
        ["--k", "4", "--threshold"],
    ])
    def test_usage_errors(self, capsys, argv):
        assert run(capsys, "exponent", *argv)[0] == 1

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["exponent", "--bogus"])
        assert exc.value.code == 1
        capsys.readouterr()

    def test_nonconvergence_exit_code(self, capsys):
        code, _, err = run(capsys, "exponent", "--k", "2", "--r", "1.0", "--beta", "0.4", "--gamma", "0.3",
                           "--max-iter", "1", "--eps", "1e-15", "--rho", "0")
        assert code == 2 and json.loads(err)["error"] == "DivergenceError"


class TestP1:
    def record(self, capsys, *argv):
        code, out, _ = run(capsys, "p1", *argv)
        assert code == 0
        return json.loads(out)["probability"]

    def test_gamma_zero(self, capsys):
        prob = self.record(capsys, "--k", "4", "--n", "20", "--r", "9.93", "--beta", "0.7", "--gamma", "0")
        assert prob == pytest.approx(math.exp(-(2.0**-4) * 9.93 * 20), rel=1e-10)

    def test_beta_zero(self, capsys):
        prob = self.record(capsys, "--k", "2", "--n", "12", "--r", "1.3", "--beta", "0", "--gamma", "0.9")
        assert prob == pytest.approx(math.exp(-0.25 * 1.3 * 12), rel=1e-10)

    def test_matches_library(self, capsys):
        prob = self.record(capsys, "--k", "4", "--n", "10", "--threshold", "--beta", "0.3", "--gamma", "-0.2")
        assert prob == p1_exact(4, 10, 9.93, 0.3, -0.2)

    def test_bad_n(self, capsys):
        assert run(capsys, "p1", "--k", "2", "--n", "0", "--r", "1", "--beta", "0", "--gamma", "0")[0] == 1


TOY = {"k": 2, "r": 1.0, "sizes": [8, 10, 12], "count": 20, "methods": ["walksat"]}


class TestBench:
    def test_toy_rerun_identical(self, capsys, tmp_path):
        config = tmp_path / "toy.json"
        config.write_text(json.dumps(TOY))
        outs = []
        for name in ("a.csv", "b.csv"):
            code, _, err = run(capsys, "--seed", "4", "bench", "--config", str(config), "--out", str(tmp_path / name),
                               "--summary", str(tmp_path / "summary.json"), "--plot-data", str(tmp_path / "plot.csv"))
            assert code == 0 and "walksat" in err
            outs.append((tmp_path / name).read_text())
        assert outs[0] == outs[1]
        lines = outs[0].splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 61
        assert json.loads((tmp_path / "summary.json").read_text())[0]["method"] == "walksat"
        assert (tmp_path / "plot.csv").read_text().splitlines()[0] == "method,n,median,err"

    def test_seed_changes_output(self, capsys, tmp_path):
        config = tmp_path / "toy.json"
        config.write_text(json.dumps({**TOY, "sizes": [8], "count": 5}))
        a = run(capsys, "bench", "--config", str(config), "--seed", "1")[1]
        b = run(capsys, "bench", "--config", str(config), "--seed", "2")[1]
        assert a != b

    def test_env_seed_fallback(self, capsys, tmp_path, monkeypatch):
        config = tmp_path / "toy.json"
        config.write_text(json.dumps({**TOY, "sizes": [8], "count": 5}))
        explicit = run(capsys, "bench", "--config", str(config), "--seed", "7")[1]
        monkeypatch.setenv("QSAT_SEED", "7")
        assert run(capsys, "bench", "--config", str(config))[1] == explicit
        monkeypatch.setenv("QSAT_SEED", "seven")
        assert run(capsys, "bench", "--config", str(config))[0] == 1

    def test_oversized_rejected(self, capsys, tmp_path):
        config = tmp_path / "big.json"
        config.write_text(json.dumps({**TOY, "sizes": [12, 27]}))
        assert run(capsys, "bench", "--config", str(config))[0] == 1

    def test_missing_config(self, capsys, tmp_path):
        assert run(capsys, "bench", "--config", str(tmp_path / "none.json"))[0] == 1


class TestTrain:
    def test_matches_library(self, capsys, tmp_path):
        code, out, _ = run(capsys, "train", "--k", "2", "--p", "2", "--n", "6", "--count", "5", "--r", "1.0",
                           "--iters", "4", "--seed", "3", "--log", str(tmp_path / "log.csv"))
        assert code == 0
        doc = json.loads(out)
        rng = np.random.default_rng(3)
        insts = []
        while len(insts) < 5:
            inst = sample_instance(6, 2, 1.0, rng)
            if is_satisfiable(inst):
                insts.append(inst)
        res = optimize_angles(insts, 2, TrainConfig(learning_rate=0.1, iterations=4, instance_count=5, instance_size=6))
        assert doc["beta"] == list(res.angles.beta) and doc["gamma"] == list(res.angles.gamma)
        assert doc["objective"] == res.objective and doc["objective"] >= doc["initial_objective"]
        assert (tmp_path / "log.csv").read_text() == res.log_csv()

    def test_output_feeds_exponent(self, capsys, tmp_path):
        angles = tmp_path / "angles.json"
        assert run(capsys, "train", "--k", "2", "--p", "1", "--n", "6", "--count", "4", "--r", "1.0",
                   "--iters", "3", "--out", str(angles))[0] == 0
        assert run(capsys, "exponent", "--k", "2", "--r", "1.0", "--angles", str(angles))[0] == 0

    def test_usage(self, capsys):
        assert run(capsys, "train", "--k", "2", "--p", "0", "--n", "6", "--r", "1.0")[0] == 1
        assert run(capsys, "train", "--k", "2", "--p", "1", "--n", "30", "--r", "1.0")[0] == 1


def test_global_flags_after_subcommand(capsys, tmp_path):
    out = tmp_path / "e.json"
    code, stdout, _ = run(capsys, "exponent", "--k", "2", "--r", "1.0", "--beta", "0.1", "--gamma", "0.1",
                          "--out", str(out), "--threads", "1", "-v")
    assert code == 0 and stdout == "" and json.loads(out.read_text())["k"] == 2
