import json
import threading

import pytest

from opeq.cli import build_parser, main


def write_problem(path, **overrides):
    data = {
        "domain": {"intervals": [[0.0, 1.0]]},
        "quadrature": {"rule": "trapezoid", "nodes_per_dim": 31},
        "linear_kernels": ["0.5"],
        "rhs": "1",
        "solver": {"method": "picard", "tol": 1e-10, "max_iter": 100, "seed": 0},
    }
    data.update(overrides)
    path.write_text(json.dumps(data))
    return path


class TestSolveCommand:
    def test_success_exit_zero(self, tmp_path, capsys):
        problem = write_problem(tmp_path / "p.json")
        out = tmp_path / "report.json"
        code = main(["solve", str(problem), "--output", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["solve"]["converged"] is True
        captured = capsys.readouterr()
        assert "iterations" in captured.out
        assert "residual" in captured.out

    def test_quiet(self, tmp_path, capsys):
        problem = write_problem(tmp_path / "p.json")
        out = tmp_path / "report.json"
        assert main(["solve", str(problem), "--output", str(out), "--quiet"]) == 0
        assert capsys.readouterr().out == ""

    def test_syntax_error_exit_one(self, tmp_path, capsys):
        problem = write_problem(tmp_path / "p.json", linear_kernels=["sin("])
        code = main(["solve", str(problem), "--output", str(tmp_path / "r.json")])
        assert code == 1
        err = capsys.readouterr().err
        assert "linear_kernels[0]" in err
        assert "position 4" in err

    def test_unreachable_tolerance_exit_two_with_partial_report(self, tmp_path):
        problem = write_problem(tmp_path / "p.json")
        out = tmp_path / "r.json"
        code = main(["solve", str(problem), "--output", str(out), "--tol", "1e-99"])
        assert code == 2
        doc = json.loads(out.read_text())
        assert doc["solve"]["converged"] is False
        assert doc["solve"]["failure"] == "max_iter_exceeded"
        assert doc["solve"]["iterations"] == 100

    def test_missing_file(self, tmp_path, capsys):
        assert main(["solve", str(tmp_path / "absent.json")]) == 1
        assert "absent.json" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["solve", str(bad)]) == 1

    def test_unknown_schema_key(self, tmp_path, capsys):
        problem = write_problem(tmp_path / "p.json")
        data = json.loads(problem.read_text())
        data["surprise"] = True
        problem.write_text(json.dumps(data))
        assert main(["solve", str(problem)]) == 1

    def test_method_override(self, tmp_path):
        problem = write_problem(tmp_path / "p.json")
        out = tmp_path / "r.json"
        assert main(["solve", str(problem), "--output", str(out), "--method", "newton"]) == 0
        assert json.loads(out.read_text())["solve"]["method"] == "newton"

    def test_nodes_override(self, tmp_path):
        problem = write_problem(tmp_path / "p.json")
        out = tmp_path / "r.json"
        assert main(["solve", str(problem), "--output", str(out), "--nodes", "11"]) == 0
        assert len(json.loads(out.read_text())["solve"]["solution"]) == 11

    def test_continuation_method(self, tmp_path):
        problem = write_problem(
            tmp_path / "p.json",
            solver={"method": "continuation", "tol": 1e-10},
            continuation={"rhs_start": "0", "steps": 4},
        )
        out = tmp_path / "r.json"
        assert main(["solve", str(problem), "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["solve"]["kind"] == "continuation"
        assert doc["solve"]["endpoint_matches_direct"] is True
        assert len(doc["solve"]["solutions"]) == 5


class TestCrossMethodConsistency:
    def test_example_file_picard_newton_direct_agree(self, tmp_path):
        # same file solved three ways: picard, newton, and a dense direct solve
        import numpy as np

        from opeq.operators import linear_solve
        from opeq.problems import build_setup, validate_problem_data

        problem_path = write_problem(
            tmp_path / "p.json", linear_kernels=["0.4*cos(x*y)", "0.2*x*y"], rhs="1+x"
        )
        picard_out = tmp_path / "picard.json"
        newton_out = tmp_path / "newton.json"
        assert main(["solve", str(problem_path), "--output", str(picard_out), "--quiet"]) == 0
        assert main(
            ["solve", str(problem_path), "--output", str(newton_out), "--quiet", "--method", "newton"]
        ) == 0
        picard_u = np.array(json.loads(picard_out.read_text())["solve"]["solution"])
        newton_u = np.array(json.loads(newton_out.read_text())["solve"]["solution"])

        built = build_setup(validate_problem_data(json.loads(problem_path.read_text())))
        n = built.problem.grid.size
        direct = linear_solve(
            np.eye(n) + built.problem.linear_matrix().entries, built.rhs.values
        )
        assert np.max(np.abs(picard_u - newton_u)) <= 1e-9
        assert np.max(np.abs(picard_u - direct)) <= 1e-9

    def test_seed_override_changes_digest(self, tmp_path):
        problem = write_problem(tmp_path / "p.json")
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["solve", str(problem), "--output", str(a), "--quiet"]) == 0
        assert main(["solve", str(problem), "--output", str(b), "--quiet", "--seed", "5"]) == 0
        assert (
            json.loads(a.read_text())["problem_digest"]
            != json.loads(b.read_text())["problem_digest"]
        )

    def test_default_output_path(self, tmp_path, monkeypatch):
        problem = write_problem(tmp_path / "p.json")
        monkeypatch.chdir(tmp_path)
        assert main(["solve", str(problem), "--quiet"]) == 0
        assert (tmp_path / "report.json").exists()


class TestCheckCommand:
    def test_check_passes(self, tmp_path):
        problem = write_problem(tmp_path / "p.json")
        out = tmp_path / "r.json"
        assert main(["check", str(problem), "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        statuses = {c["name"]: c["status"] for c in doc["checks"]}
        assert statuses["contraction"] == "pass"

    def test_degenerate_norm_flagged_but_exit_zero(self, tmp_path):
        problem = write_problem(tmp_path / "p.json", linear_kernels=["1"])
        out = tmp_path / "r.json"
        assert main(["check", str(problem), "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        statuses = {c["name"]: c["status"] for c in doc["checks"]}
        assert statuses["norm_separation"] == "fail"


class TestReproduceCommand:
    def test_example1(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["reproduce", "example1", "--output", str(out), "--quiet"]) == 0
        doc = json.loads(out.read_text())
        assert doc["solve"]["method"] == "picard"
        assert {c["name"] for c in doc["checks"]} >= {
            "contraction",
            "norm_separation",
            "weak_coercivity",
            "lax_milgram",
            "cross_solver_agreement",
            "uniqueness_probe",
        }

    def test_example2_constant_solution_matches_bisection(self, tmp_path):
        import numpy as np

        from conftest import bisect_sine_constant

        out = tmp_path / "r.json"
        assert main(["reproduce", "example2", "--output", str(out), "--quiet"]) == 0
        solution = np.array(json.loads(out.read_text())["solve"]["solution"])
        assert solution.max() - solution.min() <= 1e-10  # constant across nodes
        assert abs(solution[0] - bisect_sine_constant()) <= 1e-10

    def test_unknown_example_exit_one(self, tmp_path, capsys):
        assert main(["reproduce", "example3", "--output", str(tmp_path / "r.json")]) == 1
        assert "example3" in capsys.readouterr().err


class TestParser:
    def test_bad_flag_exits_one(self):
        with pytest.raises(SystemExit) as err:
            build_parser().parse_args(["solve", "file.json", "--unknown-flag"])
        assert err.value.code == 1

    def test_bad_method_choice_exits_one(self):
        with pytest.raises(SystemExit) as err:
            build_parser().parse_args(["solve", "f.json", "--method", "bisection"])
        assert err.value.code == 1

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as err:
            build_parser().parse_args(["--help"])
        assert err.value.code == 0


class TestRemoteMode:
    def test_remote_solve_round_trip(self, tmp_path):
        import uvicorn

        from opeq.service import app

        config = uvicorn.Config(app, host="127.0.0.1", port=8765, log_level="error")
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        import time

        for _ in range(100):
            if server.started:
                break
            time.sleep(0.05)
        assert server.started
        try:
            problem = write_problem(tmp_path / "p.json")
            local_out = tmp_path / "local.json"
            remote_out = tmp_path / "remote.json"
            assert main(["solve", str(problem), "--output", str(local_out), "--quiet"]) == 0
            code = main(
                [
                    "solve",
                    str(problem),
                    "--output",
                    str(remote_out),
                    "--quiet",
                    "--server",
                    "http://127.0.0.1:8765",
                ]
            )
            assert code == 0
            assert local_out.read_bytes() == remote_out.read_bytes()

            # input errors surface as exit 1 through the remote path too
            bad = write_problem(tmp_path / "bad.json", linear_kernels=["sin("])
            assert (
                main(
                    [
                        "solve",
                        str(bad),
                        "--output",
                        str(tmp_path / "x.json"),
                        "--quiet",
                        "--server",
                        "http://127.0.0.1:8765",
                    ]
                )
                == 1
            )
        finally:
            server.should_exit = True
            thread.join(timeout=5)
