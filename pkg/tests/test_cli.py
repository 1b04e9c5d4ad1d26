import json

import pytest

from taskflow import __version__
from taskflow.cli import main
from taskflow.mission_store import save_mission
from tests.mission_fixtures import chain_mission


@pytest.fixture
def chain_file(tmp_path):
    return str(save_mission(chain_mission(), tmp_path / "chain.json"))


def test_generate_is_reproducible(tmp_path, capsys):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["generate", "--tasks", "6", "--agents", "3", "--seed", "4", "-o", str(first)]) == 0
    assert main(["generate", "--tasks", "6", "--agents", "3", "--seed", "4", "-o", str(second)]) == 0
    assert first.read_text() == second.read_text()
    assert "tasks=6" in capsys.readouterr().out


def test_generate_rejects_an_empty_mission(tmp_path):
    assert main(["generate", "--tasks", "0", "--agents", "3", "-o", str(tmp_path / "m.json")]) == 2


def test_solve_chain_reports_the_objective(chain_file, tmp_path, capsys):
    out = tmp_path / "solution.json"
    assert main(["solve", chain_file, "--solver", "offline", "--restarts", "2", "-o", str(out)]) == 0
    assert "objective=3.000000" in capsys.readouterr().out
    payload = json.loads(out.read_text())
    assert payload["solver"] == "offline"
    assert [t["task"] for t in payload["timing"]] == [1, 2]
    assert {(a["tail"], a["head"]): a["robots"] for a in payload["allocation"]} == {(0, 1): 3, (1, 2): 3}


def test_flow_oracle_agrees_on_the_chain(chain_file, capsys):
    assert main(["solve", chain_file, "--solver", "oracle-flow"]) == 0
    assert "objective=3.000000" in capsys.readouterr().out


def test_greedy_cli_is_deterministic(chain_file, tmp_path):
    first, second = tmp_path / "g1.json", tmp_path / "g2.json"
    assert main(["solve", chain_file, "--solver", "greedy", "--seed", "3", "-o", str(first)]) == 0
    assert main(["solve", chain_file, "--solver", "greedy", "--seed", "3", "-o", str(second)]) == 0
    assert json.loads(first.read_text())["flow"] == json.loads(second.read_text())["flow"]


def test_simulate_prints_a_total_row(chain_file, capsys):
    assert main(["simulate", chain_file, "--solver", "online", "--restarts", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[-1].split()[0] == "TOTAL"
    assert float(lines[-1].split()[-1]) == pytest.approx(3.0, abs=1e-4)


def test_oracle_command_writes_a_csv(chain_file, tmp_path, capsys):
    out = tmp_path / "oracle.csv"
    assert main(["oracle", chain_file, "--kind", "flow", "-o", str(out)]) == 0
    assert "best_objective=3.000000" in capsys.readouterr().out
    assert out.read_text().splitlines()[0].startswith("mission,kind,best_objective")


def test_oracle_guard_exits_with_four(tmp_path, capsys):
    mission = tmp_path / "big.json"
    assert main(["generate", "--tasks", "5", "--agents", "2", "-o", str(mission)]) == 0
    assert main(["oracle", str(mission), "--kind", "schedule"]) == 4
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "oracle_guard_exceeded"


def test_malformed_mission_exits_with_three(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nodes": []}')
    assert main(["solve", str(bad)]) == 3
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["status_code"] == 3


def test_missing_file_exits_with_three(tmp_path):
    assert main(["solve", str(tmp_path / "nope.json")]) == 3


def test_sweep_with_empty_levels_is_a_usage_error(tmp_path, capsys):
    spec = tmp_path / "empty.json"
    spec.write_text(json.dumps({"name": "empty", "variable": "p_f", "levels": [], "solvers": ["offline"]}))
    assert main(["sweep", str(spec)]) == 2
    assert "empty_levels" in capsys.readouterr().err


def test_sweep_and_report_write_their_files(tmp_path, capsys):
    spec = tmp_path / "tiny.json"
    spec.write_text(
        json.dumps(
            {
                "name": "tiny",
                "variable": "num_tasks",
                "levels": [2, 3],
                "trials": 1,
                "solvers": ["offline", "greedy"],
                "generator": {"num_tasks": 3, "fleet_size": 2},
                "solver": {"restarts": 1, "max_iters": 50, "greedy_samples": 5, "greedy_iters": 10},
            }
        )
    )
    csv_path = tmp_path / "tiny.csv"
    assert main(["sweep", str(spec), "--csv", str(csv_path)]) == 0
    assert "rows=4" in capsys.readouterr().out
    assert main(["report", str(csv_path), "--out-dir", str(tmp_path / "charts")]) == 0
    assert (tmp_path / "charts" / "tiny-reward.svg").exists()


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
