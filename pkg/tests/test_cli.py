import json
import subprocess
import sys

import pytest
from numpy.testing import assert_allclose

from mortalbandits.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from mortalbandits.core import Environment
from mortalbandits.policies import PolicyConfig
from mortalbandits.sim import DATA_DIR, run_games

TWO_ARM = str(DATA_DIR / "two_arm.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestExitCodes:
    def test_help(self, capsys):
        code, out, _ = run(capsys, "--help")
        assert code == EXIT_OK
        assert "exit codes" in out

    def test_subcommand_help(self, capsys):
        assert run(capsys, "simulate", "--help")[0] == EXIT_OK

    def test_no_command(self, capsys):
        assert run(capsys)[0] == EXIT_USAGE

    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, "bound", "--env", TWO_ARM, "--frobnicate")
        assert code == EXIT_USAGE
        assert json.loads(err)["exit_code"] == EXIT_USAGE

    def test_missing_env(self, capsys):
        code, _, err = run(capsys, "bound")
        assert code == EXIT_CONFIG
        assert json.loads(err)["error"] == "ConfigError"

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "bound", "--env", str(tmp_path / "nope.json"))[0] == EXIT_IO
        assert run(capsys, "replay", "--log", str(tmp_path / "nope.log"))[0] == EXIT_IO

    def test_bad_config_field(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"gamez": 3}))
        assert run(capsys, "simulate", "--env", TWO_ARM, "--config", str(cfg))[0] == EXIT_CONFIG

    def test_exact_ucbl_replay_rejected(self, capsys, tmp_path):
        log = tmp_path / "l.log"
        assert run(capsys, "generate-log", "--env", "two_arm", "--out", str(log))[0] == EXIT_OK
        code = run(capsys, "replay", "--log", str(log), "--policy", "ucb-l", "--life-mode", "exact")[0]
        assert code == EXIT_CONFIG


class TestCommands:
    def test_simulate_matches_api(self, capsys):
        code, out, _ = run(capsys, "simulate", "--env", TWO_ARM, "--games", "4", "--seed", "3")
        assert code == EXIT_OK
        doc = json.loads(out)
        api = run_games(Environment.load(TWO_ARM), PolicyConfig(seed=3), 4, seed=3)
        assert doc["regrets"] == api.regrets
        assert_allclose(doc["summary"]["total_regret"], api.summary()["total_regret"])

    def test_config_then_flags(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"games": 2, "policy": "ucb-l"}))
        doc = json.loads(run(capsys, "simulate", "--env", TWO_ARM, "--config", str(cfg))[1])
        assert doc["summary"]["games"] == 2 and doc["config"]["policy"] == "ucb-l"
        doc = json.loads(run(capsys, "simulate", "--env", TWO_ARM, "--config", str(cfg), "--games", "3")[1])
        assert doc["summary"]["games"] == 3

    def test_simulate_out_files(self, capsys, tmp_path):
        prefix = tmp_path / "res"
        assert run(capsys, "simulate", "--template", "mortal-decoy", "--turns", "200", "--games", "3",
                   "--out", str(prefix))[0] == EXIT_OK
        assert len((tmp_path / "res.csv").read_text().splitlines()) == 4
        assert json.loads((tmp_path / "res.json").read_text())["summary"]["games"] == 3

    def test_bound_both_theorems(self, capsys):
        one = json.loads(run(capsys, "bound", "--env", "two_arm")[1])
        three = json.loads(run(capsys, "bound", "--env", "two_arm", "--theorem", "3")[1])
        assert one["theorem"] == 1 and three["theorem"] == 3
        assert one["config"]["command"] == "bound"

    def test_replay(self, capsys, tmp_path):
        log = tmp_path / "l.log"
        run(capsys, "generate-log", "--template", "mortal-decoy", "--seed", "1", "--out", str(log))
        code, out, _ = run(capsys, "replay", "--log", str(log), "--turns", "100", "--init-m", "5")
        assert code == EXIT_OK
        res = json.loads(out)["result"]
        assert res["turns_played"] == 100 and res["init_events"] >= 5

    def test_console_script(self):
        proc = subprocess.run([sys.executable, "-m", "mortalbandits.cli", "bound", "--env", "two_arm"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["horizon"] == 8


@pytest.mark.parametrize("threads", [1, 2])
def test_thread_count_not_in_output(capsys, tmp_path, threads):
    out = tmp_path / f"t{threads}"
    assert main(["simulate", "--env", TWO_ARM, "--games", "4", "--threads", str(threads), "--out", str(out)]) == 0
    assert "threads" not in json.loads((tmp_path / f"t{threads}.json").read_text())["config"]
