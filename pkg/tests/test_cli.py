import csv
import io
from pathlib import Path

import pytest

from featcheck.cli import EXIT_ENGINE, EXIT_MODEL, EXIT_OK, EXIT_USAGE, CliConfig, main
from featcheck.semantics import from_flat
from featcheck.vardsl import format_model, parse_syntax

FIXTURES = Path(__file__).parent / "fixtures"

TINY = """
signature { features f; }
module M owns(f) {
  var x : [0..1] init 0;
  [go] x = 0 -> 1/2: (x' = 1) + 1/2: (x' = 0);
}
controller { init {}, {f}; }
label Goal = x = 1;
query reach : Pmax [ F Goal ] >= 0.5;
"""

SLOW = """
signature { features f; }
module M owns(f) {
  var x : [0..2] init 0;
  [go] x = 0 -> 1/3: (x' = 1) + 1/3: (x' = 0) + 1/3: (x' = 2);
}
controller static;
label Goal = x = 1;
query reach : Pmax [ F Goal ];
"""


def write(tmp_path, text, name="model.fdsl"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestCheck:
    def test_values_per_initial_state(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["check", str(write(tmp_path, TINY)), "--out", str(out)])
        assert rc == EXIT_OK
        rows = read_csv(out / "values.csv")
        assert rows[0] == ["state", "description", "reach", "reach_holds"]
        assert len(rows) == 3
        assert all(r[2] == "1.0" and r[3] == "true" for r in rows[1:])
        assert not (out / "scheduler.csv").exists()

    def test_synth_picks_cheaper_move(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["check", str(FIXTURES / "two_moves.fdsl"), "--query", "e", "--synth", "--out", str(out)])
        assert rc == EXIT_OK
        assert {r[2] for r in read_csv(out / "values.csv")[1:]} == {"2.0"}
        sched = read_csv(out / "scheduler.csv")
        assert sched[0] == ["query", "state", "move", "rule"]
        assert {r[3] for r in sched[1:]} == {"R1:B"}
        assert (out / "scheduler_e.dot").read_text().startswith("digraph")

    def test_malformed_model(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["check", str(write(tmp_path, "signature { features f }")), "--out", str(out)])
        assert rc == EXIT_MODEL
        assert not out.exists()

    def test_scope_error_is_model_error(self, tmp_path, capsys):
        bad = TINY.replace("(x' = 0)", "(y' = 0)")
        assert main(["check", str(write(tmp_path, bad)), "--out", str(tmp_path / "o")]) == EXIT_MODEL
        assert "model error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check", str(tmp_path / "nope.fdsl")]) == EXIT_USAGE

    def test_unknown_query(self, tmp_path):
        assert main(["check", str(write(tmp_path, TINY)), "--query", "zz", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_bad_epsilon(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["check", str(write(tmp_path, TINY)), "--epsilon", "-1"])
        assert err.value.code == EXIT_USAGE

    def test_non_convergence(self, tmp_path, capsys):
        rc = main(["check", str(write(tmp_path, SLOW)), "--max-iters", "1", "--out", str(tmp_path / "o")])
        assert rc == EXIT_ENGINE
        assert "no convergence" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_const_override(self, tmp_path):
        out = tmp_path / "out"
        rc = main(["check", str(FIXTURES / "counter.fdsl"), "--const", "N=1", "--query", "e1", "--out", str(out)])
        assert rc == EXIT_OK
        assert main(["check", str(FIXTURES / "counter.fdsl"), "--const", "N", "--out", str(out)]) == EXIT_USAGE

    def test_config_options(self):
        assert CliConfig("check", epsilon=1e-6).options().epsilon_prob == 1e-6


class TestExport:
    def test_fdsl_round_trip(self, tmp_path, capsys):
        src = FIXTURES / "dynamic.fdsl"
        assert main(["export", str(src), "--format", "fdsl"]) == EXIT_OK
        printed = capsys.readouterr().out
        assert parse_syntax(printed) == parse_syntax(src.read_text())

    def test_flat_chain(self, tmp_path):
        out = tmp_path / "out"
        assert main(["export", str(FIXTURES / "chain.fdsl"), "--format", "flat", "--out", str(out)]) == EXIT_OK
        flat = (out / "chain.flat").read_text()
        assert len(flat.splitlines()) == 2
        mdp = from_flat(flat, (out / "chain.states").read_text())
        assert mdp.num_states == 3

    def test_prism(self, capsys):
        assert main(["export", str(FIXTURES / "chain.fdsl"), "--format", "prism"]) == EXIT_OK
        assert capsys.readouterr().out.count('rewards "energy"') == 1

    def test_dot(self, capsys):
        assert main(["export", str(FIXTURES / "two_moves.fdsl"), "--format", "dot"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("digraph mdp {")

    def test_bad_format(self):
        with pytest.raises(SystemExit) as err:
            main(["export", str(FIXTURES / "chain.fdsl"), "--format", "pdf"])
        assert err.value.code == EXIT_USAGE

    def test_export_model_error(self, tmp_path):
        assert main(["export", str(write(tmp_path, "module")), "--format", "fdsl"]) == EXIT_MODEL


EBOND_SMALL = ["ebond", "--horizon", "10", "--fast-power", "3000,5000"]


class TestEbond:
    def test_rows(self, tmp_path):
        out = tmp_path / "e"
        rc = main(EBOND_SMALL + ["--bandwidth", "200", "--configs", "01_S_A", "--out", str(out)])
        assert rc == EXIT_OK
        rows = read_csv(out / "results.csv")
        assert len(rows) == 1 + 4
        assert sorted(p.name for p in out.glob("*.png")) == ["phi_e.png", "phi_m.png", "phi_p.png", "phi_s.png"]

    def test_both_mode_stats(self, tmp_path):
        out = tmp_path / "e"
        rc = main(
            EBOND_SMALL + ["--bandwidth", "200", "--configs", "01_S_A,02_S_B,11_P_H", "--mode", "both",
                           "--no-figures", "--out", str(out)]
        )
        assert rc == EXIT_OK
        stats = read_csv(out / "stats.csv")
        assert stats[0][:5] == ["bandwidth_mbit", "family_states", "family_moves", "one_by_one_states", "one_by_one_moves"]
        assert not list(out.glob("*.png"))

    def test_bad_config(self, tmp_path):
        assert main(EBOND_SMALL + ["--configs", "99_Z_Q", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_bad_bandwidth(self, tmp_path):
        assert main(EBOND_SMALL + ["--bandwidth", "250", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_bad_horizon(self, tmp_path):
        assert main(["ebond", "--horizon", "7", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_workers_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FEATCHECK_WORKERS", "zero")
        assert main(EBOND_SMALL + ["--bandwidth", "200", "--configs", "01_S_A", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_engine_failure_carries_context(self, tmp_path, capsys):
        out = tmp_path / "e"
        rc = main(EBOND_SMALL + ["--bandwidth", "200", "--configs", "01_S_A", "--max-iters", "1", "--out", str(out)])
        assert rc == EXIT_ENGINE
        assert "bandwidth 200, configs 01_S_A" in capsys.readouterr().err
        assert not out.exists()
