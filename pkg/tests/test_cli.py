import json
import os

import pytest

from qkw.cli import fmt_number, parse_initial, run, to_json


def run_json(tmp_path, *argv):
    out = tmp_path / "out.json"
    assert run([*argv, "-o", str(out)]) == 0
    return json.loads(out.read_text())


def read_csv(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return [l.split(",") for l in lines]


def test_steady_state_weights(tmp_path):
    doc = run_json(tmp_path, "steady-state", "--family", "classical", "--s", "1,1,1")
    weights = doc["data"]["weights"]
    assert set(weights) == {"211", "231"}
    assert weights["211"] == pytest.approx(0.5, abs=1e-12)
    assert set(doc["metadata"]) == {"tool", "config_hash", "command"}


def test_round_expand_records(tmp_path):
    doc = run_json(tmp_path, "round-expand", "--goods", "211", "--family", "classical", "--theta", "0")
    branches = doc["data"]["branches"]
    assert sum(b["amplitude_re"] ** 2 + b["amplitude_im"] ** 2 for b in branches) == pytest.approx(1)
    assert {b["meeting"] for b in branches} == {"AB", "AC", "BC"}
    assert set(branches[0]) == {"amplitude_re", "amplitude_im", "goods", "meeting", "ancilla_bits", "flags"}


def test_transition_matrix_csv(tmp_path):
    out = tmp_path / "t.csv"
    assert run(["transition-matrix", "--family", "quantum", "--q", "1,1", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["to/from", "211", "212", "231", "232", "311", "312", "331", "332"]
    assert len(rows) == 9
    assert out.read_text().startswith("# tool: artifact")


def test_transition_matrix_dyads(tmp_path):
    doc = run_json(tmp_path, "transition-matrix", "--dyads")
    assert len(doc["data"]["t64"]) == 64
    assert len(doc["data"]["t64"][0][0]) == 2


def test_outputs_are_byte_identical(tmp_path):
    out = tmp_path / "a.csv"
    argv = ["sample", "--family", "quantum", "--q", "0.5,0.5", "--rounds", "200", "--seed", "9",
            "-o", str(out)]
    assert run(argv) == 0
    first = out.read_bytes()
    assert run(argv) == 0
    assert out.read_bytes() == first
    assert not [p for p in os.listdir(tmp_path) if p.startswith(".tmp-")]


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("strategy.family = classical\nstrategy.sA = 0  # speculative Alice\neconomy.u = 100\n")
    doc = run_json(tmp_path, "steady-state", "--config", str(cfg))
    assert doc["data"]["weights"]["311"] == pytest.approx(1 / 7)
    doc = run_json(tmp_path, "steady-state", "--config", str(cfg), "--s", "1,1,1")
    assert "311" not in doc["data"]["weights"]


@pytest.mark.parametrize("argv", [
    ["steady-state", "--bogus"],
    ["nope"],
    ["steady-state", "--u", "5"],
    ["steady-state", "--family", "classical", "--q", "1,1"],
    ["steady-state", "--initial", "999"],
    ["steady-state", "--s", "2,1,1"],
    ["payoff", "--format", "csv"],
    ["phase-diagram", "--x-range", "0.5,0.2"],
])
def test_usage_and_config_errors_exit_2(argv, capsys):
    assert run(argv) == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("economy.colour = red\n")
    assert run(["steady-state", "--config", str(cfg)]) == 2


def test_verify_exit_codes(capsys):
    assert run(["verify", "--criteria", "5,9"]) == 0
    assert "criterion  5: PASS" in capsys.readouterr().out
    assert run(["verify", "--criteria", "2"]) == 1
    assert run(["verify", "--criteria", "42"]) == 2


def test_payoff_json(tmp_path):
    doc = run_json(tmp_path, "payoff", "--family", "quantum", "--q", "1,1", "--agent", "B",
                   "--horizon", "5")
    data = doc["data"]
    assert data["agent"] == "B"
    assert data["V"] == pytest.approx(17.5)
    assert [p["t"] for p in data["series"]] == list(range(6))
    assert set(data["holdings"]) == {"p12", "p23", "p31"}


def test_evolve_csv(tmp_path):
    out = tmp_path / "e.csv"
    assert run(["evolve", "--steps", "5", "--coherent", "211+311", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0][-1] == "max_coherence"
    assert float(rows[-1][-1]) < float(rows[1][-1])


def test_best_response_and_phase_diagram(tmp_path):
    out = tmp_path / "br.csv"
    assert run(["best-response", "--xy", "0.4,0.4", "--grid-step", "0.1", "-o", str(out)]) == 0
    text = out.read_text()
    assert "# equilibria:" in text
    out = tmp_path / "pd.csv"
    assert run(["phase-diagram", "--resolution", "2", "--grid-step", "0.1", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["x", "y", "class", "equilibria"]
    assert len(rows) == 5


def test_coalition_json(tmp_path):
    doc = run_json(tmp_path, "coalition", "--grid-step", "0.5")
    assert {s["q_A'"] for s in doc["data"]["slices"]} == {0, 1}
    assert doc["data"]["pair_improvements"] == {"AB": [], "AC": []}


def test_number_formatting():
    assert fmt_number(0.1) == "0.10000000000000001"
    assert to_json({"a": [1.0, 2]}) == '{\n  "a": [1, 2]\n}'
    assert to_json(float("nan")) == "null"


def test_parse_initial_mixture():
    p = parse_initial("211:0.25,231:0.75")
    assert p.sum() == pytest.approx(1)
