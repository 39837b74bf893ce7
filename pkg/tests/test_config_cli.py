import json

import pytest

from jamsim.cli import main
from jamsim.config import ExperimentConfig, load_config
from jamsim.errors import ConfigurationError


def test_defaults_follow_paper_setting():
    c = ExperimentConfig()
    assert (c.deployment.n_blue, c.deployment.m_cj, c.deployment.m_aj, c.deployment.m_t) == (40, 3, 3, 4)
    assert c.red.activation_slot == 5000
    assert tuple(c.weights.as_array()) == (15, 5, 3, 3, 1)
    assert (c.learning.memory_capacity, c.learning.batch_size) == (10000, 2)
    assert c.learning.eps_values == (1.0, 0.2, 0.01) and c.learning.eps_breakpoints == (500, 800)


def test_unknown_keys_rejected(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("routing:\n  protocol: min_distance\n  hops: 3\n")
    with pytest.raises(ConfigurationError, match="routing"):
        load_config(p)
    with pytest.raises(ConfigurationError):
        load_config(overrides={"colour": "red"})


def test_yaml_json_profile_and_overrides(tmp_path):
    y = tmp_path / "c.yaml"
    y.write_text("horizon: 123\nweights: {w_T: 20}\n")
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"horizon": 123, "weights": {"w_T": 20}}))
    assert load_config(y) == load_config(j)
    c = load_config(y, profile="paper", overrides={"repetitions": 4})
    assert (c.horizon, c.repetitions, c.weights.w_T) == (123, 4, 20)
    with pytest.raises(ConfigurationError):
        load_config(profile="laptop")


def test_value_validation():
    with pytest.raises(ConfigurationError):
        load_config(overrides={"horizon": 1.5})
    with pytest.raises(ConfigurationError):
        load_config(overrides={"policy.kind": "random"})
    with pytest.raises(ConfigurationError):
        load_config(overrides={"mac.arrival_prob": 2})


def test_cli_run(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["run", "--slots", "8", "--reps", "2", "--seed", "3", "--set", "deployment.n_blue=10",
                 "--set", "deployment.n_flows=2", "--protocol", "min-distance", "--out", str(out)])
    assert code == 0
    assert {p.name for p in out.iterdir()} >= {"run_3.csv", "run_4.csv", "aggregate.csv", "manifest.json"}
    assert json.loads(capsys.readouterr().out)["command"] == "run"


def test_cli_compare_commands(tmp_path):
    args = ["--slots", "5", "--reps", "2", "--set", "deployment.n_blue=10", "--set", "deployment.n_flows=2"]
    assert main(["compare-routing", *args, "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "jamming_aware" / "aggregate.csv").exists()
    assert main(["compare-policy", *args, "--learner", "tabular", "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "learner" / "manifest.json").exists()


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense: 1\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "configuration" in capsys.readouterr().err
    assert main(["run", "--protocol", "flooding"]) == 2
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["run", "--slots", "3", "--reps", "1", "--set", "deployment.n_blue=10",
                 "--set", "deployment.n_flows=2", "--out", str(blocker / "x")]) == 5
    assert "output" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        main(["bogus"])
    assert e.value.code != 0


def test_cli_oracle(capsys):
    assert main(["oracle", "--instances", "10"]) == 0
    res = json.loads(capsys.readouterr().out)["result"]
    assert res["next_hop_mismatches"] == 0
