import json
import logging
from unittest.mock import patch

import pytest
from rich.logging import RichHandler
from typer.testing import CliRunner

from prodist import cli
from prodist.core import config
from prodist.core.system_logger import SystemLogger

runner = CliRunner()


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """Run every command from a temporary directory with its own .prodist."""
    monkeypatch.chdir(tmp_path)
    config._params = None
    SystemLogger._instance = None
    with patch.object(config.ConfigLoader, "DEFAULT_CONFIG_DIR", tmp_path / ".prodist"):
        yield tmp_path
    config._params = None
    SystemLogger._instance = None


def write_pair(path, p, q):
    path.write_text(json.dumps({"p": {"probs": p}, "q": {"probs": q}}), encoding="utf-8")
    return str(path)


@pytest.fixture
def two_point_input(tmp_path):
    return write_pair(tmp_path / "pair.json", ["1/2", "1/2"], ["2/5", "3/5"])


@pytest.fixture
def three_point_input(tmp_path):
    return write_pair(tmp_path / "three.json", ["1/2", "3/10", "1/5"], ["1/5", "1/2", "3/10"])


def parse(result):
    """The JSON document at the start of stdout."""
    payload, _ = json.JSONDecoder().raw_decode(result.stdout)
    return payload


# ==============================================================================
# Distance commands
# ==============================================================================

def test_dist_auto(two_point_input):
    result = runner.invoke(cli.app, ["dist", "--input", two_point_input, "--n", "2"])
    assert result.exit_code == 0, result.output
    payload = parse(result)
    assert payload["distance"] == "11/100"
    assert payload["engine"] == "two_point"
    assert payload["backend"] == "rational"


@pytest.mark.parametrize("engine", ["brute", "type", "two-point"])
def test_dist_engines_agree(two_point_input, engine):
    result = runner.invoke(cli.app, ["dist", "-i", two_point_input, "-n", "2", "--engine", engine])
    assert result.exit_code == 0, result.output
    assert parse(result)["distance"] == "11/100"


def test_dist_float_backend(two_point_input):
    result = runner.invoke(cli.app, ["dist", "-i", two_point_input, "-n", "2", "--backend", "float"])
    assert result.exit_code == 0, result.output
    assert parse(result)["distance"] == pytest.approx(0.11)


def test_dist_mc(two_point_input):
    result = runner.invoke(
        cli.app, ["dist", "-i", two_point_input, "-n", "2", "--engine", "mc", "--samples", "2000", "--seed", "3"]
    )
    assert result.exit_code == 0, result.output
    payload = parse(result)
    assert payload["engine"] == "mc"
    assert payload["samples"] == 2000
    assert payload["seed"] == 3


def test_dist_rejects_invalid_distribution(tmp_path):
    path = write_pair(tmp_path / "bad.json", ["1/2", "1/3"], ["1/2", "1/2"])
    result = runner.invoke(cli.app, ["dist", "-i", path, "-n", "2"])
    assert result.exit_code == cli.EXIT_VALIDATION


def test_dist_rejects_missing_q(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"p": {"probs": [1]}}', encoding="utf-8")
    result = runner.invoke(cli.app, ["dist", "-i", str(path), "-n", "2"])
    assert result.exit_code == cli.EXIT_VALIDATION


def test_dist_rejects_unknown_engine_and_backend(two_point_input):
    assert runner.invoke(cli.app, ["dist", "-i", two_point_input, "-n", "2", "-e", "magic"]).exit_code == 1
    assert runner.invoke(cli.app, ["dist", "-i", two_point_input, "-n", "2", "-b", "decimal"]).exit_code == 1


def test_float_rounding_overshoot_is_accepted(tmp_path):
    path = write_pair(tmp_path / "overshoot.json", [0.5, 0.5 + 1e-13], [0.4, 0.6 + 1e-13])
    for command in (["dist"], ["bound"], ["sweep", "--n-max", "3", "--out", "json"]):
        args = command + ["-i", path, "--backend", "float"] + (["-n", "5"] if command[0] != "sweep" else [])
        result = runner.invoke(cli.app, args)
        assert result.exit_code == 0, result.output
    payload = parse(runner.invoke(cli.app, ["dist", "-i", path, "-n", "5", "--backend", "float"]))
    assert payload["engine"] == "two_point"
    assert 0.0 < payload["float"] < 1.0


def test_dist_rejects_nan(tmp_path):
    path = write_pair(tmp_path / "nan.json", [float("nan"), 1.0], [0.5, 0.5])
    result = runner.invoke(cli.app, ["dist", "-i", path, "-n", "2", "--backend", "float"])
    assert result.exit_code == cli.EXIT_VALIDATION
    assert "finite" in result.output


def test_dist_missing_file(tmp_path):
    result = runner.invoke(cli.app, ["dist", "-i", str(tmp_path / "nope.json"), "-n", "2"])
    assert result.exit_code == cli.EXIT_VALIDATION


def test_mc_command(two_point_input):
    result = runner.invoke(
        cli.app, ["mc", "-i", two_point_input, "-n", "2", "--samples", "1000", "--seed", "9", "--shards", "2"]
    )
    assert result.exit_code == 0, result.output
    payload = parse(result)
    assert payload["shards"] == 2
    assert 0.0 <= payload["mean"] <= 1.0


def test_mc_rejects_few_samples(two_point_input):
    result = runner.invoke(cli.app, ["mc", "-i", two_point_input, "-n", "2", "--samples", "10"])
    assert result.exit_code == cli.EXIT_VALIDATION


# ==============================================================================
# Bounds and chains
# ==============================================================================

def test_bound_report(three_point_input):
    result = runner.invoke(cli.app, ["bound", "-i", three_point_input, "-n", "4"])
    assert result.exit_code == 0, result.output
    payload = parse(result)
    assert payload["delta_1"] == "3/10"
    assert payload["pbar"] == "1/5"
    assert payload["exact_engine"] == "type_class"
    assert payload["applicable"]["lemma1_first"] is True


def test_bound_inapplicable_exits_two(tmp_path):
    path = write_pair(tmp_path / "eps.json", ["1", "0"], ["999/1000", "1/1000"])
    result = runner.invoke(cli.app, ["bound", "-i", path, "-n", "10"])
    assert result.exit_code == cli.EXIT_INAPPLICABLE
    payload = parse(result)
    assert payload["lemma1_first"] is None
    assert payload["linear"] > 0


def test_bound_events_are_logged(three_point_input, tmp_path):
    runner.invoke(cli.app, ["bound", "-i", three_point_input, "-n", "2"])
    lines = (tmp_path / ".prodist" / "logs" / "system.jsonl").read_text(encoding="utf-8").splitlines()
    events = [json.loads(line) for line in lines]
    assert events[-1]["event"] == "COMMAND_RUN"
    assert events[-1]["data"]["command"] == "bound"
    assert events[-1]["data"]["outcome"] == "ok"


def test_chain_command(three_point_input):
    result = runner.invoke(cli.app, ["chain", "-i", three_point_input, "-n", "4"])
    assert result.exit_code == 0, result.output
    payload = parse(result)
    assert payload["step_distances"] == ["1/5", "1/10"]
    assert all(payload["invariants"].values())
    assert payload["assembly"]["chain"]["product_distance"] is not None


def test_chain_assembly_needs_positive_pbar(tmp_path):
    path = write_pair(tmp_path / "zero.json", ["1", "0"], ["1/2", "1/2"])
    result = runner.invoke(cli.app, ["chain", "-i", path, "-n", "3"])
    assert result.exit_code == cli.EXIT_INAPPLICABLE


# ==============================================================================
# Experiments
# ==============================================================================

def test_sweep_json(three_point_input):
    result = runner.invoke(cli.app, ["sweep", "-i", three_point_input, "--n-max", "4", "--out", "json"])
    assert result.exit_code == 0, result.output
    payload = parse(result)
    assert payload["schema"] == "growth/v1"
    assert [row["n"] for row in payload["rows"]] == [1, 2, 3, 4]


def test_sweep_writes_file(three_point_input, tmp_path):
    target = tmp_path / "out" / "growth.csv"
    result = runner.invoke(cli.app, ["sweep", "-i", three_point_input, "--n-max", "3", "-o", str(target)])
    assert result.exit_code == 0, result.output
    assert target.read_text(encoding="utf-8").startswith("# prodist-schema: growth/v1")


def test_tightness_csv():
    result = runner.invoke(cli.app, ["tightness", "--pbar", "0.25", "--n-max", "20", "--backend", "float"])
    assert result.exit_code == 0, result.output
    assert result.stdout.splitlines()[0] == "# prodist-schema: tightness/v1"


def test_tightness_rejects_half():
    result = runner.invoke(cli.app, ["tightness", "--pbar", "0.5", "--n-max", "20"])
    assert result.exit_code == cli.EXIT_VALIDATION


def test_constant_command():
    result = runner.invoke(cli.app, ["constant", "--n-max", "8", "--backend", "float", "--out", "json"])
    assert result.exit_code == 0, result.output
    payload = parse(result)
    assert payload["schema"] == "constant/v1"
    assert 0 < payload["meta"]["sup_c_required"] <= 0.5


def test_pathint_command(two_point_input):
    result = runner.invoke(cli.app, ["pathint", "-i", two_point_input, "-n", "10", "--grid", "16"])
    assert result.exit_code == 0, result.output
    payload = parse(result)
    assert payload["grid"] == 16
    assert payload["integral"] >= 0


def test_pathint_needs_two_point_pair(three_point_input):
    result = runner.invoke(cli.app, ["pathint", "-i", three_point_input, "-n", "10"])
    assert result.exit_code == cli.EXIT_VALIDATION


def test_derivative_command(two_point_input):
    result = runner.invoke(cli.app, ["derivative", "-i", two_point_input, "-n", "1", "--table"])
    assert result.exit_code == 0, result.output
    payload = parse(result)
    assert payload["derivative"] == "1"
    assert payload["float"] == 1.0
    assert payload["lemma2_first"] >= 1.0


# ==============================================================================
# Configuration
# ==============================================================================

def test_config_set_get_unset(tmp_path):
    result = runner.invoke(cli.app, ["config", "set", "engines.partitions", "3"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / ".prodist" / "prodist.json").exists()

    result = runner.invoke(cli.app, ["config", "get", "engines.partitions"])
    assert result.stdout.strip() == "3"

    result = runner.invoke(cli.app, ["config", "unset", "engines.partitions"])
    assert result.exit_code == 0, result.output
    result = runner.invoke(cli.app, ["config", "get", "engines.partitions"])
    assert result.stdout.strip() == "1"


def test_config_unknown_key():
    assert runner.invoke(cli.app, ["config", "get", "engines.nothing"]).exit_code == 1
    assert runner.invoke(cli.app, ["config", "set", "engines.nothing", "1"]).exit_code == 1


def test_config_set_invalid_value():
    result = runner.invoke(cli.app, ["config", "set", "sampling.samples", "5"])
    assert result.exit_code == 1


def test_upward_ulps_setting_reaches_commands(two_point_input):
    default = parse(runner.invoke(cli.app, ["bound", "-i", two_point_input, "-n", "2"]))
    assert default["linear"] > 0.2

    assert runner.invoke(cli.app, ["config", "set", "numerics.upward_ulps", "0"]).exit_code == 0
    assert parse(runner.invoke(cli.app, ["bound", "-i", two_point_input, "-n", "2"]))["linear"] == 0.2
    sweep = parse(runner.invoke(cli.app, ["sweep", "-i", two_point_input, "--n-max", "2", "--out", "json"]))
    assert sweep["rows"][1]["linear"] == 0.2
    chain = parse(runner.invoke(cli.app, ["chain", "-i", two_point_input, "-n", "2"]))
    assert chain["assembly"]["linear"] == 0.2


def test_equality_tolerance_setting_reaches_commands(tmp_path):
    path = write_pair(tmp_path / "near.json", [0.5, 0.3, 0.2], [0.4 - 1e-12, 0.4, 0.2 + 1e-12])
    args = ["dist", "-i", path, "-n", "3", "--backend", "float"]
    assert parse(runner.invoke(cli.app, args))["engine"] == "type_class"

    assert runner.invoke(cli.app, ["config", "set", "numerics.equality_tolerance", "1e-9"]).exit_code == 0
    assert parse(runner.invoke(cli.app, args))["engine"] == "two_point"
    chain = parse(runner.invoke(cli.app, ["chain", "-i", path, "--backend", "float"]))
    assert len(chain["step_pairs"]) == 1
    assert all(chain["invariants"].values())


def test_debug_setting_enables_debug_logging(two_point_input):
    root = logging.getLogger("prodist")
    try:
        assert runner.invoke(cli.app, ["config", "set", "debug", "true"]).exit_code == 0
        result = runner.invoke(cli.app, ["dist", "-i", two_point_input, "-n", "2"])
        assert result.exit_code == 0, result.output
        assert root.level == logging.DEBUG
        assert sum(isinstance(h, RichHandler) for h in root.handlers) == 1
    finally:
        for handler in [h for h in root.handlers if isinstance(h, RichHandler)]:
            root.removeHandler(handler)
        root.setLevel(logging.NOTSET)
