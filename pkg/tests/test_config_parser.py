import json
import math

import pytest
import yaml

from config.config_parser import ConfigParser
from data.models import ResolventConfig, RunConfig, SimulationConfig
from utils.exceptions import ConfigError


def test_shipped_configs_are_valid(shipped_config):
    parser = ConfigParser(str(shipped_config))
    run_config = parser.get_run_config()
    assert isinstance(run_config, RunConfig)
    assert run_config.model.preset == "isentropic_inflow"
    assert run_config.simulation.p_list == [1.0, 2.0, math.inf]
    assert parser.get("simulation.forcing.kind") == "algebraic"
    assert parser.get("simulation.missing.key", "fallback") == "fallback"

    outflow = ConfigParser(str(shipped_config.parent / "config_outflow.json"))
    assert outflow.is_json
    assert outflow.get_run_config().model.preset is not None


def test_section_getters(write_config):
    parser = ConfigParser(str(write_config({"model": {"preset": "burgers_embedding"},
                                            "evans": {"radius": 4.0}})))
    assert parser.get_model_config() == {"preset": "burgers_embedding"}
    assert parser.get_evans_config() == {"radius": 4.0}
    assert parser.get_profile_config() == {}
    assert parser.get_resolvent_config() == {}
    assert parser.get_simulation_config() == {}
    assert parser.get_logging_config() == {}
    assert parser.get_run_config().evans.n_min == 64


def test_missing_and_empty_files(tmp_path, write_config):
    with pytest.raises(ConfigError, match="不存在"):
        ConfigParser(str(tmp_path / "absent.yaml"))
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ConfigError, match="为空"):
        ConfigParser(str(empty))
    with pytest.raises(ConfigError, match="映射"):
        ConfigParser(str(write_config([1, 2, 3])))


def test_parse_errors_carry_position(tmp_path):
    broken = tmp_path / "broken.yaml"
    broken.write_text("model:\n  preset: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="行"):
        ConfigParser(str(broken))

    broken_json = tmp_path / "broken.json"
    broken_json.write_text('{"model": {"preset": }', encoding="utf-8")
    with pytest.raises(ConfigError, match="第 1 行"):
        ConfigParser(str(broken_json))


def test_validation_errors(write_config):
    with pytest.raises(ConfigError, match="model"):
        ConfigParser(str(write_config({"profile": {}})))
    with pytest.raises(ConfigError, match="evans.radius"):
        ConfigParser(str(write_config({"model": {"preset": "burgers_embedding"}, "evans": {"radius": -1.0}})))
    with pytest.raises(ConfigError, match="pipeline.stages"):
        ConfigParser(str(write_config({"model": {"preset": "burgers_embedding"},
                                       "pipeline": {"stages": ["evans", "plot"]}})))
    with pytest.raises(ConfigError, match="未知的内置系统"):
        ConfigParser(str(write_config({"model": {"preset": "no_such_system"}})))
    with pytest.raises(ConfigError):
        ConfigParser(str(write_config({"model": {"preset": "burgers_embedding", "colour": "red"}})))


def test_update_and_save(write_config, tmp_path):
    parser = ConfigParser(str(write_config({"model": {"preset": "burgers_embedding"}})))
    before = parser.config_hash()
    parser.update_config("simulation.h", 0.25)
    assert parser.get_run_config().simulation.h == 0.25
    assert parser.config_hash() != before

    with pytest.raises(ConfigError):
        parser.update_config("simulation.h", -1.0)
    assert parser.get("simulation.h") == 0.25

    target = tmp_path / "saved" / "copy.json"
    parser.save_config(str(target))
    assert json.loads(target.read_text(encoding="utf-8"))["simulation"]["h"] == 0.25
    parser.save_config()
    assert yaml.safe_load(parser.get_config_path().read_text(encoding="utf-8"))["simulation"]["h"] == 0.25


def test_config_hash_ignores_key_order(write_config):
    first = ConfigParser(str(write_config({"model": {"preset": "burgers_embedding"}, "simulation": {"h": 0.5}},
                                          "a.yaml")))
    second = ConfigParser(str(write_config({"simulation": {"h": 0.5}, "model": {"preset": "burgers_embedding"}},
                                           "b.yaml")))
    assert first.config_hash() == second.config_hash()


def test_complex_and_p_parsing():
    resolvent = ResolventConfig(lambdas=[[1.0, 2.0], "0.5+1i", 3])
    assert resolvent.lambdas == [1 + 2j, 0.5 + 1j, 3 + 0j]
    simulation = SimulationConfig(p_list=[1, "Infinity", 2.5])
    assert simulation.p_list == [1.0, math.inf, 2.5]
    with pytest.raises(ValueError):
        SimulationConfig(p_list=[0.5])
    with pytest.raises(ValueError):
        ResolventConfig(low_frequency=[1.0, 0.1])
