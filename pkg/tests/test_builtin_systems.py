import json

import pytest

from data.builtin_systems import DEFAULT_SYSTEMS, BuiltinSystems
from utils.exceptions import ConfigError


def test_shipped_catalog_lists_presets():
    names = BuiltinSystems().list_systems()
    for name in ("isentropic_inflow", "isentropic_outflow", "burgers_embedding", "linear_coupled",
                 "linear_decoupled"):
        assert name in names


def test_resolve_merges_params():
    systems = BuiltinSystems()
    resolved = systems.resolve({"preset": "isentropic_inflow", "params": {"viscosity": 2.0},
                                "u_boundary": None})
    assert resolved["name"] == "isentropic_inflow"
    assert resolved["params"]["viscosity"] == 2.0
    assert resolved["params"]["gamma"] == 1.4
    assert resolved["u_boundary"] == [0.9, 0.1]
    assert "description" not in resolved
    # 深拷贝, 目录本身不受影响
    assert systems.get_system("isentropic_inflow")["params"]["viscosity"] == 1.0


def test_resolve_without_preset():
    resolved = BuiltinSystems().resolve({"kind": "linear", "flux_matrix": [[1.0]]})
    assert resolved["name"] == "linear"


def test_unknown_system():
    with pytest.raises(ConfigError):
        BuiltinSystems().get_system("euler_3d")


def test_missing_catalog_is_created(tmp_path):
    path = tmp_path / "catalog" / "systems.json"
    systems = BuiltinSystems(str(path))
    assert systems.list_systems() == sorted(DEFAULT_SYSTEMS)
    assert json.loads(path.read_text(encoding="utf-8"))["systems"].keys() == DEFAULT_SYSTEMS.keys()


def test_broken_catalog(tmp_path):
    path = tmp_path / "systems.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        BuiltinSystems(str(path))
