"""
测试公共夹具与闭式解
"""

from pathlib import Path

import numpy as np
import pytest
import yaml

from core.hp_model import Model, ModelFactory
from core.profile_solver import solve_profile
from data.builtin_systems import BuiltinSystems

ROOT = Path(__file__).resolve().parent.parent


def make_model(preset: str, **overrides) -> Model:
    definition = BuiltinSystems().resolve({"preset": preset, **overrides})
    return ModelFactory.create_model(definition)


def heat_kernel_dirichlet(x, t, y, a: float, b: float):
    """u_t + a u_x = b u_xx, u(0, t) = 0 的 Green 函数 (像源法)"""
    x = np.asarray(x, dtype=float)
    scale = 1.0 / np.sqrt(4 * np.pi * b * t)
    direct = np.exp(-(x - y - a * t) ** 2 / (4 * b * t))
    image = np.exp(-a * y / b) * np.exp(-(x + y - a * t) ** 2 / (4 * b * t))
    return scale * (direct - image)


def scalar_resolvent(lam: complex, x: float, y: float, a: float, b: float) -> complex:
    """(lam - L) 的核, L u = -a u' + b u'', u(0) = 0"""
    root = np.sqrt(a ** 2 + 4 * b * lam + 0j)
    mu_plus, mu_minus = (a + root) / (2 * b), (a - root) / (2 * b)
    mu_s = mu_minus if x > y else mu_plus
    g = (np.exp(mu_s * (x - y)) - np.exp(mu_minus * x - mu_plus * y)) / (b * (mu_minus - mu_plus))
    return complex(-g)


def transport_resolvent(lam: complex, x: float, y: float, speed: float = 1.0) -> complex:
    """u_t + c u_x = 0, u(0) = 0 的预解核"""
    if x <= y:
        return 0j
    return complex(np.exp(-lam * (x - y) / speed) / speed)


@pytest.fixture(scope="session")
def isentropic_inflow():
    model = make_model("isentropic_inflow")
    return model, solve_profile(model)


@pytest.fixture(scope="session")
def isentropic_outflow():
    model = make_model("isentropic_outflow")
    return model, solve_profile(model)


@pytest.fixture(scope="session")
def burgers():
    model = make_model("burgers_embedding")
    return model, solve_profile(model)


@pytest.fixture(scope="session")
def linear_coupled():
    model = make_model("linear_coupled")
    return model, solve_profile(model)


@pytest.fixture(scope="session")
def linear_decoupled():
    model = make_model("linear_decoupled")
    return model, solve_profile(model)


@pytest.fixture(scope="session")
def linear_decoupled_outflow():
    model = make_model("linear_decoupled_outflow")
    return model, solve_profile(model)


@pytest.fixture
def shipped_config() -> Path:
    return ROOT / "config.yaml"


@pytest.fixture
def write_config(tmp_path):
    """把字典写为 YAML 配置并返回路径"""
    def _write(data, name: str = "config.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data, allow_unicode=True), encoding="utf-8")
        return path

    return _write
