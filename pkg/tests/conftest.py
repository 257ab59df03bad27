"""
公共夹具
"""
import copy
import logging
from pathlib import Path
from typing import Any, Dict

import pytest

from spinproc.config import config
from spinproc.models import TWO_PI
from spinproc.specs import ExperimentConfig
from spinproc.spin_model import make_cluster

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = REPO_ROOT / "configs"

# 两个互不耦合的自旋，谱线在 500 Hz 与 1000 Hz；每次模拟只需几千步 4x4 运算
MINI_CONFIG: Dict[str, Any] = {
    "name": "mini",
    "cluster": {"offsets_hz": [500.0, 1000.0]},
    "band": {"f_start": 500.0, "delta_f": 500.0, "n_bits": 2},
    "pulse": {
        "write_amplitude_hz": 10.0,
        "write_duration_ms": 50.0,
        "erase_amplitude_hz": 10.0,
        "erase_duration_ms": 50.0,
    },
    "acquisition": {"n_samples": 128, "dwell_s": 2e-4},
    "seed": 11,
}


@pytest.fixture(autouse=True)
def reset_config(tmp_path, monkeypatch):
    """每个测试使用默认配置，不读取工作目录下的 config.json"""
    monkeypatch.setenv("SPINPROC_CONFIG", str(tmp_path / "absent-config.json"))
    config.reset()
    yield
    config.reset()
    # CLI 测试中 setup_logging 绑定的是已关闭的捕获流
    logging.getLogger().handlers.clear()


@pytest.fixture
def mini_dict() -> Dict[str, Any]:
    return copy.deepcopy(MINI_CONFIG)


@pytest.fixture
def mini_config(mini_dict) -> ExperimentConfig:
    return ExperimentConfig.model_validate(mini_dict)


@pytest.fixture
def mini_config_path(tmp_path, mini_config) -> Path:
    path = tmp_path / "mini.json"
    path.write_bytes(mini_config.dump_json())
    return path


@pytest.fixture
def reference_config_path() -> Path:
    return CONFIG_DIR / "desk_reference.json"


@pytest.fixture
def three_spin_cluster():
    """一般位置的三自旋集群 (rad/s)"""
    offsets = [TWO_PI * f for f in (-700.0, 170.0, 900.0)]
    d12, d23, d13 = TWO_PI * 60.0, TWO_PI * 40.0, TWO_PI * 15.0
    couplings = [[0.0, d12, d13], [d12, 0.0, d23], [d13, d23, 0.0]]
    return make_cluster(offsets, couplings)
