"""
配置管理模块
"""
import os
from pathlib import Path
from typing import Any, Optional

import orjson
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError


class Config(BaseSettings):
    """主配置类"""

    model_config = SettingsConfigDict(
        env_prefix="SPINPROC_",
        env_file=".env",
        extra="ignore",
    )

    # 应用配置
    app_name: str = "SpinProc"
    log_level: str = "INFO"

    # 自旋模型
    max_spins: int = Field(default=12, ge=1, le=14)
    weight_epsilon: float = 1e-12
    freq_epsilon_rel: float = 1e-9  # 相对 ω_loc

    # 传播子
    dt_oversampling: float = 50.0  # dt = 1 / (oversampling · f_max)
    stability_limit: float = 0.1  # dt · (|drive| + ‖H‖) 上限

    # 读出
    threshold_fraction: float = Field(default=0.5, gt=0.0, lt=1.0)
    pad_factor: int = Field(default=4, ge=1)
    noise_floor_factor: float = 3.0

    # 激发区间
    default_kappa: float = Field(default=3.0, ge=1.0)
    default_omega_loc_hz: float = 25000.0

    # 执行
    max_workers: int = Field(default=4, ge=1)


class ConfigManager:
    """配置管理器"""

    _instance: Optional["ConfigManager"] = None
    _config: Config

    def __new__(cls) -> "ConfigManager":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._load_config()
        return cls._instance

    def _load_config(self, config_path: Optional[str] = None) -> None:
        """加载配置"""
        if config_path is None:
            config_path = os.environ.get(
                "SPINPROC_CONFIG",
                str(Path.cwd() / "config.json")
            )

        if os.path.exists(config_path):
            try:
                config_data = orjson.loads(Path(config_path).read_bytes())
                self._config = Config(**config_data)
            except (orjson.JSONDecodeError, ValidationError) as e:
                raise ConfigError(f"配置文件无效: {config_path}: {e}") from e
        else:
            self._config = Config()

    def get_config(self) -> Config:
        """获取配置"""
        return self._config

    def update_config(self, **kwargs: Any) -> None:
        """更新配置"""
        data = self._config.model_dump()
        data.update({k: v for k, v in kwargs.items() if k in data})
        self._config = Config(**data)

    def reset(self, config_path: Optional[str] = None) -> None:
        """重新加载（测试用）"""
        self._load_config(config_path)

    def save_config(self, config_path: str = "config.json") -> None:
        """保存配置"""
        Path(config_path).write_bytes(
            orjson.dumps(
                self._config.model_dump(),
                option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS,
            )
        )


# 全局配置实例
config = ConfigManager()
