"""Configuration management for convex-jets."""

import os
import configparser
from pathlib import Path
from typing import Optional


class Config:
    """Manages solver defaults stored in ~/.convex_jets_config."""

    DEFAULT_CONFIG_PATH = Path.home() / ".convex_jets_config"
    THREADS_ENV = "CONVEX_JETS_THREADS"

    DEFAULTS = {
        "sampling": {
            "samples": "200",
            "ball_samples": "64",
        },
        "tolerance": {
            "feasibility": "1e-12",
            "exact": "1e-9",
            "finite_difference": "1e-5",
            "lipschitz": "1e-3",
            "convexity": "1e-10",
        },
        "envelope": {
            "backend": "direct",
            "grid_resolution": "513",
            "grid_resolution_3d": "65",
            "inner_tol": "1e-10",
            "max_iter": "10000",
            "cross_check": "true",
            "cross_check_points": "64",
        },
        "build": {
            "auto_margin": "0.5",
        },
        "runtime": {
            "threads": "1",
        },
        "logging": {
            "level": "WARNING",
            "run_log": "",
        },
    }

    def __init__(self, config_path: Optional[Path] = None):
        self.config_path = config_path or self.DEFAULT_CONFIG_PATH
        self.config = configparser.ConfigParser()
        self._load_defaults()

    def _load_defaults(self):
        """Load default configuration values."""
        for section, values in self.DEFAULTS.items():
            self.config[section] = values

    def load(self) -> bool:
        """Load configuration from file. Returns True if file exists."""
        if self.config_path.exists():
            self.config.read(self.config_path)
            return True
        return False

    def save(self):
        """Save configuration to file with owner-only permissions."""
        self.config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.config_path, "w") as f:
            self.config.write(f)
        os.chmod(self.config_path, 0o600)

    def get(self, section: str, key: str, fallback: str = "") -> str:
        """Get a configuration value."""
        return self.config.get(section, key, fallback=fallback)

    def set(self, section: str, key: str, value: str):
        """Set a configuration value."""
        if section not in self.config:
            self.config[section] = {}
        self.config[section][key] = value

    def get_int(self, section: str, key: str, fallback: int = 0) -> int:
        """Get a configuration value as integer."""
        try:
            return int(self.get(section, key, str(fallback)))
        except ValueError:
            return fallback

    def get_float(self, section: str, key: str, fallback: float = 0.0) -> float:
        """Get a configuration value as float."""
        try:
            return float(self.get(section, key, repr(fallback)))
        except ValueError:
            return fallback

    def get_bool(self, section: str, key: str, fallback: bool = False) -> bool:
        return self.get(section, key, "true" if fallback else "false").lower() in ("1", "true", "yes")

    @property
    def samples(self) -> int:
        return max(self.get_int("sampling", "samples", 200), 1)

    @property
    def ball_samples(self) -> int:
        return max(self.get_int("sampling", "ball_samples", 64), 1)

    @property
    def feasibility_tol(self) -> float:
        return abs(self.get_float("tolerance", "feasibility", 1e-12))

    @property
    def exact_tol(self) -> float:
        return abs(self.get_float("tolerance", "exact", 1e-9))

    @property
    def finite_difference_tol(self) -> float:
        return abs(self.get_float("tolerance", "finite_difference", 1e-5))

    @property
    def lipschitz_tol(self) -> float:
        return abs(self.get_float("tolerance", "lipschitz", 1e-3))

    @property
    def convexity_tol(self) -> float:
        return abs(self.get_float("tolerance", "convexity", 1e-10))

    @property
    def envelope_backend(self) -> str:
        backend = self.get("envelope", "backend", "direct")
        return backend if backend in ("direct", "grid") else "direct"

    @property
    def grid_resolution(self) -> int:
        return max(self.get_int("envelope", "grid_resolution", 513), 2)

    @property
    def grid_resolution_3d(self) -> int:
        # 3D grids are memory bound; keep them coarse
        return max(min(self.get_int("envelope", "grid_resolution_3d", 65), 257), 2)

    @property
    def inner_tol(self) -> float:
        return abs(self.get_float("envelope", "inner_tol", 1e-10))

    @property
    def max_iter(self) -> int:
        return max(self.get_int("envelope", "max_iter", 10000), 1)

    @property
    def cross_check(self) -> bool:
        return self.get_bool("envelope", "cross_check", True)

    @property
    def cross_check_points(self) -> int:
        return max(self.get_int("envelope", "cross_check_points", 64), 1)

    @property
    def auto_margin(self) -> float:
        margin = self.get_float("build", "auto_margin", 0.5)
        if not 0.0 < margin < 1.0:
            return 0.5
        return margin

    @property
    def threads(self) -> int:
        env = os.environ.get(self.THREADS_ENV, "")
        if env.strip():
            try:
                return max(int(env), 1)
            except ValueError:
                pass
        return max(self.get_int("runtime", "threads", 1), 1)

    @property
    def log_level(self) -> str:
        level = self.get("logging", "level", "WARNING").upper()
        valid = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        return level if level in valid else "WARNING"

    @property
    def run_log(self) -> Optional[Path]:
        path = self.get("logging", "run_log", "").strip()
        return Path(path).expanduser() if path else None
