# config.py
from dataclasses import dataclass
import logging
import os

from dotenv import load_dotenv

from errors import ConfigError

_log = logging.getLogger("wsi_entropy")


@dataclass
class PipelineConfig:
    """
    Pipeline configuration.

    Values come from environment variables (optionally a `.env` file) and
    act as defaults for the command-line flags; any flag given on the
    command line wins.
    """
    K: int = 10
    DIM: int = 30
    SEED: int = 0
    RESTARTS: int = 10
    TOL: float = 1e-6
    MAX_ITER: int = 300
    SLICE_SIZE: int = 5
    SEEDS: int = 20
    EPOCHS: int = 30
    LR: float = 0.01
    BATCH: int = 32
    OPTIMIZER: str = "adam"
    PCA_FIT: str = "target"
    JOBS: int = 1
    OUT_DIR: str = "out"
    LOG_LEVEL: str = "INFO"

    def validate(self) -> "PipelineConfig":
        """
        Check every knob against the preconditions of the module using it.

        Raises:
            ConfigError: on the first invalid value.
        """
        positive = {
            "K": self.K,
            "DIM": self.DIM,
            "RESTARTS": self.RESTARTS,
            "MAX_ITER": self.MAX_ITER,
            "SLICE_SIZE": self.SLICE_SIZE,
            "SEEDS": self.SEEDS,
            "BATCH": self.BATCH,
            "JOBS": self.JOBS,
        }
        for name, value in positive.items():
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.EPOCHS < 0:
            raise ConfigError(f"EPOCHS must be >= 0, got {self.EPOCHS}")
        if not self.TOL > 0:
            raise ConfigError(f"TOL must be > 0, got {self.TOL}")
        if not self.LR > 0:
            raise ConfigError(f"LR must be > 0, got {self.LR}")
        if not 0 <= self.SEED < 2**64:
            raise ConfigError(f"SEED must be an unsigned 64-bit integer, got {self.SEED}")
        if self.OPTIMIZER not in ("sgd", "adam"):
            raise ConfigError(f"OPTIMIZER must be sgd or adam, got {self.OPTIMIZER!r}")
        if self.PCA_FIT not in ("target", "both"):
            raise ConfigError(f"PCA_FIT must be target or both, got {self.PCA_FIT!r}")
        return self


def _env_number(name: str, default, cast):
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        _log.warning("ignoring malformed %s=%r, using %r", name, raw, default)
        return default


def load_config() -> PipelineConfig:
    """
    Load configuration from environment variables.

    Expected environment variables (all optional):
      - CE_K, CE_DIM, CE_SEED, CE_RESTARTS, CE_MAX_ITER, CE_SLICE_SIZE,
        CE_SEEDS, CE_EPOCHS, CE_BATCH, CE_JOBS   (integers)
      - CE_TOL, CE_LR                            (reals)
      - CE_OPTIMIZER  (sgd | adam)
      - CE_PCA_FIT    (target | both)
      - CE_OUT_DIR    (output directory, defaults to "out")
      - CE_LOG_LEVEL  (defaults to "INFO")
    """
    load_dotenv()
    defaults = PipelineConfig()

    return PipelineConfig(
        K=_env_number("CE_K", defaults.K, int),
        DIM=_env_number("CE_DIM", defaults.DIM, int),
        SEED=_env_number("CE_SEED", defaults.SEED, int),
        RESTARTS=_env_number("CE_RESTARTS", defaults.RESTARTS, int),
        TOL=_env_number("CE_TOL", defaults.TOL, float),
        MAX_ITER=_env_number("CE_MAX_ITER", defaults.MAX_ITER, int),
        SLICE_SIZE=_env_number("CE_SLICE_SIZE", defaults.SLICE_SIZE, int),
        SEEDS=_env_number("CE_SEEDS", defaults.SEEDS, int),
        EPOCHS=_env_number("CE_EPOCHS", defaults.EPOCHS, int),
        LR=_env_number("CE_LR", defaults.LR, float),
        BATCH=_env_number("CE_BATCH", defaults.BATCH, int),
        OPTIMIZER=os.getenv("CE_OPTIMIZER", defaults.OPTIMIZER),
        PCA_FIT=os.getenv("CE_PCA_FIT", defaults.PCA_FIT),
        JOBS=_env_number("CE_JOBS", defaults.JOBS, int),
        OUT_DIR=os.getenv("CE_OUT_DIR", defaults.OUT_DIR),
        LOG_LEVEL=os.getenv("CE_LOG_LEVEL", defaults.LOG_LEVEL).upper(),
    )


config = load_config()
