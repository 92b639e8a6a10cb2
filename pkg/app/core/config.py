from functools import lru_cache
from typing import Annotated, Literal

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.exceptions import ConfigError
from app.models.schemas import CostParams, FragmentStrategy, RefMode, StoreConfig


class Settings(BaseSettings):
    BLOCK_SIZE: Annotated[int, Field(gt=0)] = 65536
    SEGMENT_THRESHOLD: Annotated[int, Field(gt=0)] = 8192
    SEGMENT_RESERVE_FACTOR: float = 1.5
    FRAGMENT_STRATEGY: FragmentStrategy = FragmentStrategy.HETEROGENEOUS
    REF_MODE: RefMode = RefMode.INDIRECT
    LOCALITY: bool = False

    TAU: float = 0.2
    KAPPA: float = 1.0
    DEFAULT_CARDINALITY: float = 1000.0
    DEFAULT_DEGREE: float = 1.0

    CHUNK_SIZE: Annotated[int, Field(gt=0)] = 2048
    OUTPUT_FORMAT: Literal["csv", "tsv", "table"] = "csv"
    LOG_LEVEL: str = "WARNING"

    BENCH_SEED: int = 7
    BENCH_TRIANGLE_EDGES: int = 100_000
    BENCH_REPEAT: Annotated[int, Field(gt=0)] = 5

    model_config = SettingsConfigDict(env_file=".env", env_prefix="RG_", extra="ignore")

    def store_config(self) -> StoreConfig:
        """
        Builds the validated storage configuration.

        Raises:
            ConfigError: If the sizes violate the store invariants.
        """
        try:
            return StoreConfig(
                block_size=self.BLOCK_SIZE,
                segment_threshold=self.SEGMENT_THRESHOLD,
                segment_reserve_factor=self.SEGMENT_RESERVE_FACTOR,
                strategy=self.FRAGMENT_STRATEGY,
                ref_mode=self.REF_MODE,
                locality=self.LOCALITY,
            )
        except ValidationError as e:
            raise ConfigError(f"invalid store configuration: {e.errors()[0]['msg']}") from e

    def cost_params(self) -> CostParams:
        try:
            return CostParams(tau=self.TAU, kappa=self.KAPPA)
        except ValidationError as e:
            raise ConfigError(f"invalid cost parameters: {e.errors()[0]['msg']}") from e


@lru_cache
def get_settings() -> Settings:
    return Settings()
