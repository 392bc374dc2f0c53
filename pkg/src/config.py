# src/config.py
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="CMVNO_",
        case_sensitive=False,
        extra="ignore",
    )

    # Server
    host: str = "0.0.0.0"
    port: int = 8000
    debug: bool = False

    # Logging
    log_level: str = "INFO"

    # Experiments
    output_dir: str = "results"
    max_workers: int = 1
    default_seed: int = 2024

    # Pricing
    price_grid_steps: int = 10_000

    # Exhaustive search caps
    selection_oracle_max_channels: int = 16
    assignment_oracle_max_channels: int = 6
    assignment_oracle_max_queues: int = 3
    exact_assignment_max_maps: int = 64
    markov_exhaustive_max_sensing: int = 16


settings = Settings()
