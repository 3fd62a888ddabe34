from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Output
    output_dir: str = "results"

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # table1 command
    table1_refinements: int = 6
    table1_p_values: List[float] = [10.0, 50.0, 100.0, 300.0, 500.0]

    # Solver defaults
    default_eps_tol: float = 1e-8
    default_max_outer: int = 5000

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="GRADPEN_",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()
