import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Settings:
    """Process-level settings.

    Only ambient concerns live here. Numeric behaviour is configured through
    NumericConfig and `--set` overrides so an invocation is reproducible from
    its command line alone.
    """

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "WARNING")
    LOG_DIR: str = os.getenv("LOG_DIR", "./logs")
    LOG_TO_FILE: bool = os.getenv("LOG_TO_FILE", "False").lower() == "true"

    # Monte-Carlo defaults for the validate command
    DEFAULT_SEED: int = int(os.getenv("DEFAULT_SEED", "20240101"))
    DEFAULT_MC_SAMPLES: int = int(os.getenv("DEFAULT_MC_SAMPLES", "1000000"))


settings = Settings()
