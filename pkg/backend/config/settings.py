"""
Configuration settings for the Ising spinor toolkit
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
env_file = Path(__file__).parent.parent / ".env"
if env_file.exists():
    load_dotenv(env_file)


class Settings:
    """Application settings loaded from environment variables"""

    # Server Configuration
    HOST: str = os.getenv("HOST", "0.0.0.0")
    PORT: int = int(os.getenv("PORT", "8000"))
    DEBUG: bool = os.getenv("DEBUG", "false").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_JSON: bool = os.getenv("LOG_JSON", "false").lower() == "true"

    # CORS Settings
    ALLOWED_ORIGINS: str = os.getenv("ALLOWED_ORIGINS", "http://localhost:3000,http://localhost:8080")

    # Output
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "./outputs")
    FLOAT_DIGITS: int = int(os.getenv("FLOAT_DIGITS", "17"))

    # Enumeration
    MAX_CYCLE_DIM: int = int(os.getenv("MAX_CYCLE_DIM", "26"))
    RAW_FILTER_MAX_EDGES: int = int(os.getenv("RAW_FILTER_MAX_EDGES", "12"))
    CUT_STRATEGY: str = os.getenv("CUT_STRATEGY", "shortest")

    # Solver
    SOLVER_RESIDUAL_TOL: float = float(os.getenv("SOLVER_RESIDUAL_TOL", "1e-10"))
    SOLVER_ZERO_TOL: float = float(os.getenv("SOLVER_ZERO_TOL", "1e-12"))
    DENSE_FALLBACK_UNKNOWNS: int = int(os.getenv("DENSE_FALLBACK_UNKNOWNS", "2000"))
    ORACLE_TOL: float = float(os.getenv("ORACLE_TOL", "1e-8"))
    PROPERTY_TOL: float = float(os.getenv("PROPERTY_TOL", "1e-9"))

    # Continuum
    THETA_RESIDUAL_TOL: float = float(os.getenv("THETA_RESIDUAL_TOL", "1e-12"))
    THETA_COLLISION_TOL: float = float(os.getenv("THETA_COLLISION_TOL", "1e-9"))
    THETA_CONDITION_MAX: float = float(os.getenv("THETA_CONDITION_MAX", "1e12"))
    PFAFFIAN_DENOMINATOR_MIN: float = float(os.getenv("PFAFFIAN_DENOMINATOR_MIN", "1e-14"))
    HM_GRID: int = int(os.getenv("HM_GRID", "64"))

    # Harness
    CATALOGUE_WORKERS: int = int(os.getenv("CATALOGUE_WORKERS", "1"))
    CONVERGENCE_WORKERS: int = int(os.getenv("CONVERGENCE_WORKERS", "1"))


# Global settings instance
settings = Settings()
