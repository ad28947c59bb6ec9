"""Configuration package for the Ising spinor toolkit"""

from .settings import Settings, settings

__all__ = ["Settings", "settings"]
