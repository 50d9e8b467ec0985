"""Configuration module."""
from .harness_config import HarnessConfig

__all__ = ['HarnessConfig']
