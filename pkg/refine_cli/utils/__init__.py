"""Utility modules for the refinement workbench."""

from .config import env_overrides, load_user_config

__all__ = ["env_overrides", "load_user_config"]
