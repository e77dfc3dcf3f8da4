"""Configuration loading and built-in presets."""

from backend.app.config.loader import PRESET_NAMES, load_config, output_dir

__all__ = ["PRESET_NAMES", "load_config", "output_dir"]
