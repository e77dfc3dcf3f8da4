"""Backend test package."""
