"""Transformer fine-tuning adapter for the betkit trainer protocol."""

__version__ = "0.1.0"
