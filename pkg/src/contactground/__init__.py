"""Language-guided contact placement: predict, correct, confirm, resolve."""

__version__ = "0.1.0"
