"""Battery RUL classification and charging-automation toolkit."""

__version__ = "0.1.0"
