"""Y00 quantum stream cipher simulator and fast-correlation-attack bound toolkit."""

__version__ = "0.1.0"
