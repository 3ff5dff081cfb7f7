"""Service discovery, context-aware preference prediction and lightweight
trust for mobile social networks in proximity."""

__version__ = "0.1.0"
