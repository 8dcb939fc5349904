"""Static compliance analysis for Android Auto media apps."""

__version__ = "0.1.0"
