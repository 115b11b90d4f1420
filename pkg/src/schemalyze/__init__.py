"""Static analysis of rule-defined database schemas."""

__version__ = "0.1.0"
