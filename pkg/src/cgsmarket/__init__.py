"""Agent-based simulator of culturally mediated valuation."""

__version__ = "0.1.0"
