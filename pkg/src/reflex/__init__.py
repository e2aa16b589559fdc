"""Reactive goal proposal (DCP-RMP) for a 7-DoF arm, with a deterministic benchmark harness."""

__version__ = "0.1.0"
