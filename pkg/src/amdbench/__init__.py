"""Desk-scale benchmark harness for ML-based Android malware detector pipelines."""

__version__ = "0.1.0"
