"""Performance models for GKP-qubit one-way quantum repeaters."""

__version__ = "0.1.0"
