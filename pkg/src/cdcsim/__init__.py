"""Deterministic discrete-event simulation of clock-domain-crossing FIFOs."""

__version__ = "0.1.0"
