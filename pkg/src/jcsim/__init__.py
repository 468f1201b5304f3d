"""Shared-waveform joint communication and sensing simulator."""

__version__ = "0.1.0"
