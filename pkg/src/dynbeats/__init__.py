"""Transmission of short weak pulses through waveguide-coupled atomic arrays."""

__version__ = "0.1.0"
