"""Homodyne detection of fiber-transmitted squeezed light with a phase-locked real local oscillator."""

__version__ = "0.1.0"
