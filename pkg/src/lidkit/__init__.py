"""Eyelid-angle blink analysis: landmarks to ELA, blinks, blink features and drowsiness."""

__version__ = "0.1.0"
