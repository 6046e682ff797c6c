"""Stimuli-aware visual emotion fusion network at desk scale."""

__version__ = "0.1.0"
