"""Ascribing epistemic and subjective uncertainty to symbolic and
connectionist systems."""

__version__ = "0.1.0"
