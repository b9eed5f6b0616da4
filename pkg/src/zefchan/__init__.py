"""Adaptive zero-error communication over discrete memoryless channels with feedback."""

__version__ = "0.1.0"
