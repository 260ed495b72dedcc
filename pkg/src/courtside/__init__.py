"""Keyframe extraction, multi-block video masks and sports-caption metrics."""

__version__ = "0.1.0"
