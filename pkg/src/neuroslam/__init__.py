"""Stereo visual SLAM with head-direction and grid-cell attractor networks."""

__version__ = "0.1.0"
