"""Discretized incidence-geometry laboratory."""

from inclab.geometry import (  # noqa: F401
    Ball,
    Configuration,
    Scale,
    Tube,
    ball_in_ball,
    ball_in_square,
    ball_tube_intersects,
    essential_overlap,
    tube_angle,
    tube_in_query_tube,
)

__version__ = "0.1.0"
