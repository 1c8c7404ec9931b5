"""Desk-scale intersection driving lab.

A deterministic 2D four-way-intersection simulator with crosswalk
pedestrians, command-conditioned imitation policies trained with an
adaptive multi-task loss, a scripted demonstration expert, a closed-loop
benchmark with failure events and control-quality metrics, and a teleop
server for human demonstrations.
"""

__version__ = "0.1.0"
