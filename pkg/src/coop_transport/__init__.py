"""Cooperative object transport by mobile manipulators.

Pipeline: STL task monitoring, timed waypoint planning and smoothing,
base footprint optimization, constrained inverse kinematics, PD
tracking control, and a deterministic multi-rate closed-loop
simulation.
"""

__version__ = "0.1.0"
