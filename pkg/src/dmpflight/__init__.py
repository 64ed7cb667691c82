"""Dynamic movement primitives with contraction-based coupling and a 3DOF helicopter simulator."""
__version__ = "0.1.0"
