"""critwave: numerics for the radial focusing quintic wave equation in 3D."""
__version__ = "0.1.0"
