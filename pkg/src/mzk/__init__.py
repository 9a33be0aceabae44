"""Pseudospectral simulator and verification suite for the 2D modified
Zakharov-Kuznetsov equation in rotated coordinates,
``dv/dt + d_a^3 v + d_b^3 v + (d_a + d_b)(v^3) = 0``."""

__version__ = "0.1.0"
