"""Pseudospectral simulator and diagnostics for the forced thin-film equation
with a spectral Neumann fractional Laplacian,

    u_t + (u^n (I(u))_x)_x = S,   I = -(-Delta)^s,   on (a, b) with Neumann walls.
"""
__version__ = "0.1.0"
