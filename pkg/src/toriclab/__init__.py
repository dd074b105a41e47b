"""Numerical laboratory for geodesic rays, test curves and quantized energies in toric and Hermitian models."""
__version__ = "0.1.0"
