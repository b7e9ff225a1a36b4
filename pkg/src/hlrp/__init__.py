"""Low-rank PINNs with hypernetwork-generated diagonal coefficients."""

__version__ = "0.1.0"
