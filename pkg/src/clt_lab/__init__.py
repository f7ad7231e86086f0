"""Monte Carlo checks of central limit behavior for convex bodies and log-concave laws."""

__version__ = "0.1.0"
