"""portanet: a single-source, backend-switchable mini deep-learning framework."""

__version__ = "0.1.0"
