"""Instrumental-variable estimation of causal effects in confounded VAR processes."""

__version__ = "0.1.0"
