"""Desk-scale simulator for privacy-preserving quantum federated learning."""

from . import cli, condense, data, dp, fed, modelshare, optimizers, qkd, qsim, vqc

__all__ = [
    "cli", "condense", "data", "dp", "fed", "modelshare",
    "optimizers", "qkd", "qsim", "vqc",
]

__version__ = "0.1.0"
