"""Simulation laboratory for device-independent quantum key distribution.

Provides a minimal exact two-qubit simulator, black-box device pairs
(honest and adversarial), the full two-party key-distribution protocol
over an authenticated public transcript, information reconciliation with
exact leakage accounting, Toeplitz and Trevisan privacy amplification,
an eavesdropper battery, and numeric checkers for the quantitative
claims the protocol rests on.
"""

__version__ = "0.1.0"

from . import analysis, devices, eve, extract, protocol, qsim, recon

__all__ = ["analysis", "devices", "eve", "extract", "protocol", "qsim", "recon"]
