"""Sybil-resistant bootstrapping of anonymity services on a host blockchain.

Subpackages and modules:

- ``wire``: bit-exact OP_RETURN message codec
- ``pow``: advertisement proof of work (solve/verify, pluggable schemes)
- ``hostchain``: simulated weight-limited host blockchain
- ``pulse``: pulse windows, message validation, state derivation
- ``election``: request aggregation, seeded committee election
- ``connector``: handover authentication, circuits, service bootstrap
- ``experiments``: infiltration robustness, footprint, and fee studies
- ``_kernels``: compiled/pure hashing and shuffle kernels
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
