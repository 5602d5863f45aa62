"""pairml: two-server private ML inference with simulated trusted hardware."""

from .params import ProtocolParams

__all__ = ["ProtocolParams"]
__version__ = "0.1.0"
