"""Vixify: stake-slotted VDF mining with VRF-personalised difficulty."""

__version__ = "0.1.0"
