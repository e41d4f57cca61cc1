"""Desk-scale AUV command-and-control stack.

A deterministic, seeded reconstruction of a survey mission: simulated
vehicles, a lossy half-duplex acoustic channel, a TCP fan-out relay node,
and a shore-side C2 service with a natural-language chat interface.
"""

__version__ = "0.1.0"
