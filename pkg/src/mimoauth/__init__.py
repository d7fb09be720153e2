"""Channel-based spoofing detection for MIMO links: channel synthesis, the pairwise test, and grid experiments."""

__version__ = "0.1.0"
