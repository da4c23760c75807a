"""Feature learning in two-layer networks on dictionary-structured data."""
__version__ = "0.1.0"
