"""Multi-interest multi-round conversational recommendation lab."""
__version__ = "0.1.0"
