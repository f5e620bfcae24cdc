"""Multi-task dual-encoder candidate retrieval for response selection."""

__version__ = "0.1.0"
