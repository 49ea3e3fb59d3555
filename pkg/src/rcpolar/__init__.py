"""Rate-compatible punctured polar codes with circular-buffer rate matching, BICM and HARQ."""

__version__ = "0.1.0"
