"""Deep representation learning benchmark for tabular records."""

__version__ = "0.1.0"
