"""Black-box auditing of Renyi differential privacy claims."""

__version__ = "0.1.0"
