"""Frame-based erasure codes for distributed matrix-vector multiplication."""

__version__ = "0.1.0"
