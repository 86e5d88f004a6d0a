"""Multi-stage evaluation harness for generated library-based C code."""

__version__ = "0.1.0"
