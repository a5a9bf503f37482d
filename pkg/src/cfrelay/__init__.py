"""Compress-and-forward relaying over erasure channels with nested LDGM-LDPC codes."""

__version__ = "0.1.0"
