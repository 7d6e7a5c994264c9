"""End-to-end packet delay approximation (AKIA and KIA) with a packet-level simulator."""

__version__ = "0.1.0"
