"""Repeated spectrum auctions with learning for cognitive radio networks."""

__version__ = "0.1.0"
