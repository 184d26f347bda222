"""Matching package containing the limit order book."""
