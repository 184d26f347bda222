"""Simulation package containing the kernel, exchange and oracle."""
