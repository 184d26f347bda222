"""Agents package containing the strategic trading agents."""
