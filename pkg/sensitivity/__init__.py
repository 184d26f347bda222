"""Sensitivity package for Sobol variance-based analysis."""
