"""Calibration package for parameter estimation and model training."""
