"""Stylized facts and interaction criteria computed from session logs."""
