"""Storage package for the run store, CSV export and charts."""
