"""Background package containing the neural-stochastic background trader."""
