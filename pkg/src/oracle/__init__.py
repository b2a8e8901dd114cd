# Exact finite-mode reference for the environment statistics
