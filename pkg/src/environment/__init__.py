# Spectral densities, occupations and environment parameterisation
