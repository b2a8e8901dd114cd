# Prethermal plateau detection and two-environment heat flux
