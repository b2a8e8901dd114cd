# Prethermal - hierarchical bath qubit simulator
__version__ = "0.3.0"
