# Glycan combinatorial complexes and higher-order message passing
__version__ = "1.0.0"
