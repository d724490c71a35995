# Quantum walks with position-dependent coins
__version__ = "1.0.0"
