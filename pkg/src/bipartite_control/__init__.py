"""Time-optimal control and stabilisation of entanglement in bipartite systems."""
__version__ = "0.1.0"
