"""Non-Markovian dynamics of open systems in fermionic baths."""

__version__ = "0.1.0"
