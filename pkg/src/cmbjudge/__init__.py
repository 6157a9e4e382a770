"""Online judge that scores submissions by wall time, energy, and EDP."""

__version__ = "0.1.0"
