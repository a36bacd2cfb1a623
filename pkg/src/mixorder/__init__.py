"""Order selection for finite mixture models by penalized likelihood."""

__version__ = "0.1.0"
