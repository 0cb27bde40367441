"""gfinv: exact inference and occupation-invariant synthesis for probabilistic loops."""

__version__ = "0.1.0"
