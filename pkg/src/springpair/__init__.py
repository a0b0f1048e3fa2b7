"""Saddle point search with a climbing spring pair."""
from .core import SpringPair, SpringPairError
from .spm import SaddleResult, SpmConfig, Status, run

__all__ = ["SpringPair", "SpringPairError", "SaddleResult", "SpmConfig", "Status", "run"]
__version__ = "0.1.0"
