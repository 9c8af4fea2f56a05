"""Three countable-state processes that escape to infinity under an adversary."""

from . import example1, example2, example3

__all__ = ["example1", "example2", "example3"]
