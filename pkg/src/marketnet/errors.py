"""Exception types raised by marketnet."""
from __future__ import annotations

import numpy as np


class MarketNetError(Exception):
    """Base class for marketnet failures."""


class ConvergenceError(MarketNetError):
    """An iterative solver stopped before meeting its tolerance.

    ``iterate`` holds the last (or best) iterate and ``residual`` the
    convergence measure at exit.
    """

    def __init__(self, message: str, iterate: np.ndarray | None = None, residual: float = float("nan")):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


class MissingArtifactError(MarketNetError):
    """A stage input produced by an upstream subcommand is absent."""
