"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

from typing import Sequence

from .geometry import Ball
from .measure import SelfSimilarMeasure
from .sequences import BallSequence


def check_ball_sequence(X) -> BallSequence:
    """Coerce input to a BallSequence (lists of Balls accepted)."""
    if isinstance(X, BallSequence):
        seq = X
    elif isinstance(X, (list, tuple)) and all(isinstance(b, Ball) for b in X):
        seq = BallSequence(list(X))
    else:
        raise TypeError(
            "expected a BallSequence or a sequence of Ball objects, "
            f"got {type(X).__name__}"
        )
    if not len(seq):
        raise ValueError("empty ball sequence")
    return seq


def check_measure(mu, dim: int | None = None) -> SelfSimilarMeasure:
    if not isinstance(mu, SelfSimilarMeasure):
        raise TypeError(f"expected a SelfSimilarMeasure, got {type(mu).__name__}")
    if dim is not None and mu.dim != dim:
        raise ValueError(
            f"measure dimension {mu.dim} does not match data dimension {dim}"
        )
    return mu


def check_is_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted yet; call fit first"
        )
