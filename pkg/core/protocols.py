"""Structural typing protocols for duck-typed hypotheses.

Several unrelated objects can be evaluated on ordered pairs of points: pairwise
kernel expansions, lifted univariate expansions, the pairwise regression
function of a measure and differences of these. Measures and the spectral
backend only rely on the method below.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class PairwiseEvaluable(Protocol):
    """Anything that can be evaluated on a stack of pairs of shape ``(n, 2, d)``."""

    def evaluate_pairs(self, pairs: np.ndarray) -> np.ndarray: ...
