"""Verification reports shared by every check."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any


@dataclass
class VerificationReport:
    """Outcome of one check over many cases.

    ``worst_margin`` is the smallest ``allowed - observed`` seen over all cases;
    a negative value means at least one violation.
    """

    check: str
    parameters: dict[str, Any] = field(default_factory=dict)
    n_cases: int = 0
    n_violations: int = 0
    worst_margin: float = math.inf
    wall_time: float = 0.0
    details: dict[str, Any] = field(default_factory=dict)
    violations: list[dict[str, Any]] = field(default_factory=list)
    _started: float = field(default_factory=time.perf_counter, repr=False)

    # keep the violation list short in JSON output
    MAX_LISTED = 20

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def record(self, observed: float, allowed: float, **context: Any) -> bool:
        """Count one case; returns True when it holds."""
        self.n_cases += 1
        margin = allowed - observed
        if math.isnan(margin):
            margin = -math.inf
        self.worst_margin = min(self.worst_margin, margin)
        if margin < 0:
            self.n_violations += 1
            if len(self.violations) < self.MAX_LISTED:
                self.violations.append(
                    {"observed": observed, "allowed": allowed, **context}
                )
            return False
        return True

    def merge(self, other: VerificationReport) -> None:
        self.n_cases += other.n_cases
        self.n_violations += other.n_violations
        self.worst_margin = min(self.worst_margin, other.worst_margin)
        room = self.MAX_LISTED - len(self.violations)
        self.violations.extend(other.violations[: max(room, 0)])

    def finish(self) -> VerificationReport:
        self.wall_time = time.perf_counter() - self._started
        return self

    def as_dict(self) -> dict[str, Any]:
        margin = self.worst_margin
        return {
            "check": self.check,
            "parameters": self.parameters,
            "n_cases": self.n_cases,
            "n_violations": self.n_violations,
            "worst_margin": None if math.isinf(margin) else margin,
            "wall_time": round(self.wall_time, 4),
            "details": self.details,
            "violations": self.violations,
        }
