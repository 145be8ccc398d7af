"""Per-run query accounting with an optional hard budget."""

from __future__ import annotations

import threading

STAGES = ("generator", "selection", "sign")


class BudgetExceededError(Exception):
    """Raised before the query that would cross the budget."""


class QueryLedger:
    """Counts queries per attack stage; charging happens before the query."""

    def __init__(self, budget: int | None = None):
        self.budget = budget
        self._lock = threading.Lock()
        self.counts = {s: 0 for s in STAGES}

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self.counts.values())

    def charge(self, stage: str, n: int = 1) -> None:
        if stage not in self.counts:
            raise ValueError(f"unknown stage {stage!r}")
        with self._lock:
            if self.budget is not None and sum(self.counts.values()) + n > self.budget:
                raise BudgetExceededError(
                    f"budget {self.budget} exhausted at stage {stage}")
            self.counts[stage] += n

    def charger(self, stage: str):
        return lambda n=1: self.charge(stage, n)


def no_charge(n: int = 1) -> None:
    """Stand-in charger for standalone (non-pipeline) use."""
