"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """A config or protocol definition violates one of its invariants.

    The message names the offending field or invariant.  Mapped to CLI
    exit code 2.
    """


class ContractError(ValueError):
    """An operation was called with inputs outside its contract."""


class CampaignError(RuntimeError):
    """A campaign could not complete (walltime exceeded, unrecoverable task).

    Carries the partial timeline when one is available.  Mapped to CLI
    exit code 3.
    """

    def __init__(self, message: str, timeline=None):
        super().__init__(message)
        self.timeline = timeline


class PlanRejectedError(CampaignError):
    """An evaluator returned a stage plan the engine refused to apply."""
