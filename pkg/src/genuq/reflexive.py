"""Self-assessment scores ingested from the record.

These estimators are produced upstream by prompting the model about its own
answer; the record stores the outcome (a log-probability of the "True"
option, a verbalized confidence, or repeated yes/no samples) and the scores
here just flip it into an uncertainty.
"""

from __future__ import annotations

import math

from .diversity import bb_ptrue
from .errors import MissingPTrue, MissingSampleLogprobs, MissingVerbalized
from .records import GenerationRecord

__all__ = ["ptrue", "verbalized", "bb_ptrue_from_samples"]


def ptrue(record: GenerationRecord) -> float:
    """One minus the probability of the "True" option for the whole answer."""
    if record.ptrue_logprob is None:
        raise MissingPTrue("record carries no ptrue_logprob")
    return 1.0 - math.exp(record.ptrue_logprob)


def verbalized(record: GenerationRecord) -> float:
    """One minus the confidence the model verbalized for its answer."""
    if record.verbalized_confidence is None:
        raise MissingVerbalized("record carries no verbalized_confidence")
    return 1.0 - record.verbalized_confidence


def bb_ptrue_from_samples(record: GenerationRecord) -> float:
    """Black-box self-check: the samples are repeated True/False answers and
    the score is the relative frequency of everything but "true"."""
    if not record.samples:
        raise MissingSampleLogprobs("record has no samples")
    true_count = sum(
        1 for s in record.samples if s.text.strip().casefold() == "true"
    )
    return bb_ptrue(true_count, len(record.samples))
