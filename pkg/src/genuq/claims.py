"""Claim-level uncertainty: restricted-span scores and claim-conditioned
probability (CCP).

A claim is a set of output token indices.  The restricted scores run the
exact sequence-level arithmetic over that subset, so a claim spanning the
whole output reproduces the sequence score bit for bit.

CCP inspects, for each claim token, which of its stored top-K alternatives
preserve the claim's meaning.  The comparison unit is the claim text with
the token replaced by the alternative versus the original claim text
(single-space token splicing); the chosen token entails itself by
definition.  Only entail- and contradict-verdict alternatives enter the
probability ratio, so neutral alternatives cannot move the score.
"""

from __future__ import annotations

import enum
import math
from typing import Mapping, Sequence

from .errors import EmptyDenominator, MissingAlternatives, MissingPTrue
from .info_scores import (
    entropy_from_steps,
    msp_from_steps,
    perplexity_from_steps,
    pmi_from_steps,
)
from .records import ClaimSpan, GenerationRecord, TokenStep
from .similarity import SimilarityProvider

__all__ = [
    "NliVerdict",
    "CLAIM_BASES",
    "claim_restricted_score",
    "claim_ptrue",
    "ccp_token",
    "ccp_claim",
    "ccp_sequence",
]


class NliVerdict(enum.Enum):
    ENTAIL = "entail"
    CONTRA = "contra"
    NEUTRAL = "neutral"


CLAIM_BASES = ("msp", "perplexity", "mean_entropy", "max_entropy", "pmi")


def _claim_steps(record: GenerationRecord, claim: ClaimSpan) -> list[TokenStep]:
    if not claim.token_indices:
        raise ValueError("claim has no token indices")
    if claim.token_indices[-1] >= len(record.output):
        raise ValueError("claim index outside the output range")
    return [record.output[i] for i in claim.token_indices]


def claim_restricted_score(record: GenerationRecord, claim: ClaimSpan, base: str) -> float:
    """A sequence-level information score restricted to the claim's tokens."""
    steps = _claim_steps(record, claim)
    if base == "msp":
        return msp_from_steps(steps)
    if base == "perplexity":
        return perplexity_from_steps(steps)
    if base == "mean_entropy":
        return entropy_from_steps(steps, "mean")
    if base == "max_entropy":
        return entropy_from_steps(steps, "max")
    if base == "pmi":
        return pmi_from_steps(steps)
    raise ValueError(f"unknown base {base!r}, expected one of {CLAIM_BASES}")


def claim_ptrue(claim: ClaimSpan) -> float:
    """One minus the probability the model assigned to the claim being true."""
    if claim.ptrue_logprob is None:
        raise MissingPTrue(f"claim {claim.claim_id} carries no ptrue_logprob")
    return 1.0 - math.exp(claim.ptrue_logprob)


def ccp_token(step: TokenStep, verdicts: Mapping[str, NliVerdict]) -> float:
    """Entailing probability mass over entailing-plus-contradicting mass
    among the step's alternatives.  Alternatives without a verdict count as
    neutral and are excluded from both sums."""
    if step.alternatives is None:
        raise MissingAlternatives("step has no stored alternatives")
    numerator = 0.0
    denominator = 0.0
    for token, logprob in step.alternatives:
        verdict = verdicts.get(token, NliVerdict.NEUTRAL)
        if verdict is NliVerdict.NEUTRAL:
            continue
        mass = math.exp(logprob)
        denominator += mass
        if verdict is NliVerdict.ENTAIL:
            numerator += mass
    if denominator <= 0.0:
        raise EmptyDenominator("every alternative was neutral")
    return numerator / denominator


def _ccp_over_indices(
    record: GenerationRecord, indices: Sequence[int], provider: SimilarityProvider
) -> float:
    steps = [record.output[i] for i in indices]
    for i, step in enumerate(steps):
        if step.alternatives is None:
            raise MissingAlternatives(f"claim step {i} has no stored alternatives")
    tokens = [s.token for s in steps]
    original = " ".join(tokens)

    pairs: list[tuple[str, str]] = []
    owners: list[tuple[int, str]] = []
    for pos, step in enumerate(steps):
        for alt_token, _ in step.alternatives:
            if alt_token == step.token:
                continue
            perturbed = " ".join(tokens[:pos] + [alt_token] + tokens[pos + 1 :])
            pairs.append((perturbed, original))
            owners.append((pos, alt_token))
    results = provider.nli_batch(pairs) if pairs else []

    verdict_maps: list[dict[str, NliVerdict]] = [
        {step.token: NliVerdict.ENTAIL} for step in steps
    ]
    for (pos, alt_token), result in zip(owners, results):
        verdict_maps[pos][alt_token] = NliVerdict(result.relation())

    log_product = 0.0
    for step, verdicts in zip(steps, verdict_maps):
        log_product += math.log(ccp_token(step, verdicts))
    return 1.0 - math.exp(log_product)


def ccp_claim(
    record: GenerationRecord, claim: ClaimSpan, provider: SimilarityProvider
) -> float:
    """Claim-conditioned probability score: one minus the product of
    per-token meaning-preserving probability ratios."""
    _claim_steps(record, claim)
    return _ccp_over_indices(record, claim.token_indices, provider)


def ccp_sequence(record: GenerationRecord, provider: SimilarityProvider) -> float:
    """CCP over the full output span."""
    if not record.output:
        raise ValueError("record has an empty output")
    return _ccp_over_indices(record, range(len(record.output)), provider)
