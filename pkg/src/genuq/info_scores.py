"""Information-based sequence-level uncertainty scores.

Every score here is a deterministic function of the greedy output's token
distributions.  The truncated top-K storage is treated as exact: the tail
pseudo-symbol participates in entropy and divergence sums as a single
outcome, and a ``-inf`` tail means the listed alternatives are exhaustive.

The per-step reductions are factored out so the claim-level adaptations can
run the identical arithmetic over an index subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    EmptyOutput,
    MissingAlternatives,
    MissingUnconditional,
    SimilarityUnavailable,
)
from .records import GenerationRecord, TokenStep
from .text_metrics import rouge_l

__all__ = [
    "InfoParams",
    "msp",
    "perplexity",
    "token_entropy",
    "pmi",
    "cpmi",
    "renyi_divergence",
    "fisher_rao",
    "token_sar",
    "token_sar_for_tokens",
]


@dataclass
class InfoParams:
    """Tunable knobs of the information-based estimators.

    ``cpmi_tau`` is an entropy threshold in nats and may be ``inf`` to
    disable the unconditional correction entirely; ``renyi_alpha`` must stay
    away from 1 where the divergence degenerates.  ``sar_similarity`` is the
    text-similarity function used for token relevance; the default is
    ROUGE-L on token-removed strings.
    """

    cpmi_lambda: float = 1.0
    cpmi_tau: float = 2.0
    renyi_alpha: float = 0.5
    sar_similarity: Callable[[str, str], float] = field(default=rouge_l)

    def __post_init__(self):
        if not (math.isfinite(self.cpmi_lambda) and self.cpmi_lambda > 0):
            raise ValueError("cpmi_lambda must be a positive finite number")
        if math.isnan(self.cpmi_tau) or self.cpmi_tau < 0:
            raise ValueError("cpmi_tau must be >= 0 (inf allowed)")
        if not (math.isfinite(self.renyi_alpha) and self.renyi_alpha > 0):
            raise ValueError("renyi_alpha must be a positive finite number")
        if abs(self.renyi_alpha - 1.0) < 1e-9:
            raise ValueError("renyi_alpha must differ from 1")


# --- shared per-step reductions (also used by the claim-level module) ---------


def _require_steps(steps: Sequence[TokenStep]):
    if not steps:
        raise EmptyOutput("no token steps to score")


def _require_alternatives(steps: Sequence[TokenStep]):
    for i, step in enumerate(steps):
        if step.alternatives is None:
            raise MissingAlternatives(f"step {i} has no stored alternatives")


def _require_unconditional(steps: Sequence[TokenStep]):
    for i, step in enumerate(steps):
        if step.uncond_logprob is None:
            raise MissingUnconditional(f"step {i} has no unconditional logprob")


def msp_from_steps(steps: Sequence[TokenStep]) -> float:
    _require_steps(steps)
    return 1.0 - math.exp(sum(s.logprob for s in steps))


def perplexity_from_steps(steps: Sequence[TokenStep]) -> float:
    _require_steps(steps)
    return math.exp(-sum(s.logprob for s in steps) / len(steps))


def step_entropy(step: TokenStep) -> float:
    """Shannon entropy in nats of one step's truncated distribution."""
    probs = step.outcome_probs()
    nonzero = probs[probs > 0.0]
    return float(-np.sum(nonzero * np.log(nonzero)))


def entropy_from_steps(steps: Sequence[TokenStep], mode: str) -> float:
    _require_steps(steps)
    _require_alternatives(steps)
    values = [step_entropy(s) for s in steps]
    if mode == "mean":
        return float(np.mean(values))
    if mode == "max":
        return float(np.max(values))
    raise ValueError(f"unknown entropy mode {mode!r}")


def pmi_from_steps(steps: Sequence[TokenStep]) -> float:
    _require_steps(steps)
    _require_unconditional(steps)
    return sum(s.uncond_logprob - s.logprob for s in steps) / len(steps)


# --- sequence-level operations -------------------------------------------------


def msp(record: GenerationRecord) -> float:
    """Maximum sequence probability score: one minus the output probability."""
    return msp_from_steps(record.output)


def perplexity(record: GenerationRecord) -> float:
    """Exponentiated mean negative token log-probability; 1.0 when certain."""
    return perplexity_from_steps(record.output)


def token_entropy(record: GenerationRecord, mode: str = "mean") -> float:
    """Mean or max of the per-step token-distribution entropies."""
    return entropy_from_steps(record.output, mode)


def pmi(record: GenerationRecord) -> float:
    """Mean log-ratio of unconditional to prompt-conditioned token
    probability.  Positive when the prompt makes the output more likely."""
    return pmi_from_steps(record.output)


def cpmi(record: GenerationRecord, params: Optional[InfoParams] = None) -> float:
    """Conditional PMI: mean NLL plus a scaled unconditional correction on
    steps whose conditional entropy reaches ``cpmi_tau``.

    Sign note: the correction adds log-probabilities (values <= 0), so the
    score can be negative when high-entropy steps dominate.
    """
    params = params or InfoParams()
    steps = record.output
    _require_steps(steps)
    _require_alternatives(steps)
    _require_unconditional(steps)
    n = len(steps)
    nll_term = -sum(s.logprob for s in steps) / n
    correction = sum(
        s.uncond_logprob for s in steps if step_entropy(s) >= params.cpmi_tau
    )
    return nll_term + params.cpmi_lambda * correction / n


def _renyi_step(step: TokenStep, alpha: float) -> float:
    logprobs = [lp for _, lp in step.alternatives]
    if step.tail_logmass is not None and step.tail_logmass > -math.inf:
        logprobs.append(step.tail_logmass)
    n_outcomes = len(logprobs)
    # sum_i p_i^alpha / q^(alpha-1) with uniform q, evaluated in log space
    log_sum = float(np.logaddexp.reduce(np.asarray(logprobs) * alpha))
    return math.log(n_outcomes) + log_sum / (alpha - 1.0)


def renyi_divergence(record: GenerationRecord, params: Optional[InfoParams] = None) -> float:
    """Mean per-step Renyi divergence from the uniform distribution over the
    step's outcomes (listed alternatives plus the tail pseudo-symbol)."""
    params = params or InfoParams()
    steps = record.output
    _require_steps(steps)
    _require_alternatives(steps)
    return float(np.mean([_renyi_step(s, params.renyi_alpha) for s in steps]))


def _fisher_rao_step(step: TokenStep) -> float:
    probs = step.outcome_probs()
    n_outcomes = len(probs)
    affinity = float(np.sum(np.sqrt(probs / n_outcomes)))
    return (2.0 / math.pi) * math.acos(min(1.0, max(-1.0, affinity)))


def fisher_rao(record: GenerationRecord) -> float:
    """Mean per-step Fisher-Rao distance to the uniform distribution,
    rescaled to [0, 1]."""
    steps = record.output
    _require_steps(steps)
    _require_alternatives(steps)
    return float(np.mean([_fisher_rao_step(s) for s in steps]))


def _joined(prompt: str, tokens: Sequence[str]) -> str:
    text = " ".join(tokens)
    return f"{prompt} {text}".strip() if prompt else text


def token_sar_for_tokens(
    prompt: str,
    tokens: Sequence[str],
    logprobs: Sequence[float],
    similarity: Callable[[str, str], float],
) -> float:
    """Relevance-weighted negative log-likelihood of a token sequence.

    A token's raw relevance is one minus the similarity between the full
    text and the text with that token removed; weights are normalized to sum
    to one.  When every raw relevance is zero the weights fall back to
    uniform, which reduces the score to the mean NLL.
    """
    if not callable(similarity):
        raise SimilarityUnavailable("token relevance needs a callable similarity")
    full = _joined(prompt, tokens)
    raw = []
    for k in range(len(tokens)):
        reduced = _joined(prompt, [t for i, t in enumerate(tokens) if i != k])
        raw.append(1.0 - similarity(full, reduced))
    total = sum(raw)
    if total > 0.0:
        weights = [r / total for r in raw]
    else:
        weights = [1.0 / len(tokens)] * len(tokens)
    return -sum(w * lp for w, lp in zip(weights, logprobs))


def token_sar(record: GenerationRecord, params: Optional[InfoParams] = None) -> float:
    """Token-relevance-weighted NLL of the greedy output; generalizes the
    log-perplexity, which it equals under constant similarity."""
    params = params or InfoParams()
    steps = record.output
    _require_steps(steps)
    return token_sar_for_tokens(
        record.prompt,
        [s.token for s in steps],
        [s.logprob for s in steps],
        params.sar_similarity,
    )
