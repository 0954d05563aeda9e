"""Seeded synthetic dataset generator.

Produces valid records that exercise every schema field at desk scale, with
a planted relationship between sequence probability and quality: at
``correlation = 1`` the output probability equals the quality value, so the
maximum-sequence-probability score orders records exactly like an oracle.
Claim labels and self-check probabilities follow the same planted signal.

Generation is fully deterministic per seed: running the generator twice
yields byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .records import ClaimSpan, GenerationRecord, SampleResponse, TokenStep, write_dataset

__all__ = ["SynthSpec", "generate_records", "generate_dataset"]

_VOCAB = [
    "alpha", "bravo", "carbon", "delta", "ember", "falcon", "garnet", "harbor",
    "iris", "juniper", "krypton", "lumen", "meadow", "nectar", "onyx", "prism",
    "quartz", "rowan", "saffron", "tundra", "umber", "vesper", "willow", "xenon",
    "yarrow", "zephyr", "basalt", "cobalt", "drift", "echo", "flint", "grove",
]


@dataclass
class SynthSpec:
    n_records: int = 100
    vocab_size: int = 8
    n_samples: int = 5
    min_tokens: int = 3
    max_tokens: int = 6
    noise: float = 0.0
    correlation: float = 1.0
    embedding_dim: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.vocab_size <= len(_VOCAB):
            raise ValueError(f"vocab_size must lie in [2, {len(_VOCAB)}]")
        if not 0.0 <= self.correlation <= 1.0:
            raise ValueError("correlation must lie in [0, 1]")
        if self.min_tokens < 1 or self.max_tokens < self.min_tokens:
            raise ValueError("need 1 <= min_tokens <= max_tokens")


def _make_step(rng: np.random.Generator, token: str, logprob: float, vocab: list[str]) -> TokenStep:
    """Build a step whose truncated distribution sums to one exactly."""
    p_chosen = math.exp(logprob)
    remaining = 1.0 - p_chosen
    others = [t for t in vocab if t != token]
    n_alt = int(rng.integers(1, min(3, len(others)) + 1))
    alt_tokens = [others[int(i)] for i in rng.choice(len(others), size=n_alt, replace=False)]
    if remaining <= 1e-12:
        alternatives = [(token, logprob)]
        tail = -math.inf
    else:
        shares = rng.dirichlet(np.ones(n_alt + 1)) * remaining
        alternatives = [(token, logprob)]
        for t, share in zip(alt_tokens, shares[:-1]):
            alternatives.append((t, math.log(max(share, 1e-300))))
        tail = math.log(max(shares[-1], 1e-300))
    alternatives.sort(key=lambda pair: -pair[1])
    uncond = min(0.0, logprob + float(rng.normal(0.0, 0.3)))
    return TokenStep(
        token=token,
        logprob=logprob,
        alternatives=tuple(alternatives),
        tail_logmass=tail,
        uncond_logprob=uncond,
    )


def _make_sample(
    rng: np.random.Generator, greedy_tokens: list[str], quality: float, vocab: list[str]
) -> SampleResponse:
    if rng.uniform() < quality:
        tokens = list(greedy_tokens)
    else:
        length = int(rng.integers(len(greedy_tokens), len(greedy_tokens) + 3))
        tokens = [vocab[int(i)] for i in rng.integers(0, len(vocab), size=length)]
    logprobs = [float(-rng.exponential(0.5) - 1e-3) for _ in tokens]
    steps = tuple(TokenStep(token=t, logprob=lp) for t, lp in zip(tokens, logprobs))
    return SampleResponse(
        text=" ".join(tokens), total_logprob=sum(lp for lp in logprobs), tokens=steps
    )


def generate_records(spec: SynthSpec) -> list[GenerationRecord]:
    rng = np.random.default_rng(spec.seed)
    vocab = _VOCAB[: spec.vocab_size]
    records = []
    for i in range(spec.n_records):
        quality = float(rng.uniform(0.0, 1.0))
        planted = spec.correlation * quality + (1.0 - spec.correlation) * float(rng.uniform())
        # Affine squeeze instead of clipping keeps the planted ordering strict.
        seq_prob = 1e-3 + 0.998 * planted
        n_tokens = int(rng.integers(spec.min_tokens, spec.max_tokens + 1))
        step_logprob = math.log(seq_prob) / n_tokens
        tokens = [vocab[int(t)] for t in rng.integers(0, len(vocab), size=n_tokens)]
        output = tuple(_make_step(rng, t, step_logprob, vocab) for t in tokens)

        samples = tuple(
            _make_sample(rng, tokens, seq_prob, vocab) for _ in range(spec.n_samples)
        )

        direction = np.zeros(spec.embedding_dim)
        direction[0] = 1.0
        embedding = (
            rng.normal(0.0, 0.25, size=spec.embedding_dim)
            + (1.0 - seq_prob) * 3.0 * direction
        )

        claims = []
        n_claims = int(rng.integers(1, 3))
        positions = sorted(rng.choice(n_tokens, size=min(2, n_tokens), replace=False).tolist())
        for c in range(n_claims):
            claim_quality = min(max(planted + float(rng.normal(0.0, spec.noise or 0.05)), 1e-3), 1 - 1e-3)
            claims.append(
                ClaimSpan(
                    claim_id=f"r{i:05d}c{c}",
                    token_indices=tuple(positions[: 1 + c % len(positions)]),
                    label="supported" if claim_quality > 0.5 else "unsupported",
                    ptrue_logprob=math.log(claim_quality),
                )
            )

        noisy_quality = min(max(quality + float(rng.normal(0.0, spec.noise)), 0.0), 1.0)
        records.append(
            GenerationRecord(
                id=f"r{i:05d}",
                prompt=f"prompt {i}",
                output=output,
                samples=samples,
                embedding=tuple(float(v) for v in embedding),
                quality={
                    "alignscore": noisy_quality,
                    "accuracy": 1.0 if noisy_quality > 0.5 else 0.0,
                },
                claims=tuple(claims),
                ptrue_logprob=math.log(seq_prob),
                verbalized_confidence=seq_prob,
            )
        )
    return records


def generate_dataset(spec: SynthSpec, path) -> None:
    write_dataset(generate_records(spec), path)
