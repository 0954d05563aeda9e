"""Sample-diversity uncertainty scores.

White-box members aggregate the model-assigned probabilities of sampled
responses (Monte Carlo sequence entropy and its meaning-aware refinements);
black-box members only look at the sampled texts, either through frequency
counts or through the spectrum of the response-similarity graph.

All spectral scores are invariant under simultaneous permutation of the
similarity matrix's rows and columns.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .errors import (
    MissingSampleLogprobs,
    MissingSampleTokens,
    SingularDegree,
    TooFewSamples,
)
from .info_scores import token_sar_for_tokens
from .records import GenerationRecord, SampleResponse
from .similarity import (
    ClusterAssignment,
    SimilarityMatrix,
    SimilarityProvider,
    build_similarity_matrix,
    cluster_bidirectional,
)
from .text_metrics import bleu, rouge_l

__all__ = [
    "DiversityParams",
    "mc_sequence_entropy",
    "semantic_entropy",
    "sentence_sar",
    "sar",
    "num_semantic_sets",
    "eigv_laplacian",
    "degree_matrix_score",
    "eccentricity",
    "lexical_similarity",
    "label_prob",
    "bb_semantic_entropy",
    "bb_ptrue",
]


@dataclass
class DiversityParams:
    """Knobs of the sample-diversity scores.

    ``sar_temperature`` scales the relevance shift (larger values fade the
    correction toward plain Monte Carlo entropy).  ``eccentricity_k`` picks
    how many Laplacian eigenvectors embed each response; ``None`` uses every
    eigenvector whose eigenvalue is below 0.9, mirroring spectral-clustering
    practice.  ``length_normalize`` switches the Monte Carlo entropy to
    per-token normalized sequence probabilities.
    """

    sar_temperature: float = 1.0
    eccentricity_k: Optional[int] = None
    length_normalize: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.sar_temperature) and self.sar_temperature > 0):
            raise ValueError("sar_temperature must be a positive finite number")
        if self.eccentricity_k is not None and self.eccentricity_k < 1:
            raise ValueError("eccentricity_k must be >= 1")


# --- white-box: Monte Carlo entropies -----------------------------------------


def _sample_logprobs(record: GenerationRecord) -> list[float]:
    if not record.samples:
        raise MissingSampleLogprobs("record has no samples")
    totals = []
    for i, sample in enumerate(record.samples):
        if sample.total_logprob is None:
            raise MissingSampleLogprobs(f"sample {i} has no total_logprob")
        totals.append(sample.total_logprob)
    return totals


def _normalized_logprobs(record: GenerationRecord) -> list[float]:
    totals = _sample_logprobs(record)
    values = []
    for i, sample in enumerate(record.samples):
        if not sample.tokens:
            raise MissingSampleTokens(f"sample {i} has no token-level detail")
        values.append(totals[i] / len(sample.tokens))
    return values


def mc_sequence_entropy(
    record: GenerationRecord, params: Optional[DiversityParams] = None
) -> float:
    """Negative mean log-probability of the sampled responses.

    With ``length_normalize`` each sample contributes its per-token mean
    log-probability instead.
    """
    params = params or DiversityParams()
    if params.length_normalize:
        return -float(np.mean(_normalized_logprobs(record)))
    return -float(np.mean(_sample_logprobs(record)))


def semantic_entropy(record: GenerationRecord, provider: SimilarityProvider) -> float:
    """Entropy over meaning clusters of the samples, with each cluster's
    probability mass summed from its members' sequence probabilities."""
    totals = np.asarray(_sample_logprobs(record))
    assignment = cluster_bidirectional(record.samples, provider)
    k = len(record.samples)
    weighted = 0.0
    for members in assignment.members():
        log_mass = float(logsumexp(totals[members]))
        weighted += len(members) * log_mass
    return -weighted / k


def _shifted_entropy(
    log_weights: Sequence[float],
    texts: Sequence[str],
    provider: SimilarityProvider,
    temperature: float,
) -> float:
    probs = np.exp(np.asarray(log_weights, dtype=float))
    k = len(probs)
    value = 0.0
    for j in range(k):
        relevance = sum(
            provider.similarity(texts[j], texts[i]) * probs[i] for i in range(k) if i != j
        )
        value -= math.log(probs[j] + relevance / temperature)
    return value / k


def sentence_sar(
    record: GenerationRecord,
    provider: SimilarityProvider,
    params: Optional[DiversityParams] = None,
) -> float:
    """Monte Carlo entropy with each sample's probability enlarged by the
    probability mass of the other samples, weighted by their similarity."""
    params = params or DiversityParams()
    totals = _sample_logprobs(record)
    texts = [s.text for s in record.samples]
    return _shifted_entropy(totals, texts, provider, params.sar_temperature)


def sar(
    record: GenerationRecord,
    provider: SimilarityProvider,
    params: Optional[DiversityParams] = None,
) -> float:
    """Combined relevance shift: sample probabilities are replaced by
    token-relevance-weighted ones before the sentence-level shift."""
    params = params or DiversityParams()
    if not record.samples:
        raise MissingSampleTokens("record has no samples")
    shifted_logprobs = []
    for i, sample in enumerate(record.samples):
        if not sample.tokens:
            raise MissingSampleTokens(f"sample {i} has no token-level detail")
        value = token_sar_for_tokens(
            record.prompt,
            [t.token for t in sample.tokens],
            [t.logprob for t in sample.tokens],
            provider.similarity,
        )
        shifted_logprobs.append(-value)
    texts = [s.text for s in record.samples]
    return _shifted_entropy(shifted_logprobs, texts, provider, params.sar_temperature)


# --- black-box: counting and spectral scores -----------------------------------


def num_semantic_sets(assignment: ClusterAssignment) -> float:
    """Number of distinct meaning clusters."""
    return float(assignment.m)


def _normalized_laplacian(matrix: SimilarityMatrix) -> np.ndarray:
    entries = matrix.entries
    degrees = entries.sum(axis=1)
    if np.any(degrees <= 0.0):
        raise SingularDegree("zero row sum in the similarity matrix")
    scale = 1.0 / np.sqrt(degrees)
    lap = np.eye(matrix.k) - scale[:, None] * entries * scale[None, :]
    return 0.5 * (lap + lap.T)


def eigv_laplacian(matrix: SimilarityMatrix) -> float:
    """Sum of max(0, 1 - eigenvalue) over the normalized Laplacian spectrum;
    a continuous relaxation of the cluster count."""
    eigenvalues = np.linalg.eigvalsh(_normalized_laplacian(matrix))
    return float(np.maximum(0.0, 1.0 - eigenvalues).sum())


def degree_matrix_score(matrix: SimilarityMatrix) -> float:
    """One minus the mean similarity mass: 1 - trace(D) / K^2."""
    return float(1.0 - matrix.entries.sum() / matrix.k**2)


def eccentricity(
    matrix: SimilarityMatrix, params: Optional[DiversityParams] = None
) -> float:
    """Norm of the centered spectral embedding of the responses.

    Each response is embedded by its coordinates in the eigenvectors of the
    normalized Laplacian with the smallest eigenvalues; tight agreement puts
    every response at the same point and scores 0.
    """
    params = params or DiversityParams()
    lap = _normalized_laplacian(matrix)
    eigenvalues, eigenvectors = np.linalg.eigh(lap)
    if params.eccentricity_k is not None:
        k = params.eccentricity_k
        if k > matrix.k:
            raise ValueError("eccentricity_k cannot exceed the number of samples")
    else:
        k = max(1, int(np.sum(eigenvalues < 0.9)))
        k = min(k, matrix.k)
    coords = eigenvectors[:, :k]
    centered = coords - coords.mean(axis=0, keepdims=True)
    return float(np.linalg.norm(centered))


def lexical_similarity(
    samples: Sequence[Union[str, SampleResponse]], metric: str = "rouge_l"
) -> float:
    """Negated mean pairwise lexical similarity over ordered pairs
    (self-pairs excluded); more agreement means lower uncertainty."""
    texts = [s.text if isinstance(s, SampleResponse) else s for s in samples]
    if len(texts) < 2:
        raise TooFewSamples(f"need at least 2 samples, got {len(texts)}")
    if metric == "rouge_l":
        fn = rouge_l
    elif metric == "bleu":
        fn = bleu
    else:
        raise ValueError(f"unknown lexical metric {metric!r}")
    values = [
        fn(texts[i], texts[j])
        for i in range(len(texts))
        for j in range(len(texts))
        if i != j
    ]
    return -float(np.mean(values))


def label_prob(samples: Sequence[Union[str, SampleResponse]]) -> float:
    """One minus the relative frequency of the most common sampled text."""
    texts = [s.text if isinstance(s, SampleResponse) else s for s in samples]
    if not texts:
        raise TooFewSamples("need at least 1 sample")
    counts = Counter(texts)
    return 1.0 - max(counts.values()) / len(texts)


def bb_semantic_entropy(
    samples: Sequence[Union[str, SampleResponse]], provider: SimilarityProvider
) -> float:
    """Semantic entropy with frequency-estimated cluster probabilities."""
    texts = [s.text if isinstance(s, SampleResponse) else s for s in samples]
    if len(texts) < 2:
        raise TooFewSamples(f"need at least 2 samples, got {len(texts)}")
    assignment = cluster_bidirectional(texts, provider)
    k = len(texts)
    value = 0.0
    for members in assignment.members():
        mass = len(members) / k
        value -= mass * math.log(mass)
    return value


def bb_ptrue(true_count: int, k: int) -> float:
    """One minus the relative frequency of a 'True' self-check answer."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= true_count <= k:
        raise ValueError("true_count must lie in [0, k]")
    return 1.0 - true_count / k
