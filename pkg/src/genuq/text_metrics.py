"""Deterministic lexical text metrics over whitespace tokens.

Shared by the evaluation layer (output quality) and the sample-diversity
scorers (pairwise response similarity).
"""

from __future__ import annotations

import math
from collections import Counter

__all__ = ["rouge_l", "bleu", "jaccard", "exact_accuracy", "lcs_length"]


def lcs_length(a: list[str], b: list[str]) -> int:
    """Length of the longest common subsequence of two token lists."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    """LCS-based F1 over whitespace tokens (beta = 1). Empty input scores 0."""
    cand = candidate.split()
    ref = reference.split()
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2.0 * precision * recall / (precision + recall)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str, max_n: int = 4) -> float:
    """Sentence-level BLEU with add-one smoothed modified n-gram precisions."""
    cand = candidate.split()
    ref = reference.split()
    if not cand or not ref:
        return 0.0
    log_precision = 0.0
    for n in range(1, max_n + 1):
        cand_ngrams = _ngrams(cand, n)
        ref_ngrams = _ngrams(ref, n)
        total = sum(cand_ngrams.values())
        clipped = sum(min(count, ref_ngrams[gram]) for gram, count in cand_ngrams.items())
        log_precision += math.log((clipped + 1.0) / (total + 1.0))
    brevity = min(1.0, math.exp(1.0 - len(ref) / len(cand)))
    return brevity * math.exp(log_precision / max_n)


def jaccard(a: str, b: str) -> float:
    """Word-set overlap |A intersect B| / |A union B|; two empty texts match."""
    set_a, set_b = set(a.split()), set(b.split())
    if not set_a and not set_b:
        return 1.0
    union = set_a | set_b
    if not union:
        return 0.0
    return len(set_a & set_b) / len(union)


def exact_accuracy(candidate: str, reference: str) -> float:
    """1.0 when the strings match after stripping and casefolding, else 0.0."""
    return 1.0 if candidate.strip().casefold() == reference.strip().casefold() else 0.0
