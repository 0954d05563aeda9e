"""Response-similarity providers, the K x K similarity matrix, and
meaning clustering by bi-directional entailment.

A provider is deterministic for fixed inputs and returns scores in [0, 1].
Lexical kinds (jaccard / rouge_l / bleu) are self-contained; NLI kinds wrap
an :class:`~genuq.nli.NliProvider`.  Pairwise results are memoized because
matrix construction evaluates both orientations of every pair.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ProviderError, SchemaViolation, TooFewSamples
from .nli import NliProvider, NliResult, similarity_from_nli
from .records import SampleResponse
from .text_metrics import bleu, jaccard, rouge_l

__all__ = [
    "SimilarityProvider",
    "SimilarityMatrix",
    "ClusterAssignment",
    "make_provider",
    "build_similarity_matrix",
    "cluster_bidirectional",
    "load_precomputed_matrices",
    "PROVIDER_KINDS",
]

_LEXICAL: dict[str, Callable[[str, str], float]] = {
    "jaccard": jaccard,
    "rouge_l": rouge_l,
    "bleu": bleu,
}

PROVIDER_KINDS = ("jaccard", "rouge_l", "bleu", "nli_entail", "nli_contra", "precomputed")


class SimilarityProvider:
    """Pairwise text similarity with optional NLI verdict access."""

    def __init__(self, kind: str, nli: Optional[NliProvider] = None):
        if kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown similarity kind {kind!r}")
        if kind == "precomputed":
            raise ProviderError(
                "precomputed matrices are looked up by record id, not computed pairwise"
            )
        if kind.startswith("nli_") and nli is None:
            raise ProviderError(f"similarity kind {kind!r} needs an NLI provider")
        self.kind = kind
        self.nli = nli
        self._cache: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()

    @property
    def is_nli(self) -> bool:
        return self.nli is not None

    def similarity(self, a: str, b: str) -> float:
        with self._lock:
            hit = self._cache.get((a, b))
        if hit is not None:
            return hit
        if self.kind in _LEXICAL:
            value = float(_LEXICAL[self.kind](a, b))
        else:
            mode = self.kind.removeprefix("nli_")
            value = similarity_from_nli(self.nli.nli_pair(a, b), mode)
        if not 0.0 <= value <= 1.0:
            raise ProviderError(f"similarity {value} outside [0, 1]")
        with self._lock:
            self._cache[(a, b)] = value
        return value

    def nli_batch(self, pairs: Sequence[tuple[str, str]]) -> list[NliResult]:
        if self.nli is None:
            raise ProviderError(f"similarity kind {self.kind!r} has no NLI backend")
        return self.nli.nli_batch(pairs)


def make_provider(kind: str, nli: Optional[NliProvider] = None) -> SimilarityProvider:
    return SimilarityProvider(kind, nli=nli)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric response-similarity matrix with unit diagonal."""

    k: int
    entries: np.ndarray

    def validate(self, tol: float = 1e-9) -> "SimilarityMatrix":
        if self.entries.shape != (self.k, self.k):
            raise ValueError(f"expected a {self.k}x{self.k} matrix")
        if np.max(np.abs(self.entries - self.entries.T)) > tol:
            raise ValueError("matrix is not symmetric")
        if np.max(np.abs(np.diag(self.entries) - 1.0)) > tol:
            raise ValueError("diagonal must be 1")
        if np.any(self.entries < -tol) or np.any(self.entries > 1 + tol):
            raise ValueError("entries must lie in [0, 1]")
        return self


def _texts(samples: Sequence[Union[str, SampleResponse]]) -> list[str]:
    return [s.text if isinstance(s, SampleResponse) else s for s in samples]


def build_similarity_matrix(
    samples: Sequence[Union[str, SampleResponse]], provider: SimilarityProvider
) -> SimilarityMatrix:
    """Averaged pairwise similarities: S[i, j] = (s(i, j) + s(j, i)) / 2.

    Self-similarity is 1 by definition, so the diagonal is set exactly.
    """
    texts = _texts(samples)
    k = len(texts)
    if k < 2:
        raise TooFewSamples(f"need at least 2 samples, got {k}")
    entries = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            value = 0.5 * (
                provider.similarity(texts[i], texts[j])
                + provider.similarity(texts[j], texts[i])
            )
            entries[i, j] = entries[j, i] = value
    return SimilarityMatrix(k=k, entries=entries).validate()


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of responses into meaning clusters.

    Cluster ids are contiguous from 0 in order of first appearance.
    """

    cluster_of: tuple[int, ...]
    m: int

    def members(self) -> list[list[int]]:
        groups: list[list[int]] = [[] for _ in range(self.m)]
        for idx, cid in enumerate(self.cluster_of):
            groups[cid].append(idx)
        return groups


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def cluster_bidirectional(
    samples: Sequence[Union[str, SampleResponse]], provider: SimilarityProvider
) -> ClusterAssignment:
    """Merge two responses when entailment beats contradiction in both
    directions.  Merging goes through union-find, so the result does not
    depend on pair order even when entailment is not transitive.
    """
    if not provider.is_nli:
        raise ProviderError("bidirectional clustering needs an NLI-capable provider")
    texts = _texts(samples)
    k = len(texts)
    if k == 0:
        raise TooFewSamples("need at least 1 sample")
    pairs: list[tuple[str, str]] = []
    for i in range(k):
        for j in range(i + 1, k):
            pairs.append((texts[i], texts[j]))
            pairs.append((texts[j], texts[i]))
    verdicts = provider.nli_batch(pairs) if pairs else []
    uf = _UnionFind(k)
    cursor = 0
    for i in range(k):
        for j in range(i + 1, k):
            forward, backward = verdicts[cursor], verdicts[cursor + 1]
            cursor += 2
            if forward.entail > forward.contra and backward.entail > backward.contra:
                uf.union(i, j)
    ids: dict[int, int] = {}
    cluster_of = []
    for i in range(k):
        root = uf.find(i)
        if root not in ids:
            ids[root] = len(ids)
        cluster_of.append(ids[root])
    return ClusterAssignment(cluster_of=tuple(cluster_of), m=len(ids))


def load_precomputed_matrices(path) -> dict[tuple[str, str], SimilarityMatrix]:
    """Load a JSONL file of precomputed matrices keyed by (record_id, kind).

    Each line holds ``{record_id, kind, entries}`` with entries row-major.
    """
    store: dict[tuple[str, str], SimilarityMatrix] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            for key in ("record_id", "kind", "entries"):
                if key not in obj:
                    raise SchemaViolation(key, f"missing on line {line_number}")
            flat = np.asarray(obj["entries"], dtype=float)
            k = int(round(np.sqrt(flat.size)))
            if k * k != flat.size:
                raise SchemaViolation("entries", f"line {line_number}: not a square matrix")
            matrix = SimilarityMatrix(k=k, entries=flat.reshape(k, k)).validate()
            store[(obj["record_id"], obj["kind"])] = matrix
    return store
