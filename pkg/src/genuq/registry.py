"""Method catalog: every scorer invocable by id from the batch harness.

Sequence-level methods map one record to one value; claim-level methods map
one record to one value per annotated claim.  Hybrid methods (currently the
rank-fused ``huq_md``) need the whole dataset's scores and are assembled by
the pipeline from their ingredient columns.

Ids follow the method names lowercased with underscores; spectral methods
carry their similarity kind as a suffix (e.g. ``degmat_nli_entail``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import claims, diversity, info_scores, reflexive
from .density import MahalanobisScorer, RdeScorer, relative_mahalanobis
from .errors import MissingEmbedding, ProviderError
from .info_scores import InfoParams
from .diversity import DiversityParams
from .nli import NliProvider
from .records import GenerationRecord
from .similarity import (
    SimilarityMatrix,
    SimilarityProvider,
    build_similarity_matrix,
    cluster_bidirectional,
    make_provider,
)

__all__ = ["UncertaintyScore", "MethodSpec", "ScoreContext", "catalog", "method_ids"]


@dataclass(frozen=True)
class UncertaintyScore:
    """One scored unit: higher value means more uncertain."""

    method: str
    level: str  # "sequence" | "claim"
    value: float
    claim_id: Optional[str] = None


@dataclass(frozen=True)
class MethodSpec:
    method_id: str
    level: str
    fn: Callable  # (ScoreContext, GenerationRecord) -> float | list[(claim_id, float)]
    hybrid: bool = False


@dataclass
class ScoreContext:
    """Shared state for one scoring run."""

    nli: NliProvider
    g_similarity: SimilarityProvider
    info_params: InfoParams = field(default_factory=InfoParams)
    diversity_params: DiversityParams = field(default_factory=DiversityParams)
    mahalanobis_fit: Optional[MahalanobisScorer] = None
    background_fit: Optional[MahalanobisScorer] = None
    rde_fit: Optional[RdeScorer] = None
    precomputed: dict = field(default_factory=dict)
    _matrix_cache: dict = field(default_factory=dict)
    _cluster_cache: dict = field(default_factory=dict)

    def matrix_for(self, record: GenerationRecord, kind: str) -> SimilarityMatrix:
        key = (record.id, kind)
        if key in self.precomputed:
            return self.precomputed[key]
        if key not in self._matrix_cache:
            provider = make_provider(kind, nli=self.nli)
            self._matrix_cache[key] = build_similarity_matrix(record.samples, provider)
        return self._matrix_cache[key]

    def clusters_for(self, record: GenerationRecord):
        if record.id not in self._cluster_cache:
            provider = make_provider("nli_entail", nli=self.nli)
            self._cluster_cache[record.id] = cluster_bidirectional(record.samples, provider)
        return self._cluster_cache[record.id]

    def embedding_of(self, record: GenerationRecord):
        if record.embedding is None:
            raise MissingEmbedding(f"record {record.id} carries no embedding")
        return record.embedding


def _need_fit(fit, name: str):
    if fit is None:
        raise ProviderError(f"{name} fit unavailable; supply a training split")
    return fit


def _claim_scores(base: str):
    def fn(ctx: ScoreContext, record: GenerationRecord):
        return [
            (c.claim_id, claims.claim_restricted_score(record, c, base))
            for c in record.claims
        ]

    return fn


def _matrix_method(score_fn, kind: str, needs_params: bool = False):
    def fn(ctx: ScoreContext, record: GenerationRecord) -> float:
        matrix = ctx.matrix_for(record, kind)
        if needs_params:
            return score_fn(matrix, ctx.diversity_params)
        return score_fn(matrix)

    return fn


def _build_catalog() -> dict[str, MethodSpec]:
    seq: dict[str, Callable] = {
        "msp": lambda ctx, r: info_scores.msp(r),
        "perplexity": lambda ctx, r: info_scores.perplexity(r),
        "mean_token_entropy": lambda ctx, r: info_scores.token_entropy(r, "mean"),
        "max_token_entropy": lambda ctx, r: info_scores.token_entropy(r, "max"),
        "pmi": lambda ctx, r: info_scores.pmi(r),
        "conditional_pmi": lambda ctx, r: info_scores.cpmi(r, ctx.info_params),
        "renyi_divergence": lambda ctx, r: info_scores.renyi_divergence(r, ctx.info_params),
        "fisher_rao": lambda ctx, r: info_scores.fisher_rao(r),
        "token_sar": lambda ctx, r: info_scores.token_sar(r, ctx.info_params),
        "ccp": lambda ctx, r: claims.ccp_sequence(
            r, make_provider("nli_entail", nli=ctx.nli)
        ),
        "mc_sequence_entropy": lambda ctx, r: diversity.mc_sequence_entropy(
            r, DiversityParams(sar_temperature=ctx.diversity_params.sar_temperature)
        ),
        "mc_norm_sequence_entropy": lambda ctx, r: diversity.mc_sequence_entropy(
            r,
            DiversityParams(
                sar_temperature=ctx.diversity_params.sar_temperature,
                length_normalize=True,
            ),
        ),
        "semantic_entropy": lambda ctx, r: diversity.semantic_entropy(
            r, make_provider("nli_entail", nli=ctx.nli)
        ),
        "sentence_sar": lambda ctx, r: diversity.sentence_sar(
            r, ctx.g_similarity, ctx.diversity_params
        ),
        "sar": lambda ctx, r: diversity.sar(r, ctx.g_similarity, ctx.diversity_params),
        "mahalanobis_distance": lambda ctx, r: _need_fit(
            ctx.mahalanobis_fit, "mahalanobis"
        ).score_one(ctx.embedding_of(r)),
        "rde": lambda ctx, r: _need_fit(ctx.rde_fit, "rde").score_one(ctx.embedding_of(r)),
        "rmd": lambda ctx, r: relative_mahalanobis(
            _need_fit(ctx.mahalanobis_fit, "mahalanobis"),
            _need_fit(ctx.background_fit, "background"),
            ctx.embedding_of(r),
        ),
        "ptrue": lambda ctx, r: reflexive.ptrue(r),
        "verbalized": lambda ctx, r: reflexive.verbalized(r),
        "num_semantic_sets": lambda ctx, r: diversity.num_semantic_sets(ctx.clusters_for(r)),
        "label_prob": lambda ctx, r: diversity.label_prob(r.samples),
        "bb_semantic_entropy": lambda ctx, r: diversity.bb_semantic_entropy(
            r.samples, make_provider("nli_entail", nli=ctx.nli)
        ),
        "bb_ptrue": lambda ctx, r: reflexive.bb_ptrue_from_samples(r),
        "lexical_similarity_rouge_l": lambda ctx, r: diversity.lexical_similarity(
            r.samples, "rouge_l"
        ),
        "lexical_similarity_bleu": lambda ctx, r: diversity.lexical_similarity(
            r.samples, "bleu"
        ),
    }
    for kind in ("nli_entail", "nli_contra", "jaccard"):
        seq[f"eigval_laplacian_{kind}"] = _matrix_method(diversity.eigv_laplacian, kind)
        seq[f"degmat_{kind}"] = _matrix_method(diversity.degree_matrix_score, kind)
        seq[f"eccentricity_{kind}"] = _matrix_method(
            diversity.eccentricity, kind, needs_params=True
        )

    specs = {mid: MethodSpec(mid, "sequence", fn) for mid, fn in seq.items()}
    specs["huq_md"] = MethodSpec("huq_md", "sequence", fn=None, hybrid=True)

    claim_fns: dict[str, Callable] = {
        "claim_msp": _claim_scores("msp"),
        "claim_perplexity": _claim_scores("perplexity"),
        "claim_mean_token_entropy": _claim_scores("mean_entropy"),
        "claim_max_token_entropy": _claim_scores("max_entropy"),
        "claim_pmi": _claim_scores("pmi"),
        "claim_ptrue": lambda ctx, r: [
            (c.claim_id, claims.claim_ptrue(c)) for c in r.claims
        ],
        "claim_ccp": lambda ctx, r: [
            (c.claim_id, claims.ccp_claim(r, c, make_provider("nli_entail", nli=ctx.nli)))
            for c in r.claims
        ],
    }
    specs.update(
        {mid: MethodSpec(mid, "claim", fn) for mid, fn in claim_fns.items()}
    )
    return specs


_CATALOG = _build_catalog()


def catalog() -> dict[str, MethodSpec]:
    return dict(_CATALOG)


def method_ids() -> list[str]:
    return sorted(_CATALOG)
