"""Batch harness: configuration, scoring, calibration, evaluation, reports.

A run is reproducible: the same config, seed, and dataset produce
byte-identical outputs.  Output files are written atomically (temp file plus
rename), and a failure on one record becomes a skip entry in the score file
instead of aborting the run.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Optional

import numpy as np

from .calibrate import SCALER_KINDS, fit_scaler, load_scaler, save_scaler
from .density import MahalanobisScorer, RdeScorer, huq
from .errors import ConfigError, GenuqError
from .info_scores import InfoParams
from .diversity import DiversityParams
from .metrics import calibration_mse, prr, rejection_curve, roc_auc, pr_auc
from .nli import HttpNliClient, StubNli
from .records import stream_dataset
from .registry import ScoreContext, catalog, method_ids
from .similarity import load_precomputed_matrices, make_provider
from .synth import SynthSpec, generate_dataset

__all__ = ["RunConfig", "run_score", "run_calibrate", "run_evaluate", "run_synth", "render_table"]

ENDPOINT_ENV_VAR = "GENUQ_NLI_ENDPOINT"

_HUQ_INGREDIENTS = {"huq_md": ("msp", "mahalanobis_distance")}


@dataclass
class RunConfig:
    dataset: str = ""
    train: str = ""
    background: str = ""
    methods: Optional[list[str]] = None  # None means every registered method
    quality_metric: str = "alignscore"
    similarity: str = "rouge_l"
    nli: str = "stub"
    similarity_file: str = ""
    normalizers: list[str] = dataclass_field(default_factory=lambda: ["isotonic_pcc"])
    bins: int = 10
    max_rejection: float = 0.5
    output_dir: str = "."
    seed: int = 0
    huq_alpha: float = 0.5
    cpmi_lambda: float = 1.0
    cpmi_tau: float = 2.0
    renyi_alpha: float = 0.5
    sar_temperature: float = 1.0
    eccentricity_k: Optional[int] = None

    _LIST_KEYS = ("methods", "normalizers")
    _INT_KEYS = ("bins", "seed", "eccentricity_k")
    _FLOAT_KEYS = (
        "max_rejection",
        "huq_alpha",
        "cpmi_lambda",
        "cpmi_tau",
        "renyi_alpha",
        "sar_temperature",
    )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        config = cls()
        with open(path, "r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"line {line_number}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                config.set_option(key.strip(), value.strip())
        return config

    def set_option(self, key: str, value: str) -> None:
        if key.startswith("_") or not hasattr(self, key):
            raise ConfigError(f"unknown config key {key!r}")
        if key in self._LIST_KEYS:
            setattr(self, key, [v.strip() for v in value.split(",") if v.strip()])
        elif key in self._INT_KEYS:
            setattr(self, key, int(value))
        elif key in self._FLOAT_KEYS:
            setattr(self, key, float(value))
        else:
            setattr(self, key, value)

    def resolve_methods(self) -> list[str]:
        known = method_ids()
        if self.methods is None or self.methods == ["all"]:
            return known
        for mid in self.methods:
            if mid not in known:
                raise ConfigError(f"unknown method id {mid!r}")
        return list(self.methods)

    def nli_provider(self):
        endpoint = os.environ.get(ENDPOINT_ENV_VAR, "")
        spec = endpoint or self.nli
        if spec in ("", "stub"):
            return StubNli()
        return HttpNliClient(spec)

    def build_context(self) -> ScoreContext:
        nli = self.nli_provider()
        g_kind = self.similarity if self.similarity else "rouge_l"
        g_similarity = make_provider(g_kind, nli=nli if g_kind.startswith("nli_") else None)
        info_params = InfoParams(
            cpmi_lambda=self.cpmi_lambda,
            cpmi_tau=self.cpmi_tau,
            renyi_alpha=self.renyi_alpha,
            sar_similarity=g_similarity.similarity,
        )
        diversity_params = DiversityParams(
            sar_temperature=self.sar_temperature, eccentricity_k=self.eccentricity_k
        )
        precomputed = (
            load_precomputed_matrices(self.similarity_file) if self.similarity_file else {}
        )
        return ScoreContext(
            nli=nli,
            g_similarity=g_similarity,
            info_params=info_params,
            diversity_params=diversity_params,
            precomputed=precomputed,
        )


def _atomic_write(path: Path, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            for line in lines:
                handle.write(line)
                handle.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _train_embeddings(path) -> list:
    embeddings = []
    for record in stream_dataset(path):
        if record.embedding is not None:
            embeddings.append(record.embedding)
    return embeddings


def _fit_density(config: RunConfig, ctx: ScoreContext, methods: list[str]) -> None:
    needs_md = any(m in methods for m in ("mahalanobis_distance", "rmd", "huq_md"))
    needs_rde = "rde" in methods
    if not (needs_md or needs_rde) or not config.train:
        return  # scorers emit per-record skips when a fit is missing
    embeddings = _train_embeddings(config.train)
    if len(embeddings) >= 2:
        if needs_md:
            ctx.mahalanobis_fit = MahalanobisScorer().fit(embeddings)
        if needs_rde:
            ctx.rde_fit = RdeScorer(seed=config.seed).fit(embeddings)
    if "rmd" in methods and config.background:
        background = _train_embeddings(config.background)
        if len(background) >= 2:
            ctx.background_fit = MahalanobisScorer().fit(background)


def run_score(config: RunConfig, score_path=None) -> Path:
    """Score every requested method on every record of the dataset.

    Emits one JSONL row per (record, method) pair: either a value row or a
    skip row carrying the failure reason.  Claim-level methods emit one row
    per claim with its ``claim_id``.  Hybrid methods are assembled from
    their ingredient columns after the per-record pass.
    """
    methods = config.resolve_methods()
    ctx = config.build_context()
    _fit_density(config, ctx, methods)
    specs = catalog()

    hybrids = [m for m in methods if specs[m].hybrid]
    ingredient_ids = sorted(
        {mid for h in hybrids for mid in _HUQ_INGREDIENTS[h]}
    )
    to_compute = [m for m in methods if not specs[m].hybrid]
    to_compute += [m for m in ingredient_ids if m not in to_compute]

    rows: list[dict] = []
    record_order: list[str] = []
    columns: dict[str, dict[str, float]] = {}
    failures: dict[str, dict[str, str]] = {}

    for record in stream_dataset(config.dataset):
        record_order.append(record.id)
        for mid in to_compute:
            spec = specs[mid]
            emit = mid in methods
            try:
                result = spec.fn(ctx, record)
            except GenuqError as exc:
                reason = f"{type(exc).__name__}: {exc}"
                failures.setdefault(mid, {})[record.id] = reason
                if emit:
                    rows.append(
                        {
                            "record_id": record.id,
                            "method": mid,
                            "level": spec.level,
                            "skipped": reason,
                        }
                    )
                continue
            if spec.level == "claim":
                if emit:
                    for claim_id, value in result:
                        rows.append(
                            {
                                "record_id": record.id,
                                "method": mid,
                                "level": "claim",
                                "claim_id": claim_id,
                                "value": float(value),
                            }
                        )
            else:
                value = float(result)
                columns.setdefault(mid, {})[record.id] = value
                if emit:
                    rows.append(
                        {
                            "record_id": record.id,
                            "method": mid,
                            "level": "sequence",
                            "value": value,
                        }
                    )

    for hybrid in hybrids:
        ingredients = _HUQ_INGREDIENTS[hybrid]
        eligible = [
            rid
            for rid in record_order
            if all(rid in columns.get(mid, {}) for mid in ingredients)
        ]
        if eligible:
            info_col = [columns[ingredients[0]][rid] for rid in eligible]
            dens_col = [columns[ingredients[1]][rid] for rid in eligible]
            combined = huq(info_col, dens_col, alpha=config.huq_alpha)
            for rid, value in zip(eligible, combined):
                rows.append(
                    {"record_id": rid, "method": hybrid, "level": "sequence", "value": value}
                )
        eligible_set = set(eligible)
        for rid in record_order:
            if rid not in eligible_set:
                reason = next(
                    (
                        failures.get(mid, {}).get(rid)
                        for mid in ingredients
                        if failures.get(mid, {}).get(rid)
                    ),
                    "ingredient score unavailable",
                )
                rows.append(
                    {
                        "record_id": rid,
                        "method": hybrid,
                        "level": "sequence",
                        "skipped": reason,
                    }
                )

    path = Path(score_path) if score_path else Path(config.output_dir) / "scores.jsonl"
    _atomic_write(path, [json.dumps(r, sort_keys=True, allow_nan=False) for r in rows])
    return path


def load_scores(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _sequence_columns(rows: list[dict]) -> dict[str, dict[str, float]]:
    columns: dict[str, dict[str, float]] = {}
    for row in rows:
        if row.get("level") == "sequence" and "value" in row:
            columns.setdefault(row["method"], {})[row["record_id"]] = row["value"]
    return columns


def _claim_columns(rows: list[dict]) -> dict[str, dict[tuple[str, str], float]]:
    columns: dict[str, dict[tuple[str, str], float]] = {}
    for row in rows:
        if row.get("level") == "claim" and "value" in row:
            key = (row["record_id"], row.get("claim_id", ""))
            columns.setdefault(row["method"], {})[key] = row["value"]
    return columns


def _record_quality(config: RunConfig, dataset_path) -> dict[str, float]:
    quality = {}
    for record in stream_dataset(dataset_path):
        if config.quality_metric not in record.quality:
            raise ConfigError(
                f"record {record.id} has no quality metric {config.quality_metric!r}"
            )
        quality[record.id] = record.quality[config.quality_metric]
    return quality


def run_calibrate(config: RunConfig, score_path, models_dir=None) -> Path:
    """Fit one normalizer per (sequence method, kind) on train-split scores."""
    models_dir = Path(models_dir) if models_dir else Path(config.output_dir) / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    train_path = config.train or config.dataset
    if not train_path:
        raise ConfigError("calibration needs a train (or dataset) path for quality values")
    quality = _record_quality(config, train_path)
    columns = _sequence_columns(load_scores(score_path))
    kinds = config.normalizers or ["isotonic_pcc"]
    if kinds == ["all"]:
        kinds = sorted(SCALER_KINDS)
    for kind in kinds:
        if kind not in SCALER_KINDS:
            raise ConfigError(f"unknown normalizer kind {kind!r}")
    for method, scores in sorted(columns.items()):
        ids = sorted(rid for rid in scores if rid in quality)
        u = [scores[rid] for rid in ids]
        q = [quality[rid] for rid in ids]
        for kind in kinds:
            params = {"n_bins": config.bins} if kind == "binned_pcc" else {}
            try:
                scaler = fit_scaler(kind, u, q, **params)
            except GenuqError:
                continue  # degenerate column; evaluation proceeds uncalibrated
            save_scaler(scaler, models_dir / f"{method}.{kind}.json")
    return models_dir


def run_evaluate(config: RunConfig, score_path, models_dir=None, report_path=None) -> Path:
    """Assemble the evaluation report for every scored method.

    Sequence-level methods get PRR with the rejection curve behind it;
    claim-level methods get ROC / PR AUC against the claim labels
    (unsupported as positive, unknown discarded); methods with fitted
    normalizers additionally get a calibration MSE per kind.
    """
    rows = load_scores(score_path)
    quality = _record_quality(config, config.dataset)
    labels: dict[tuple[str, str], int] = {}
    for record in stream_dataset(config.dataset):
        for claim in record.claims:
            if claim.label != "unknown":
                labels[(record.id, claim.claim_id)] = 1 if claim.label == "unsupported" else 0

    report: dict = {
        "quality_metric": config.quality_metric,
        "max_rejection": config.max_rejection,
        "methods": {},
    }

    for method, scores in sorted(_sequence_columns(rows).items()):
        ids = sorted(rid for rid in scores if rid in quality)
        entry: dict = {"level": "sequence", "n_scored": len(ids)}
        if ids:
            u = [scores[rid] for rid in ids]
            q = [quality[rid] for rid in ids]
            try:
                result = prr(u, q, config.max_rejection)
                curve = rejection_curve(u, q, config.max_rejection)
                entry.update(
                    prr=result.prr,
                    auc_unc=result.auc_unc,
                    auc_oracle=result.auc_oracle,
                    auc_rnd=result.auc_rnd,
                    curve=[[f, v] for f, v in curve.points],
                )
            except GenuqError as exc:
                entry["error"] = f"{type(exc).__name__}: {exc}"
            if models_dir:
                entry.update(_calibration_entry(method, u, q, Path(models_dir)))
        report["methods"][method] = entry

    for method, scores in sorted(_claim_columns(rows).items()):
        keys = sorted(k for k in scores if k in labels)
        entry = {"level": "claim", "n_scored": len(keys)}
        if keys:
            s = [scores[k] for k in keys]
            y = [labels[k] for k in keys]
            try:
                entry["roc_auc"] = roc_auc(s, y)
                entry["pr_auc"] = pr_auc(s, y)
            except GenuqError as exc:
                entry["error"] = f"{type(exc).__name__}: {exc}"
        report["methods"][method] = entry

    path = Path(report_path) if report_path else Path(config.output_dir) / "report.json"
    _atomic_write(path, [json.dumps(report, sort_keys=True, indent=2, allow_nan=False)])
    return path


def _calibration_entry(method: str, u, q, models_dir: Path) -> dict:
    entry: dict = {}
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr < 0) or np.any(q_arr > 1):
        return {"calibration_error": "quality metric outside [0, 1]"}
    for model_path in sorted(models_dir.glob(f"{method}.*.json")):
        kind = model_path.name[len(method) + 1 : -len(".json")]
        try:
            scaler = load_scaler(model_path)
            confidences = scaler.transform(u)
            entry[f"calibration_mse_{kind}"] = calibration_mse(confidences, q_arr)
        except (GenuqError, ValueError) as exc:
            entry[f"calibration_error_{kind}"] = f"{type(exc).__name__}: {exc}"
    return entry


def run_synth(config: RunConfig, n_records: int, path, **overrides) -> Path:
    spec = SynthSpec(n_records=n_records, seed=config.seed, **overrides)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    generate_dataset(spec, path)
    return path


def render_table(report: dict) -> str:
    """Aligned plain-text view of a report's per-method metrics."""
    headers = ["method", "level", "n", "prr", "roc_auc", "pr_auc", "mse(iso)", "note"]
    rows = []
    for method in sorted(report.get("methods", {})):
        entry = report["methods"][method]

        def fmt(key):
            value = entry.get(key)
            return f"{value:.4f}" if isinstance(value, (int, float)) else "-"

        rows.append(
            [
                method,
                entry.get("level", "?"),
                str(entry.get("n_scored", 0)),
                fmt("prr"),
                fmt("roc_auc"),
                fmt("pr_auc"),
                fmt("calibration_mse_isotonic_pcc"),
                entry.get("error", ""),
            ]
        )
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(headers))).rstrip())
    return "\n".join(lines)
