"""Record data model and line-delimited file format.

One :class:`GenerationRecord` captures everything a scorer may need about a
single model response: the decoded output with per-token top-K probability
mass, sampled alternative responses, an optional hidden-state embedding,
quality measurements, and annotated claim spans.  All scorers in the package
operate on these records; nothing else reads dataset files.

Storage conventions:

* every log value is a natural logarithm, ``<= 0``;
* each output step stores a truncated next-token distribution: the top-K
  alternatives plus ``tail_logmass``, the log of the probability mass outside
  the listed alternatives.  ``-inf`` (serialized as the string ``"-inf"``)
  means the list is exhaustive;
* serialization is canonical: fixed key order, no whitespace, full
  round-trip float precision.  ``parse -> serialize`` is an involution on
  valid records.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import DatasetError, MalformedJson, NormalizationError, SchemaViolation

__all__ = [
    "TokenStep",
    "SampleResponse",
    "ClaimSpan",
    "GenerationRecord",
    "CalibrationPair",
    "parse_record",
    "serialize_record",
    "stream_dataset",
    "write_dataset",
]

_NORMALIZATION_TOL = 1e-6
_CHOSEN_LOGPROB_TOL = 1e-9

CLAIM_LABELS = ("supported", "unsupported", "unknown")


@dataclass(frozen=True)
class TokenStep:
    """One decoding step: the chosen token and its truncated distribution.

    ``alternatives`` holds the top-K next-token candidates (including the
    chosen token) as ``(token, logprob)`` pairs sorted by descending
    logprob.  Sample tokens may carry only ``token`` and ``logprob``; greedy
    output steps always carry the full distribution.
    """

    token: str
    logprob: float
    alternatives: Optional[tuple[tuple[str, float], ...]] = None
    tail_logmass: Optional[float] = None
    uncond_logprob: Optional[float] = None

    def probs(self) -> tuple[np.ndarray, float]:
        """Probability masses of the listed alternatives and the tail."""
        alt = np.array([lp for _, lp in self.alternatives], dtype=float)
        tail = self.tail_logmass if self.tail_logmass is not None else -math.inf
        return np.exp(alt), math.exp(tail) if tail > -math.inf else 0.0

    def outcome_probs(self) -> np.ndarray:
        """Masses over all outcomes, with the tail as one pseudo-symbol."""
        alt, tail = self.probs()
        if tail > 0.0:
            return np.append(alt, tail)
        return alt


@dataclass(frozen=True)
class SampleResponse:
    """One sampled response; token-level detail is optional."""

    text: str
    total_logprob: Optional[float] = None
    tokens: Optional[tuple[TokenStep, ...]] = None


@dataclass(frozen=True)
class ClaimSpan:
    """An atomic claim mapped onto output token indices."""

    claim_id: str
    token_indices: tuple[int, ...]
    label: str
    ptrue_logprob: Optional[float] = None


@dataclass(frozen=True)
class GenerationRecord:
    id: str
    prompt: str
    output: tuple[TokenStep, ...]
    samples: tuple[SampleResponse, ...] = ()
    embedding: Optional[tuple[float, ...]] = None
    quality: dict[str, float] = field(default_factory=dict)
    claims: tuple[ClaimSpan, ...] = ()
    ptrue_logprob: Optional[float] = None
    verbalized_confidence: Optional[float] = None


@dataclass(frozen=True)
class CalibrationPair:
    """A (raw uncertainty, observed quality) pair from a calibration split."""

    uncertainty: float
    quality: float


# --- validation helpers -------------------------------------------------------


def _require(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise SchemaViolation(f"{ctx}.{key}", "missing required field")
    return obj[key]


def _number(value, field_name: str, allow_neg_inf: bool = False) -> float:
    if isinstance(value, str):
        if value == "-inf" and allow_neg_inf:
            return -math.inf
        raise SchemaViolation(field_name, f"expected a number, got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(field_name, f"expected a number, got {type(value).__name__}")
    value = float(value)
    if math.isnan(value):
        raise SchemaViolation(field_name, "NaN is not permitted")
    if math.isinf(value) and not (allow_neg_inf and value < 0):
        raise SchemaViolation(field_name, "infinite value not permitted here")
    return value


def _logprob(value, field_name: str, allow_neg_inf: bool = False) -> float:
    num = _number(value, field_name, allow_neg_inf=allow_neg_inf)
    if num > 0.0:
        raise SchemaViolation(field_name, f"log-probability must be <= 0, got {num}")
    return num


def _parse_step(obj, position: int, ctx: str, require_distribution: bool) -> TokenStep:
    if not isinstance(obj, dict):
        raise SchemaViolation(ctx, "token step must be an object")
    token = _require(obj, "token", ctx)
    if not isinstance(token, str):
        raise SchemaViolation(f"{ctx}.token", "must be a string")
    logprob = _logprob(_require(obj, "logprob", ctx), f"{ctx}.logprob")

    alternatives = None
    tail_logmass = None
    if "alternatives" in obj or require_distribution:
        raw_alts = _require(obj, "alternatives", ctx)
        if not isinstance(raw_alts, list) or len(raw_alts) < 1:
            raise SchemaViolation(f"{ctx}.alternatives", "need at least one alternative")
        alts = []
        for i, pair in enumerate(raw_alts):
            if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str)):
                raise SchemaViolation(f"{ctx}.alternatives[{i}]", "expected [token, logprob]")
            alts.append((pair[0], _logprob(pair[1], f"{ctx}.alternatives[{i}]", allow_neg_inf=True)))
        tail_logmass = _logprob(
            _require(obj, "tail_logmass", ctx), f"{ctx}.tail_logmass", allow_neg_inf=True
        )
        for i in range(len(alts) - 1):
            if alts[i][1] < alts[i + 1][1]:
                raise SchemaViolation(f"{ctx}.alternatives", "must be sorted by descending logprob")
        matches = [lp for tok, lp in alts if tok == token]
        if len(matches) != 1:
            raise SchemaViolation(
                f"{ctx}.alternatives", f"chosen token must appear exactly once, found {len(matches)}"
            )
        if abs(matches[0] - logprob) > _CHOSEN_LOGPROB_TOL:
            raise SchemaViolation(
                f"{ctx}.alternatives", "listed logprob of the chosen token disagrees with logprob"
            )
        total = np.logaddexp.reduce([lp for _, lp in alts] + [tail_logmass])
        if abs(total) > _NORMALIZATION_TOL:
            raise NormalizationError(position, f"log-mass sums to {total:.3e}, expected 0")
        alternatives = tuple(alts)

    uncond = obj.get("uncond_logprob")
    if uncond is not None:
        uncond = _logprob(uncond, f"{ctx}.uncond_logprob")
    return TokenStep(
        token=token,
        logprob=logprob,
        alternatives=alternatives,
        tail_logmass=tail_logmass,
        uncond_logprob=uncond,
    )


def _parse_sample(obj, idx: int) -> SampleResponse:
    ctx = f"samples[{idx}]"
    if not isinstance(obj, dict):
        raise SchemaViolation(ctx, "sample must be an object")
    text = _require(obj, "text", ctx)
    if not isinstance(text, str):
        raise SchemaViolation(f"{ctx}.text", "must be a string")
    total = _require(obj, "total_logprob", ctx)
    total = None if total is None else _logprob(total, f"{ctx}.total_logprob")
    tokens = None
    if obj.get("tokens") is not None:
        raw = obj["tokens"]
        if not isinstance(raw, list):
            raise SchemaViolation(f"{ctx}.tokens", "must be a list")
        tokens = tuple(
            _parse_step(t, position=i, ctx=f"{ctx}.tokens[{i}]", require_distribution=False)
            for i, t in enumerate(raw)
        )
        if total is None:
            raise SchemaViolation(f"{ctx}.total_logprob", "required when tokens are present")
        if abs(total - sum(t.logprob for t in tokens)) > _NORMALIZATION_TOL:
            raise SchemaViolation(
                f"{ctx}.total_logprob", "does not match the sum of token logprobs"
            )
    return SampleResponse(text=text, total_logprob=total, tokens=tokens)


def _parse_claim(obj, idx: int, output_len: int) -> ClaimSpan:
    ctx = f"claims[{idx}]"
    if not isinstance(obj, dict):
        raise SchemaViolation(ctx, "claim must be an object")
    claim_id = _require(obj, "claim_id", ctx)
    if not isinstance(claim_id, str):
        raise SchemaViolation(f"{ctx}.claim_id", "must be a string")
    raw_idx = _require(obj, "token_indices", ctx)
    if not isinstance(raw_idx, list) or not raw_idx:
        raise SchemaViolation(f"{ctx}.token_indices", "must be a non-empty list")
    indices = []
    for v in raw_idx:
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaViolation(f"{ctx}.token_indices", "indices must be integers")
        indices.append(v)
    for a, b in zip(indices, indices[1:]):
        if b <= a:
            raise SchemaViolation(f"{ctx}.token_indices", "indices must be strictly increasing")
    if indices[0] < 0 or indices[-1] >= output_len:
        raise SchemaViolation(f"{ctx}.token_indices", "index outside the output range")
    label = _require(obj, "label", ctx)
    if label not in CLAIM_LABELS:
        raise SchemaViolation(f"{ctx}.label", f"must be one of {CLAIM_LABELS}")
    ptrue = obj.get("ptrue_logprob")
    if ptrue is not None:
        ptrue = _logprob(ptrue, f"{ctx}.ptrue_logprob")
    return ClaimSpan(claim_id=claim_id, token_indices=tuple(indices), label=label, ptrue_logprob=ptrue)


def _reject_constant(token: str):
    raise MalformedJson(f"non-finite JSON constant {token!r} is not permitted")


def parse_record(line: str) -> GenerationRecord:
    """Parse and fully validate one JSONL line into a record.

    Raises ``MalformedJson`` for unparseable input, ``SchemaViolation`` for
    structural problems, and ``NormalizationError`` when a step's truncated
    distribution does not sum to one within 1e-6.
    """
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from exc
    if not isinstance(obj, dict):
        raise SchemaViolation("record", "top-level value must be an object")

    rec_id = _require(obj, "id", "record")
    if not isinstance(rec_id, str) or not rec_id:
        raise SchemaViolation("id", "must be a non-empty string")
    prompt = _require(obj, "prompt", "record")
    if not isinstance(prompt, str):
        raise SchemaViolation("prompt", "must be a string")

    raw_output = _require(obj, "output", "record")
    if not isinstance(raw_output, list):
        raise SchemaViolation("output", "must be a list")
    output = tuple(
        _parse_step(s, position=i, ctx=f"output[{i}]", require_distribution=True)
        for i, s in enumerate(raw_output)
    )

    raw_samples = obj.get("samples", [])
    if not isinstance(raw_samples, list):
        raise SchemaViolation("samples", "must be a list")
    samples = tuple(_parse_sample(s, i) for i, s in enumerate(raw_samples))

    embedding = None
    if obj.get("embedding") is not None:
        raw_emb = obj["embedding"]
        if not isinstance(raw_emb, list) or not raw_emb:
            raise SchemaViolation("embedding", "must be a non-empty list of numbers")
        embedding = tuple(_number(v, f"embedding[{i}]") for i, v in enumerate(raw_emb))

    raw_quality = obj.get("quality", {})
    if not isinstance(raw_quality, dict):
        raise SchemaViolation("quality", "must be an object")
    quality = {}
    for key, val in raw_quality.items():
        num = _number(val, f"quality.{key}")
        if key in ("alignscore", "accuracy") and not 0.0 <= num <= 1.0:
            raise SchemaViolation(f"quality.{key}", "must lie in [0, 1]")
        quality[key] = num

    raw_claims = obj.get("claims", [])
    if not isinstance(raw_claims, list):
        raise SchemaViolation("claims", "must be a list")
    claims = tuple(_parse_claim(c, i, len(output)) for i, c in enumerate(raw_claims))

    ptrue = obj.get("ptrue_logprob")
    if ptrue is not None:
        ptrue = _logprob(ptrue, "ptrue_logprob")
    verb = obj.get("verbalized_confidence")
    if verb is not None:
        verb = _number(verb, "verbalized_confidence")
        if not 0.0 <= verb <= 1.0:
            raise SchemaViolation("verbalized_confidence", "must lie in [0, 1]")

    return GenerationRecord(
        id=rec_id,
        prompt=prompt,
        output=output,
        samples=samples,
        embedding=embedding,
        quality=quality,
        claims=claims,
        ptrue_logprob=ptrue,
        verbalized_confidence=verb,
    )


# --- serialization -------------------------------------------------------------


def _emit_float(value: float):
    return "-inf" if value == -math.inf else value


def _step_dict(step: TokenStep) -> dict:
    out: dict = {"token": step.token, "logprob": step.logprob}
    if step.alternatives is not None:
        out["alternatives"] = [[tok, _emit_float(lp)] for tok, lp in step.alternatives]
        out["tail_logmass"] = _emit_float(step.tail_logmass)
    if step.uncond_logprob is not None:
        out["uncond_logprob"] = step.uncond_logprob
    return out


def serialize_record(record: GenerationRecord) -> str:
    """Canonical single-line JSON form of a record (no trailing newline)."""
    obj: dict = {
        "id": record.id,
        "prompt": record.prompt,
        "output": [_step_dict(s) for s in record.output],
        "samples": [],
        "quality": {k: record.quality[k] for k in sorted(record.quality)},
        "claims": [],
    }
    for sample in record.samples:
        s: dict = {"text": sample.text, "total_logprob": sample.total_logprob}
        if sample.tokens is not None:
            s["tokens"] = [_step_dict(t) for t in sample.tokens]
        obj["samples"].append(s)
    if record.embedding is not None:
        obj["embedding"] = list(record.embedding)
    for claim in record.claims:
        c: dict = {
            "claim_id": claim.claim_id,
            "token_indices": list(claim.token_indices),
            "label": claim.label,
        }
        if claim.ptrue_logprob is not None:
            c["ptrue_logprob"] = claim.ptrue_logprob
        obj["claims"].append(c)
    if record.ptrue_logprob is not None:
        obj["ptrue_logprob"] = record.ptrue_logprob
    if record.verbalized_confidence is not None:
        obj["verbalized_confidence"] = record.verbalized_confidence
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def stream_dataset(path) -> Iterator[GenerationRecord]:
    """Yield records from a JSONL file in order, with constant memory.

    Parse failures propagate as ``DatasetError`` carrying the 1-based line
    number; records before the failing line are still yielded.
    """
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.rstrip("\n")
            if not stripped:
                continue
            try:
                yield parse_record(stripped)
            except Exception as exc:
                raise DatasetError(line_number, exc) from exc


def write_dataset(records: Sequence[GenerationRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(serialize_record(record))
            handle.write("\n")
