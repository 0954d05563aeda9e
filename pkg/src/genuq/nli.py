"""Natural-language-inference providers.

The package never runs an NLI model in-process.  ``HttpNliClient`` talks to
the sidecar service over its JSON protocol with batching, retries, and a
result cache; ``StubNli`` is the deterministic offline fallback used by the
whole test suite (exact string match counts as entailment, anything else as
contradiction); ``ConstantNli`` pins every pair to one relation, which makes
bridge properties like "never entail" directly checkable.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import requests

from .errors import ProtocolViolation, TransportError

__all__ = [
    "NliResult",
    "NliProvider",
    "StubNli",
    "ConstantNli",
    "HttpNliClient",
    "similarity_from_nli",
]

_SIMPLEX_TOL = 1e-6


@dataclass(frozen=True)
class NliResult:
    """Probability triple over entail / contradict / neutral."""

    entail: float
    contra: float
    neutral: float

    def relation(self) -> str:
        """Argmax relation; ties resolve entail > contra > neutral."""
        best = max(
            (self.entail, 2, "entail"),
            (self.contra, 1, "contra"),
            (self.neutral, 0, "neutral"),
        )
        return best[2]


def _check_simplex(entail: float, contra: float, neutral: float) -> NliResult:
    for name, v in (("entail", entail), ("contra", contra), ("neutral", neutral)):
        if not isinstance(v, (int, float)) or not 0.0 <= float(v) <= 1.0:
            raise ProtocolViolation(f"{name} probability out of range: {v!r}")
    if abs(entail + contra + neutral - 1.0) > _SIMPLEX_TOL:
        raise ProtocolViolation(
            f"probabilities sum to {entail + contra + neutral}, expected 1"
        )
    return NliResult(float(entail), float(contra), float(neutral))


class NliProvider:
    """Base interface: classify ordered (premise, hypothesis) pairs."""

    def nli_pair(self, premise: str, hypothesis: str) -> NliResult:
        return self.nli_batch([(premise, hypothesis)])[0]

    def nli_batch(self, pairs: Sequence[tuple[str, str]]) -> list[NliResult]:
        return [self.nli_pair(p, h) for p, h in pairs]


class StubNli(NliProvider):
    """Exact string match entails; everything else contradicts.

    Deterministic and network-free; makes clustering and claim-probability
    oracles hand-computable.
    """

    def nli_pair(self, premise: str, hypothesis: str) -> NliResult:
        if premise == hypothesis:
            return NliResult(1.0, 0.0, 0.0)
        return NliResult(0.0, 1.0, 0.0)


class ConstantNli(NliProvider):
    """Returns the same one-hot verdict for every pair."""

    def __init__(self, relation: str):
        if relation not in ("entail", "contra", "neutral"):
            raise ValueError(f"unknown relation {relation!r}")
        self._result = NliResult(
            1.0 if relation == "entail" else 0.0,
            1.0 if relation == "contra" else 0.0,
            1.0 if relation == "neutral" else 0.0,
        )

    def nli_pair(self, premise: str, hypothesis: str) -> NliResult:
        return self._result


class HttpNliClient(NliProvider):
    """Client for the NLI sidecar's HTTP protocol.

    Requests are chunked to at most ``max_batch`` pairs, transport failures
    retry with exponential backoff, and results are cached keyed on
    (premise, hypothesis, model id) so repeated scoring passes are free.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        max_batch: int = 64,
        retries: int = 3,
        backoff: float = 0.5,
        model_id: str = "",
        session: Optional[requests.Session] = None,
    ):
        if max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_batch = max_batch
        self.retries = retries
        self.backoff = backoff
        self.model_id = model_id
        self.server_model_id: Optional[str] = None
        self._session = session or requests.Session()
        self._cache: dict[tuple[str, str, str], NliResult] = {}
        self._lock = threading.Lock()

    def _post(self, path: str, payload: dict) -> dict:
        last_exc: Optional[Exception] = None
        for attempt in range(self.retries):
            try:
                response = self._session.post(
                    f"{self.endpoint}{path}", json=payload, timeout=self.timeout
                )
                response.raise_for_status()
                return response.json()
            except (requests.RequestException, ValueError) as exc:
                last_exc = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * (2**attempt))
        raise TransportError(f"POST {path} failed after {self.retries} attempts: {last_exc}")

    def nli_batch(self, pairs: Sequence[tuple[str, str]]) -> list[NliResult]:
        results: dict[int, NliResult] = {}
        todo: list[tuple[int, tuple[str, str]]] = []
        with self._lock:
            for i, pair in enumerate(pairs):
                key = (pair[0], pair[1], self.model_id)
                cached = self._cache.get(key)
                if cached is not None:
                    results[i] = cached
                else:
                    todo.append((i, pair))
        for start in range(0, len(todo), self.max_batch):
            chunk = todo[start : start + self.max_batch]
            body = self._post("/v1/nli", {"pairs": [[p, h] for _, (p, h) in chunk]})
            raw = body.get("results")
            if not isinstance(raw, list) or len(raw) != len(chunk):
                raise ProtocolViolation(
                    f"expected {len(chunk)} results, got {raw if raw is None else len(raw)}"
                )
            with self._lock:
                self.server_model_id = body.get("model_id", self.server_model_id)
                for (i, pair), item in zip(chunk, raw):
                    if not isinstance(item, dict):
                        raise ProtocolViolation("result entries must be objects")
                    result = _check_simplex(
                        item.get("entail"), item.get("contra"), item.get("neutral")
                    )
                    results[i] = result
                    self._cache[(pair[0], pair[1], self.model_id)] = result
        return [results[i] for i in range(len(pairs))]

    def quality_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        """Alignment-style quality scores for (claim, context) pairs."""
        body = self._post("/v1/quality", {"pairs": [[a, b] for a, b in pairs]})
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(pairs):
            raise ProtocolViolation("quality response must carry one score per pair")
        out = []
        for s in scores:
            if not isinstance(s, (int, float)) or not 0.0 <= float(s) <= 1.0:
                raise ProtocolViolation(f"quality score out of range: {s!r}")
            out.append(float(s))
        return out


def similarity_from_nli(result: NliResult, mode: str) -> float:
    """Turn a verdict triple into a [0, 1] similarity.

    ``entail`` uses the entailment probability directly; ``contra`` uses one
    minus the contradiction probability.
    """
    if mode == "entail":
        return result.entail
    if mode == "contra":
        return 1.0 - result.contra
    raise ValueError(f"unknown NLI similarity mode {mode!r}")
