"""Inference backends behind the wire protocol.

Every backend returns probability triples on the simplex; softmax happens
here, server-side, so the wire never carries logits.  The lexical backend
is deterministic and dependency-free, which keeps the service testable
offline; the transformers backend wraps a cross-encoder NLI model.
"""

from __future__ import annotations

from .config import LEXICAL_MODEL, SidecarConfig

Triple = tuple[float, float, float]


class LexicalOverlapBackend:
    """Word-overlap heuristic: identical pairs entail, disjoint contradict.

    With overlap ``o`` (Jaccard over word sets) the triple is
    ``(0.8 o + 0.05, 0.8 (1 - o) + 0.05, 0.1)``, so entailment is the
    argmax exactly when the texts mostly agree.
    """

    model_id = LEXICAL_MODEL

    @staticmethod
    def _overlap(a: str, b: str) -> float:
        set_a, set_b = set(a.split()), set(b.split())
        if not set_a and not set_b:
            return 1.0
        union = set_a | set_b
        return len(set_a & set_b) / len(union) if union else 0.0

    def nli(self, pairs: list[tuple[str, str]]) -> list[Triple]:
        out = []
        for premise, hypothesis in pairs:
            o = self._overlap(premise, hypothesis)
            out.append((0.8 * o + 0.05, 0.8 * (1.0 - o) + 0.05, 0.1))
        return out

    def quality(self, pairs: list[tuple[str, str]]) -> list[float]:
        # (claim, context): how much of the claim the context covers
        scores = []
        for claim, context in pairs:
            claim_words = set(claim.split())
            if not claim_words:
                scores.append(0.0)
                continue
            covered = len(claim_words & set(context.split()))
            scores.append(covered / len(claim_words))
        return scores


class TransformersBackend:
    """Cross-encoder NLI model via the transformers library."""

    def __init__(self, model_id: str, device: str = "cpu"):
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self._torch = torch
        self.model_id = model_id
        self.device = device
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForSequenceClassification.from_pretrained(model_id)
        self.model.to(device)
        self.model.eval()
        self._label_index = self._resolve_labels()

    def _resolve_labels(self) -> dict[str, int]:
        id2label = getattr(self.model.config, "id2label", {}) or {}
        index = {}
        for idx, label in id2label.items():
            name = str(label).lower()
            if name.startswith("entail"):
                index["entail"] = int(idx)
            elif name.startswith("contra"):
                index["contra"] = int(idx)
            elif name.startswith("neutral"):
                index["neutral"] = int(idx)
        if set(index) != {"entail", "contra", "neutral"}:
            raise RuntimeError(
                f"model {self.model_id} does not expose entail/neutral/contradiction labels"
            )
        return index

    def _probs(self, pairs: list[tuple[str, str]]):
        torch = self._torch
        encoded = self.tokenizer(
            [p for p, _ in pairs],
            [h for _, h in pairs],
            padding=True,
            truncation=True,
            return_tensors="pt",
        ).to(self.device)
        with torch.no_grad():
            logits = self.model(**encoded).logits
        return torch.softmax(logits, dim=-1).cpu().tolist()

    def nli(self, pairs: list[tuple[str, str]]) -> list[Triple]:
        probs = self._probs(pairs)
        e, c, n = (
            self._label_index["entail"],
            self._label_index["contra"],
            self._label_index["neutral"],
        )
        return [(row[e], row[c], row[n]) for row in probs]

    def quality(self, pairs: list[tuple[str, str]]) -> list[float]:
        # alignment-style score: probability that the context entails the claim
        probs = self.nli([(context, claim) for claim, context in pairs])
        return [entail for entail, _, _ in probs]


def load_backend(config: SidecarConfig):
    if config.model == LEXICAL_MODEL:
        return LexicalOverlapBackend()
    return TransformersBackend(config.model, device=config.device)
