"""Service configuration."""

from __future__ import annotations

from dataclasses import dataclass

LEXICAL_MODEL = "lexical-overlap"


@dataclass
class SidecarConfig:
    """Runtime options for one service instance.

    ``model`` is either the built-in deterministic ``lexical-overlap``
    backend or a HuggingFace cross-encoder identifier (requires the
    ``model`` extra).  ``max_batch`` bounds how many pairs reach the model
    in one forward pass; larger requests are chunked transparently.
    """

    model: str = LEXICAL_MODEL
    device: str = "cpu"
    max_batch: int = 64
    host: str = "127.0.0.1"
    port: int = 8080

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if not 0 < self.port < 65536:
            raise ValueError("port must be a valid TCP port")
