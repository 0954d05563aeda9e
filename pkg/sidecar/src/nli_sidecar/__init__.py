"""Batched text-pair inference service: NLI verdicts and alignment-style
quality scores behind a small JSON-over-HTTP protocol."""

from .app import create_app, serve
from .backends import LexicalOverlapBackend, load_backend
from .config import LEXICAL_MODEL, SidecarConfig

__version__ = "0.1.0"

__all__ = [
    "create_app",
    "serve",
    "SidecarConfig",
    "LEXICAL_MODEL",
    "LexicalOverlapBackend",
    "load_backend",
]
