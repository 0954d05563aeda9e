"""Command-line launcher for the sidecar service."""

from __future__ import annotations

import argparse
import sys

from .app import serve
from .config import LEXICAL_MODEL, SidecarConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nli-sidecar")
    parser.add_argument("--model", default=LEXICAL_MODEL,
                        help="cross-encoder model id, or the built-in lexical backend")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-batch", type=int, default=64)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    args = parser.parse_args(argv)
    try:
        config = SidecarConfig(
            model=args.model,
            device=args.device,
            max_batch=args.max_batch,
            host=args.host,
            port=args.port,
        )
        serve(config)
    except Exception as exc:  # startup failure must exit nonzero
        print(f"sidecar failed to start: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
