"""Conformance: the scoring engine's HTTP client against a live sidecar.

Runs a real uvicorn server on a loopback port and drives it through
``genuq.nli.HttpNliClient``, the exact client the batch harness uses, so
the wire protocol is exercised end to end, not just in-process.
"""

import socket
import threading
import time

import pytest
import uvicorn

from genuq.nli import HttpNliClient

from nli_sidecar import SidecarConfig, create_app


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def live_endpoint():
    port = _free_port()
    app = create_app(SidecarConfig(max_batch=64, port=port))
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("sidecar did not start in time")
        time.sleep(0.01)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestProtocolRoundTrip:
    def test_batch_of_64_is_order_preserving_and_simplex(self, live_endpoint):
        client = HttpNliClient(live_endpoint, max_batch=64)
        pairs = []
        for i in range(64):
            if i % 2 == 0:
                pairs.append((f"text {i}", f"text {i}"))
            else:
                pairs.append((f"text {i}", "wholly other words entirely"))
        results = client.nli_batch(pairs)
        assert len(results) == 64
        for i, result in enumerate(results):
            total = result.entail + result.contra + result.neutral
            assert abs(total - 1.0) < 1e-6
            expected = "entail" if i % 2 == 0 else "contra"
            assert result.relation() == expected

    def test_identical_strings_yield_entail_argmax(self, live_endpoint):
        client = HttpNliClient(live_endpoint)
        result = client.nli_pair("the cat sat", "the cat sat")
        assert result.relation() == "entail"
        assert result.entail > result.contra and result.entail > result.neutral

    def test_cache_hit_is_bit_identical(self, live_endpoint):
        client = HttpNliClient(live_endpoint)
        first = client.nli_pair("alpha beta", "alpha gamma")
        second = client.nli_pair("alpha beta", "alpha gamma")
        assert first == second

    def test_quality_endpoint_through_client(self, live_endpoint):
        client = HttpNliClient(live_endpoint)
        scores = client.quality_batch([("a b", "a b c"), ("zz", "a b")])
        assert len(scores) == 2
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_oversized_batches_are_chunked_by_the_client(self, live_endpoint):
        client = HttpNliClient(live_endpoint, max_batch=16)
        pairs = [(f"p {i}", f"p {i}") for i in range(50)]
        results = client.nli_batch(pairs)
        assert len(results) == 50
        assert all(r.relation() == "entail" for r in results)
