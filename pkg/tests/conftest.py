import math

import pytest

from genuq.records import ClaimSpan, GenerationRecord, SampleResponse, TokenStep


def make_step(token="a", logprob=None, others=None, uncond_logprob=None):
    """Build a valid TokenStep whose truncated distribution sums to one.

    ``others`` maps alternative tokens to probabilities; whatever mass is
    left over goes to the tail pseudo-symbol.
    """
    logprob = math.log(0.5) if logprob is None else logprob
    p_chosen = math.exp(logprob)
    others = others or {}
    alternatives = [(token, logprob)] + [(t, math.log(p)) for t, p in others.items()]
    used = p_chosen + sum(others.values())
    if used > 1.0 + 1e-9:
        raise ValueError(f"probabilities exceed 1: {used}")
    tail = 1.0 - used
    tail_logmass = math.log(tail) if tail > 1e-12 else -math.inf
    alternatives.sort(key=lambda pair: -pair[1])
    return TokenStep(
        token=token,
        logprob=logprob,
        alternatives=tuple(alternatives),
        tail_logmass=tail_logmass,
        uncond_logprob=uncond_logprob,
    )


def uniform_step(token="a", n=4, uncond_logprob=None):
    """A step uniform over n listed alternatives with an exhausted tail."""
    p = 1.0 / n
    vocab = ["a", "b", "c", "d", "e", "f", "g", "h"]
    others = {t: p for t in vocab[:n] if t != token}
    others = dict(list(others.items())[: n - 1])
    return make_step(token=token, logprob=math.log(p), others=others, uncond_logprob=uncond_logprob)


def one_hot_step(token="a", n=4, uncond_logprob=None):
    """A step with all mass on the chosen token among n listed alternatives."""
    vocab = ["a", "b", "c", "d", "e", "f", "g", "h"]
    alternatives = [(token, 0.0)]
    for t in vocab:
        if len(alternatives) == n:
            break
        if t != token:
            alternatives.append((t, -math.inf))
    return TokenStep(
        token=token,
        logprob=0.0,
        alternatives=tuple(alternatives),
        tail_logmass=-math.inf,
        uncond_logprob=uncond_logprob,
    )


def make_record(
    steps,
    record_id="r1",
    prompt="q",
    samples=(),
    embedding=None,
    quality=None,
    claims=(),
    ptrue_logprob=None,
    verbalized_confidence=None,
):
    return GenerationRecord(
        id=record_id,
        prompt=prompt,
        output=tuple(steps),
        samples=tuple(samples),
        embedding=embedding,
        quality=quality or {},
        claims=tuple(claims),
        ptrue_logprob=ptrue_logprob,
        verbalized_confidence=verbalized_confidence,
    )


def make_sample(text, total_logprob=None, token_logprobs=None):
    tokens = None
    if token_logprobs is not None:
        words = text.split()
        assert len(words) == len(token_logprobs)
        tokens = tuple(
            TokenStep(token=w, logprob=lp) for w, lp in zip(words, token_logprobs)
        )
        if total_logprob is None:
            total_logprob = sum(token_logprobs)
    return SampleResponse(text=text, total_logprob=total_logprob, tokens=tokens)


def make_claim(indices, claim_id="c0", label="supported", ptrue_logprob=None):
    return ClaimSpan(
        claim_id=claim_id,
        token_indices=tuple(indices),
        label=label,
        ptrue_logprob=ptrue_logprob,
    )


@pytest.fixture
def three_token_record():
    steps = [
        make_step("a", math.log(0.5), {"b": 0.25}),
        make_step("b", math.log(0.25), {"a": 0.5, "c": 0.125}),
        make_step("c", math.log(0.8), {"a": 0.1}),
    ]
    return make_record(steps)
