"""Shared generators for randomized property tests."""

from __future__ import annotations

import random

from traffictag.bio import TAGS
from traffictag.corpus import SLOT_TYPES, SlotSpan


def random_span_set(rng: random.Random, n_tokens: int) -> list[SlotSpan]:
    """Random legal (disjoint, in-bounds) span set over n_tokens tokens."""
    spans = []
    pos = 0
    while pos < n_tokens:
        if rng.random() < 0.4:
            length = rng.randint(1, min(3, n_tokens - pos))
            spans.append(SlotSpan(rng.choice(SLOT_TYPES), pos, pos + length))
            pos += length
        else:
            pos += 1
    return spans


def random_tag_sequence(rng: random.Random, n_tokens: int) -> list[str]:
    """Uniformly random tags; usually violates the BIO rule."""
    return [rng.choice(TAGS) for _ in range(n_tokens)]
