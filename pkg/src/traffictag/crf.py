"""Linear-chain CRF: exact log-partition, NLL, Viterbi, and a brute-force oracle.

A path through tags (y1..yn) scores

    start[y1] + sum_t emissions[t, yt] + sum_t transitions[y_t, y_{t+1}] + end[yn]

The partition function sums exp(score) over all T^n paths; it is computed
exactly by the forward recursion in log space, differentiably, so training
the negative log-likelihood needs no hand-derived marginals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import bio
from .autodiff import Tensor, add, getitem, logsumexp, reshape

NEG_INF = -1e4  # soft minus-infinity for constrained decoding


@dataclass
class CrfModel:
    """Transition scores between tags plus start/end scores.

    ``transitions[i, j]`` scores tag j directly following tag i.
    """

    transitions: Tensor
    start: Tensor
    end: Tensor

    @property
    def num_tags(self) -> int:
        return self.transitions.data.shape[0]

    def __post_init__(self):
        t = self.num_tags
        if self.transitions.data.shape != (t, t):
            raise ValueError(f"transitions must be square, got {self.transitions.shape}")
        if self.start.data.shape != (t,) or self.end.data.shape != (t,):
            raise ValueError("start/end score shapes must match the tag count")


def _check_emissions(emissions: Tensor, crf: CrfModel) -> tuple[int, int]:
    if emissions.ndim != 2:
        raise ValueError(f"emissions must be [n, tags], got shape {emissions.shape}")
    n, t = emissions.data.shape
    if n < 1:
        raise ValueError("empty sequence: CRF needs at least one token")
    if t != crf.num_tags:
        raise ValueError(f"emission width {t} != tag count {crf.num_tags}")
    return n, t


def log_partition(emissions: Tensor, crf: CrfModel) -> Tensor:
    """log sum over all tag paths of exp(path score), differentiable."""
    n, t = _check_emissions(emissions, crf)
    alpha = add(getitem(emissions, 0), crf.start)
    for i in range(1, n):
        scores = add(reshape(alpha, (t, 1)), crf.transitions)
        alpha = add(logsumexp(scores, axis=0), getitem(emissions, i))
    return logsumexp(add(alpha, crf.end))


def gold_score(emissions: Tensor, crf: CrfModel, tags: Sequence[int]) -> Tensor:
    """Differentiable score of one tag path."""
    n, t = _check_emissions(emissions, crf)
    tags = list(tags)
    if len(tags) != n:
        raise ValueError(f"gold path length {len(tags)} != sequence length {n}")
    if any(not 0 <= y < t for y in tags):
        raise ValueError(f"gold tag out of range [0, {t})")
    score = add(getitem(crf.start, tags[0]), getitem(emissions, (0, tags[0])))
    for i in range(1, n):
        score = add(score, getitem(crf.transitions, (tags[i - 1], tags[i])))
        score = add(score, getitem(emissions, (i, tags[i])))
    return add(score, getitem(crf.end, tags[-1]))


def nll(emissions: Tensor, crf: CrfModel, tags: Sequence[int]) -> Tensor:
    """Negative log-likelihood of a gold path; non-negative by construction."""
    return log_partition(emissions, crf) - gold_score(emissions, crf, tags)


def bio_transition_mask(num_tags: int) -> np.ndarray:
    """Additive mask (0 or NEG_INF) forbidding I- tags without a same-type
    B-/I- predecessor, for the 9-tag BIO inventory."""
    if num_tags != bio.NUM_TAGS:
        raise ValueError(f"constrained decode needs the {bio.NUM_TAGS}-tag BIO inventory")
    mask = np.zeros((num_tags, num_tags))
    for j, tag in enumerate(bio.TAGS):
        kind, slot = bio.split_tag(tag)
        if kind != "I":
            continue
        for i, prev in enumerate(bio.TAGS):
            prev_kind, prev_slot = bio.split_tag(prev)
            if prev_kind == bio.OUTSIDE or prev_slot != slot:
                mask[i, j] = NEG_INF
    return mask


def bio_start_mask(num_tags: int) -> np.ndarray:
    """Additive start mask forbidding an initial I- tag."""
    if num_tags != bio.NUM_TAGS:
        raise ValueError(f"constrained decode needs the {bio.NUM_TAGS}-tag BIO inventory")
    mask = np.zeros(num_tags)
    for j, tag in enumerate(bio.TAGS):
        if bio.split_tag(tag)[0] == "I":
            mask[j] = NEG_INF
    return mask


def viterbi(
    emissions: Tensor | np.ndarray, crf: CrfModel, constrained: bool = False
) -> tuple[list[int], float]:
    """Highest-scoring tag path and its score.

    Ties break toward the lowest tag index at every backtracking step. With
    ``constrained`` set, transitions that would produce an invalid BIO
    bigram (and I- tags at position 0) are masked out.
    """
    e = emissions.data if isinstance(emissions, Tensor) else np.asarray(emissions, dtype=float)
    if e.ndim != 2 or e.shape[0] < 1:
        raise ValueError(f"emissions must be non-empty [n, tags], got shape {e.shape}")
    n, t = e.shape
    if t != crf.num_tags:
        raise ValueError(f"emission width {t} != tag count {crf.num_tags}")
    trans = crf.transitions.data.copy()
    start = crf.start.data.copy()
    if constrained:
        trans += bio_transition_mask(t)
        start += bio_start_mask(t)

    delta = e[0] + start
    backptr = np.empty((n, t), dtype=np.intp)
    for i in range(1, n):
        scores = delta[:, None] + trans  # [prev, cur]
        backptr[i] = scores.argmax(axis=0)  # argmax takes the lowest index on ties
        delta = scores[backptr[i], np.arange(t)] + e[i]
    delta = delta + crf.end.data
    last = int(delta.argmax())
    best_score = float(delta[last])
    path = [last]
    for i in range(n - 1, 0, -1):
        path.append(int(backptr[i, path[-1]]))
    path.reverse()
    return path, best_score


def brute_force_oracle(
    emissions: Tensor | np.ndarray, crf: CrfModel
) -> tuple[float, list[int], float]:
    """Exhaustive enumeration of all T^n paths: (log partition, best path,
    best score). The reference implementation the fast routines are tested
    against; refuses instances above 10^6 paths."""
    e = emissions.data if isinstance(emissions, Tensor) else np.asarray(emissions, dtype=float)
    n, t = e.shape
    if t**n > 10**6:
        raise ValueError(f"instance too large for enumeration: {t}^{n} paths")
    trans = crf.transitions.data
    start = crf.start.data
    end = crf.end.data
    scores = []
    best_path: list[int] | None = None
    best_score = -np.inf
    for path in itertools.product(range(t), repeat=n):
        s = start[path[0]] + end[path[-1]]
        for i, y in enumerate(path):
            s += e[i, y]
        for a, b in zip(path, path[1:]):
            s += trans[a, b]
        scores.append(s)
        if s > best_score:
            best_score = s
            best_path = list(path)
    arr = np.asarray(scores)
    m = arr.max()
    log_z = float(m + np.log(np.exp(arr - m).sum()))
    return log_z, best_path, float(best_score)
