"""Linear-chain CRF against the exhaustive-enumeration oracle."""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from traffictag import bio
from traffictag.autodiff import Tensor, grad_check
from traffictag.crf import (
    CrfModel,
    bio_start_mask,
    bio_transition_mask,
    brute_force_oracle,
    gold_score,
    log_partition,
    nll,
    viterbi,
)


def zero_model(num_tags: int) -> CrfModel:
    return CrfModel(
        Tensor(np.zeros((num_tags, num_tags))),
        Tensor(np.zeros(num_tags)),
        Tensor(np.zeros(num_tags)),
    )


def random_instance(rng: np.random.Generator, n: int, t: int):
    emissions = Tensor(rng.uniform(-2, 2, size=(n, t)))
    model = CrfModel(
        Tensor(rng.uniform(-2, 2, size=(t, t))),
        Tensor(rng.uniform(-2, 2, size=t)),
        Tensor(rng.uniform(-2, 2, size=t)),
    )
    return emissions, model


class TestLogPartition:
    def test_uniform_two_by_two(self):
        value = log_partition(Tensor(np.zeros((2, 2))), zero_model(2))
        assert value.item() == pytest.approx(math.log(4), abs=1e-12)

    def test_single_token_is_logsumexp(self):
        emissions = Tensor([[0.3, -1.2, 2.0]])
        value = log_partition(emissions, zero_model(3))
        expected = math.log(sum(math.exp(v) for v in (0.3, -1.2, 2.0)))
        assert value.item() == pytest.approx(expected, abs=1e-12)

    def test_hand_enumerated_value(self):
        # four paths score 1, 2, 0, 1 -> log(e + e^2 + 1 + e), frozen from the
        # enumeration oracle
        emissions = Tensor([[1.0, 0.0], [0.0, 1.0]])
        value = log_partition(emissions, zero_model(2))
        assert value.item() == pytest.approx(2.6265233750364456, abs=1e-12)
        oracle_log_z, _, _ = brute_force_oracle(emissions, zero_model(2))
        assert value.item() == pytest.approx(oracle_log_z, abs=1e-12)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            log_partition(Tensor(np.zeros((0, 2))), zero_model(2))

    def test_row_shift_moves_log_z_by_constant(self):
        rng = np.random.default_rng(3)
        emissions, model = random_instance(rng, 4, 3)
        base = log_partition(emissions, model).item()
        base_path, _ = viterbi(emissions, model)
        shifted = emissions.data.copy()
        shifted[2] += 1.7
        after = log_partition(Tensor(shifted), model).item()
        after_path, _ = viterbi(Tensor(shifted), model)
        assert after == pytest.approx(base + 1.7, abs=1e-10)
        assert after_path == base_path


class TestNll:
    def test_hand_value(self):
        emissions = Tensor([[1.0, 0.0], [0.0, 1.0]])
        loss = nll(emissions, zero_model(2), [0, 1])
        assert loss.item() == pytest.approx(2.6265233750364456 - 2.0, abs=1e-12)

    def test_uniform_any_gold(self):
        for gold in ([0, 0], [0, 1], [1, 0], [1, 1]):
            loss = nll(Tensor(np.zeros((2, 2))), zero_model(2), gold)
            assert loss.item() == pytest.approx(math.log(4), abs=1e-12)

    def test_nonnegative_and_minimal_at_viterbi(self):
        emissions = Tensor([[1.0, 0.0], [0.0, 1.0]])
        model = zero_model(2)
        losses = {
            (a, b): nll(emissions, model, [a, b]).item()
            for a in range(2)
            for b in range(2)
        }
        assert all(v >= 0 for v in losses.values())
        path, _ = viterbi(emissions, model)
        assert losses[tuple(path)] == min(losses.values())

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nll(Tensor(np.zeros((2, 2))), zero_model(2), [0])

    def test_gold_out_of_range(self):
        with pytest.raises(ValueError):
            gold_score(Tensor(np.zeros((2, 2))), zero_model(2), [0, 5])

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(11)
        emissions, model = random_instance(rng, 4, 4)
        params = [emissions, model.transitions, model.start, model.end]
        err = grad_check(lambda: nll(emissions, model, [0, 2, 1, 3]), params)
        assert err < 1e-6


class TestViterbi:
    def test_emission_dominant(self):
        path, score = viterbi(Tensor([[1.0, 0.0], [0.0, 1.0]]), zero_model(2))
        assert path == [0, 1]
        assert score == pytest.approx(2.0)

    def test_tie_break_lowest_index(self):
        path, score = viterbi(Tensor(np.zeros((3, 2))), zero_model(2))
        assert path == [0, 0, 0]
        assert score == 0.0

    def test_transition_flips_emission_argmax(self):
        # emission-only argmax is [0, 1]; a hostile 0->1 transition flips it
        model = zero_model(2)
        model.transitions.data[0, 1] = -5.0
        emissions = Tensor([[1.0, 0.0], [0.0, 1.0]])
        path, score = viterbi(emissions, model)
        _, oracle_path, oracle_score = brute_force_oracle(emissions, model)
        assert path != [0, 1]
        assert path == oracle_path
        assert score == pytest.approx(oracle_score)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            viterbi(Tensor(np.zeros((0, 2))), zero_model(2))


class TestOracleAgreement:
    def test_200_random_instances(self):
        rng = np.random.default_rng(2024)
        started = time.perf_counter()
        for _ in range(200):
            n = int(rng.integers(1, 6))
            t = int(rng.integers(2, 7))
            emissions, model = random_instance(rng, n, t)
            oracle_log_z, oracle_path, oracle_score = brute_force_oracle(emissions, model)
            log_z = log_partition(emissions, model).item()
            path, score = viterbi(emissions, model)
            assert abs(log_z - oracle_log_z) < 1e-10
            assert path == oracle_path
            assert score == pytest.approx(oracle_score, abs=1e-12)
            assert log_z >= score - 1e-12
        assert time.perf_counter() - started < 10.0

    def test_single_token_reduces_to_max_and_logsumexp(self):
        rng = np.random.default_rng(8)
        emissions, model = random_instance(rng, 1, 5)
        total = emissions.data[0] + model.start.data + model.end.data
        oracle_log_z, oracle_path, oracle_score = brute_force_oracle(emissions, model)
        assert oracle_score == pytest.approx(total.max())
        assert oracle_path == [int(total.argmax())]
        assert oracle_log_z == pytest.approx(
            math.log(np.exp(total - total.max()).sum()) + total.max()
        )

    def test_oracle_refuses_huge_instances(self):
        with pytest.raises(ValueError):
            brute_force_oracle(Tensor(np.zeros((10, 9))), zero_model(9))


class TestConstrainedDecode:
    def test_masks_forbid_illegal_bio(self):
        mask = bio_transition_mask(bio.NUM_TAGS)
        idx = {tag: i for i, tag in enumerate(bio.TAGS)}
        assert mask[idx["O"], idx["I-when"]] < 0
        assert mask[idx["B-when"], idx["I-when"]] == 0
        assert mask[idx["I-when"], idx["I-when"]] == 0
        assert mask[idx["B-where"], idx["I-when"]] < 0
        start = bio_start_mask(bio.NUM_TAGS)
        assert start[idx["I-what"]] < 0
        assert start[idx["B-what"]] == 0

    def test_constrained_paths_always_valid(self):
        rng = np.random.default_rng(5)
        model = CrfModel(
            Tensor(rng.uniform(-1, 1, (bio.NUM_TAGS, bio.NUM_TAGS))),
            Tensor(rng.uniform(-1, 1, bio.NUM_TAGS)),
            Tensor(rng.uniform(-1, 1, bio.NUM_TAGS)),
        )
        for _ in range(100):
            n = int(rng.integers(1, 10))
            emissions = Tensor(rng.uniform(-3, 3, (n, bio.NUM_TAGS)))
            path, _ = viterbi(emissions, model, constrained=True)
            tags = [bio.TAGS[i] for i in path]
            assert bio.validate(tags) == []

    def test_wrong_inventory_rejected(self):
        with pytest.raises(ValueError):
            bio_transition_mask(5)
