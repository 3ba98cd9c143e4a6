"""Inference backends: block splitting, oracle, toy network."""

import numpy as np
import pytest

from gladiar.backend import (
    OracleBackend,
    Scenario,
    ScenarioSpeaker,
    ToyBackend,
    ToyWeights,
    frame_index_features,
    relative_embed,
    split_blocks,
)
from gladiar.types import LinearHead


def make_scenario(segments_by_speaker, duration=100, dim=8, seed=0):
    rng = np.random.default_rng(seed)
    speakers = []
    for i, segments in enumerate(segments_by_speaker):
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        speakers.append(ScenarioSpeaker(f"spk{i}", v, segments))
    return Scenario(duration, speakers, seed=seed, max_prototype_cos=0.99)


class TestSplitBlocks:
    def test_divisible(self):
        assert split_blocks(150, 50) == [(0, 50), (50, 100), (100, 150)]

    def test_short_last_block(self):
        assert split_blocks(120, 50) == [(0, 50), (50, 100), (100, 120)]

    def test_empty(self):
        assert split_blocks(0, 50) == []

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            split_blocks(10, 0)


class TestOracleBackend:
    def test_noiseless_single_speaker_embeddings(self):
        scn = make_scenario([[(0, 100)]])
        backend = OracleBackend(scn, noise_scale=0.0, cap=4, block_len=50)
        out = backend.infer(frame_index_features(np.arange(100)))
        proto = scn.speakers[0].prototype
        np.testing.assert_allclose(out.embeddings, proto[:, None] * np.ones((1, 100)))

    def test_silent_frames_are_zero(self):
        scn = make_scenario([[(10, 20)]])
        backend = OracleBackend(scn, noise_scale=0.0, cap=4, block_len=50)
        out = backend.infer(frame_index_features(np.arange(10)))
        np.testing.assert_array_equal(out.embeddings, 0.0)

    def test_block_attractors_equal_prototypes(self):
        scn = make_scenario([[(0, 50)], [(20, 60)]])
        backend = OracleBackend(scn, noise_scale=0.0, cap=4, block_len=50)
        out = backend.infer(frame_index_features(np.arange(100)))
        first = out.blocks[0].attractors
        assert len(first) == 2
        np.testing.assert_array_equal(first.vectors[0], scn.speakers[0].prototype)
        np.testing.assert_array_equal(first.vectors[1], scn.speakers[1].prototype)

    def test_deterministic(self):
        scn = make_scenario([[(0, 60)], [(30, 90)]], seed=3)
        backend = OracleBackend(scn, noise_scale=0.1, cap=4, block_len=50)
        ids = frame_index_features(np.arange(0, 90, 2))
        a, b = backend.infer(ids), backend.infer(ids)
        np.testing.assert_array_equal(a.embeddings, b.embeddings)
        for ba, bb in zip(a.blocks, b.blocks):
            np.testing.assert_array_equal(ba.attractors.vectors, bb.attractors.vectors)
            for ra, rb in zip(ba.relatives, bb.relatives):
                np.testing.assert_array_equal(ra.vector, rb.vector)

    def test_relative_cosines_noiseless(self):
        rng = np.random.default_rng(5)
        protos = []
        while len(protos) < 2:
            v = rng.standard_normal(24)
            v /= np.linalg.norm(v)
            if not protos or protos[0] @ v <= 0.25:
                protos.append(v)
        scn = Scenario(
            100,
            [ScenarioSpeaker("a", protos[0], [(0, 100)]),
             ScenarioSpeaker("b", protos[1], [(0, 100)])],
            seed=5,
        )
        backend = OracleBackend(scn, noise_scale=0.0, cap=4, block_len=50)
        out = backend.infer(frame_index_features(np.arange(100)))
        by_spk = {}
        for r in out.all_relatives():
            by_spk.setdefault(r.local_index, []).append(
                r.vector / np.linalg.norm(r.vector)
            )
        for vectors in by_spk.values():
            for v in vectors[1:]:
                assert v @ vectors[0] == pytest.approx(1.0)
        for a in by_spk[0]:
            for b in by_spk[1]:
                assert a @ b <= 0.25 + 1e-9

    def test_cap_enforced_with_most_active_first(self):
        segments = [[(0, 50)], [(0, 40)], [(0, 30)], [(0, 20)], [(0, 10)]]
        scn = make_scenario(segments, duration=50)
        backend = OracleBackend(scn, noise_scale=0.0, cap=3, block_len=50)
        out = backend.infer(frame_index_features(np.arange(50)))
        block = out.blocks[0]
        assert len(block.attractors) == 3
        np.testing.assert_array_equal(block.attractors.vectors[0], scn.speakers[0].prototype)
        np.testing.assert_array_equal(block.attractors.vectors[2], scn.speakers[2].prototype)

    def test_block_counts_never_exceed_cap(self):
        rng = np.random.default_rng(9)
        segments = [
            [(int(a), int(a) + 10) for a in rng.integers(0, 190, size=6)]
            for _ in range(6)
        ]
        scn = make_scenario(segments, duration=200)
        backend = OracleBackend(scn, noise_scale=0.05, cap=4, block_len=50)
        out = backend.infer(frame_index_features(np.arange(200)))
        assert all(count <= 4 for count in out.block_counts())

    def test_global_attractors_by_first_appearance(self):
        scn = make_scenario([[(50, 60)], [(0, 10)]], duration=60)
        backend = OracleBackend(scn, noise_scale=0.0, cap=4, block_len=50)
        out = backend.infer(frame_index_features(np.arange(60)))
        np.testing.assert_array_equal(
            out.global_attractors.vectors[0], scn.speakers[1].prototype
        )

    def test_invalid_frame_ids(self):
        scn = make_scenario([[(0, 10)]], duration=10)
        backend = OracleBackend(scn, noise_scale=0.0, cap=4)
        with pytest.raises(ValueError):
            backend.infer(frame_index_features([0, 10]))

    def test_blocks_partition_frames(self):
        scn = make_scenario([[(0, 70)]], duration=70)
        backend = OracleBackend(scn, noise_scale=0.0, cap=4, block_len=30)
        out = backend.infer(frame_index_features(np.arange(70)))
        ranges = [(b.start, b.stop) for b in out.blocks]
        assert ranges == [(0, 30), (30, 60), (60, 70)]


class TestRelativeEmbed:
    def test_zero_output_weight_is_residual(self):
        rng = np.random.default_rng(0)
        vectors = rng.standard_normal((3, 4))
        emb = rng.standard_normal((4, 9))
        out = relative_embed(vectors, emb, np.zeros((4, 4)))
        np.testing.assert_array_equal(out, vectors)

    def test_single_key_gets_full_attention(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((1, 4))
        e = rng.standard_normal((4, 1))
        w_o = rng.standard_normal((4, 4))
        out = relative_embed(a, e, w_o)
        np.testing.assert_allclose(out[0], a[0] + w_o @ e[:, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            relative_embed(np.ones((1, 3)), np.ones((4, 5)), np.eye(4))


def toy_weights(num_features=2, dim=3, cap=4, head_bias=1.0, seed=0):
    rng = np.random.default_rng(seed)
    return ToyWeights(
        encoder_weight=rng.standard_normal((dim, num_features)) * 0.5,
        encoder_bias=rng.standard_normal(dim) * 0.1,
        head=LinearHead(np.zeros(dim), head_bias),
        attn_out=rng.standard_normal((dim, dim)) * 0.1,
        cap=cap,
    )


class TestToyBackend:
    def test_constant_features_collapse_to_one_attractor(self):
        weights = toy_weights()
        backend = ToyBackend(weights, block_len=10)
        features = np.ones((2, 30))
        out = backend.infer(features)
        assert np.ptp(out.embeddings, axis=1).max() == 0.0
        assert all(count == 1 for count in out.block_counts())

    def test_short_input_is_single_block(self):
        backend = ToyBackend(toy_weights(), block_len=50)
        out = backend.infer(np.random.default_rng(0).standard_normal((2, 20)))
        assert [(b.start, b.stop) for b in out.blocks] == [(0, 20)]

    def test_deterministic(self):
        backend = ToyBackend(toy_weights(), block_len=10)
        features = np.random.default_rng(2).standard_normal((2, 35))
        a, b = backend.infer(features), backend.infer(features)
        np.testing.assert_array_equal(a.embeddings, b.embeddings)
        for ba, bb in zip(a.blocks, b.blocks):
            np.testing.assert_array_equal(ba.attractors.vectors, bb.attractors.vectors)

    def test_feature_dim_mismatch(self):
        backend = ToyBackend(toy_weights(num_features=3))
        with pytest.raises(ValueError):
            backend.infer(np.ones((2, 10)))
