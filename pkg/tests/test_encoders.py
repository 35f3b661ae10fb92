"""
Concept encoders: concept splitting, the diversity penalty, determinism and anchor locality
"""

import numpy as np
import pytest

from cfmr.config import EncoderConfig
from cfmr.exceptions.custom_exceptions import ConfigurationError, InputError
from cfmr.kernel.layers import MLP
from cfmr.kernel.tensor import Tensor
from cfmr.models.domain import GaussianAnchor
from cfmr.services.anchors import density, weight_matrix
from cfmr.services.encoders import diversity_loss, encode_text, encode_video, make_concepts, split_concepts
from cfmr.services.model import CFMRModel
from tests.conftest import TINY_ENCODER


class TestSplitConcepts:
    def test_two_rows(self):
        np.testing.assert_array_equal(split_concepts([1.0, 2.0, 3.0, 4.0], 2).data, [[1, 2], [3, 4]])

    def test_single_concept(self):
        np.testing.assert_array_equal(split_concepts([1.0, 2.0, 3.0], 1).data, [[1, 2, 3]])

    def test_indivisible(self):
        with pytest.raises(ConfigurationError):
            split_concepts(np.ones(4), 3)

    def test_charades_scale_shape(self, rng):
        mlp = MLP(32, 32, 7 * 32, rng)
        concepts = make_concepts(Tensor(rng.standard_normal((1, 32))), mlp, 7)
        assert concepts.shape == (1, 7, 32)


class TestDiversityLoss:
    def test_orthonormal_rows(self):
        assert diversity_loss(np.eye(3, 5)).item() == pytest.approx(0.0, abs=1e-15)

    def test_identical_unit_rows(self):
        assert diversity_loss([[1.0, 0.0], [1.0, 0.0]]).item() == pytest.approx(2.0, abs=1e-12)

    def test_scaled_orthonormal_rows(self):
        assert diversity_loss(2.0 * np.eye(4, 6)).item() == pytest.approx(4 * 9.0, abs=1e-12)

    def test_non_negative(self, rng):
        for _ in range(50):
            assert diversity_loss(rng.standard_normal((3, 5))).item() >= 0.0

    def test_batched_sets_are_summed(self, rng):
        sets = rng.standard_normal((3, 2, 4))
        total = sum(diversity_loss(s).item() for s in sets)
        assert diversity_loss(sets).item() == pytest.approx(total, rel=1e-12)


class TestTextEncoder:
    def test_deterministic(self, tiny_model, tiny_query):
        first, _ = tiny_model.text(tiny_query)
        second, _ = encode_text(tiny_model.text, tiny_query)
        np.testing.assert_array_equal(first.data, second.data)

    def test_shapes(self, tiny_model, tiny_query):
        concepts, hidden = tiny_model.text(tiny_query)
        assert concepts.shape == (2, 8)
        assert hidden.shape == (len(tiny_query) + 1, 8)

    def test_sensitive_to_content_token(self, tiny_model, tiny_vocab):
        _, a = tiny_model.text(tiny_vocab.tokens_for([3, 5, 4, 6]))
        _, b = tiny_model.text(tiny_vocab.tokens_for([3, 5, 4, 7]))
        assert not np.allclose(a.data[-1], b.data[-1])

    def test_rejects_long_query(self, tiny_model, tiny_vocab):
        with pytest.raises(InputError):
            tiny_model.text(tiny_vocab.tokens_for([3, 5, 4, 6, 7]))

    def test_cls_always_attended(self, tiny_model, tiny_query):
        maps = []
        tiny_model.text(tiny_query, attention_maps=maps)
        assert len(maps) == TINY_ENCODER['layers']
        assert all(np.all(m[..., -1] > 0) for m in maps)


class TestVideoEncoder:
    def test_uniform_weights_match_unweighted_pass(self, tiny_model, tiny_video):
        plain = tiny_model.video(tiny_video.features).data
        uniform = tiny_model.video(tiny_video.features, np.ones((1, tiny_video.length))).data
        np.testing.assert_allclose(uniform, plain, rtol=0, atol=1e-12)

    def test_whole_video_row_matches_unweighted_pass(self, tiny_model, tiny_video):
        weights = weight_matrix([GaussianAnchor(0.5, 0.4)], tiny_video.length, 9.0, whole_video=True)
        concepts = encode_video(tiny_model.video, tiny_video, weights).data
        np.testing.assert_allclose(concepts[1], tiny_model.video(tiny_video.features).data[0],
                                   rtol=0, atol=1e-12)

    def test_batched_rows_match_single_passes(self, tiny_model, tiny_video):
        anchors = [GaussianAnchor(0.2, 0.4), GaussianAnchor(0.7, 0.6)]
        weights = weight_matrix(anchors, tiny_video.length, 9.0)
        batched = tiny_model.video(tiny_video.features, weights).data
        for row, w in enumerate(weights):
            single = tiny_model.video(tiny_video.features, w[None]).data[0]
            np.testing.assert_allclose(batched[row], single, rtol=0, atol=1e-12)

    def test_cls_attention_survives_narrow_anchor(self, tiny_model, tiny_video):
        maps = []
        weights = density(GaussianAnchor(0.1, 0.05), tiny_video.length, 9.0)[None]
        tiny_model.video(tiny_video.features, weights, attention_maps=maps)
        assert len(maps) == TINY_ENCODER['layers']
        assert all(np.all(m[..., -1] > 0) for m in maps)

    def test_disjoint_anchors_give_distinct_concepts(self, tiny_model):
        rng = np.random.default_rng(1)
        features = np.zeros((6, 3))
        features[:3] = rng.standard_normal(3)
        features[3:] = rng.standard_normal(3)
        weights = weight_matrix([GaussianAnchor(0.25, 0.3), GaussianAnchor(0.85, 0.3)], 6, 9.0)
        concepts = tiny_model.video(features, weights).data
        assert np.linalg.norm(concepts[0] - concepts[1]) > 1e-6

    def test_permuting_frames_outside_support_barely_matters(self, tiny_vocab):
        cfg = EncoderConfig(**{**TINY_ENCODER, 'layers': 2, 'l_V': 48})
        model = CFMRModel(cfg, tiny_vocab, seed=3)
        rng = np.random.default_rng(9)
        features = rng.standard_normal((48, 3))
        anchor = GaussianAnchor(0.5, 0.0647)  # 3 sigma covers frames 22..24
        weights = density(anchor, 48, 9.0)[None]

        outside = np.array([j for j in range(48) if j not in (22, 23, 24)])
        permuted = features.copy()
        permuted[outside] = features[rng.permutation(outside)]

        base = model.video(features, weights).data
        moved = model.video(permuted, weights).data
        assert np.linalg.norm(moved - base) / np.linalg.norm(base) < 1e-3

    def test_rejects_long_video(self, tiny_model):
        with pytest.raises(InputError):
            tiny_model.video(np.ones((7, 3)))

    def test_rejects_mismatched_weights(self, tiny_model, tiny_video):
        with pytest.raises(InputError):
            tiny_model.video(tiny_video.features, np.ones((1, 5)))
