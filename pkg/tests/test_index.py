"""
Concept index construction, non-maximum suppression and the online query path
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from cfmr.exceptions.custom_exceptions import InputError, StaleIndexError, ValidationError
from cfmr.models.domain import FeatureSequence, GaussianAnchor
from cfmr.services.anchors import weight_matrix
from cfmr.services.index_service import MomentRetriever, build_index, non_max_suppression, query
from cfmr.services.metrics import iou
from cfmr.services.model import CFMRModel
from cfmr.utils.serialization import encode_index


@pytest.fixture
def tiny_index(tiny_model, tiny_videos):
    return build_index(tiny_videos, tiny_model, centers=8, scales=3, v_max=0.55, gamma=9.0, workers=4)


class TestBuildIndex:
    def test_entry_count(self, tiny_index):
        assert len(tiny_index.entries) == 10
        assert tiny_index.anchor_count == 240
        assert tiny_index.entries[0].concepts.shape == (24, 2, 8)
        assert tiny_index.entries[0].concepts.dtype == np.float32

    def test_entries_keep_input_order(self, tiny_index, tiny_videos):
        assert [e.video_id for e in tiny_index.entries] == [v.video_id for v in tiny_videos]
        assert [e.duration for e in tiny_index.entries] == [v.duration for v in tiny_videos]

    def test_rebuild_is_byte_identical(self, tiny_model, tiny_videos, tiny_index):
        serial = build_index(tiny_videos, tiny_model, centers=8, scales=3, v_max=0.55, gamma=9.0, workers=1)
        assert encode_index(serial) == encode_index(tiny_index)

    def test_concepts_match_direct_encoding(self, tiny_model, tiny_videos, tiny_index):
        entry = tiny_index.entries[3]
        direct = tiny_model.video(tiny_videos[3].features, weight_matrix(entry.anchors, 6, 9.0)).data
        np.testing.assert_allclose(entry.concepts, direct.astype(np.float32))

    def test_empty_input(self, tiny_model):
        index = build_index([], tiny_model, centers=4, scales=2, v_max=0.5, gamma=9.0)
        assert index.entries == []
        assert index.header()['entries'] == 0
        assert index.fingerprint == tiny_model.fingerprint()

    def test_rejects_feature_dim_mismatch(self, tiny_model):
        video = FeatureSequence(video_id='wide', features=np.ones((6, 5)), duration=8.0)
        with pytest.raises(InputError):
            build_index([video], tiny_model, centers=2, scales=1, v_max=0.5, gamma=9.0)

    def test_header(self, tiny_index, tiny_model):
        header = tiny_index.header()
        assert header['videos'] == 10
        assert header['fingerprint'] == tiny_model.fingerprint().hex()
        assert (header['centers'], header['scales'], header['v_max']) == (8, 3, 0.55)


def candidate(score, center, width, video_id='a', duration=10.0):
    return score, GaussianAnchor(center, width), video_id, duration


class TestNonMaxSuppression:
    def test_overlapping_lower_score_is_dropped(self):
        kept = non_max_suppression([candidate(0.7, 0.475, 0.45), candidate(0.8, 0.5, 0.5)], topk=5, nms_iou=0.5)
        assert len(kept) == 1
        assert kept[0].score == 0.8
        assert (kept[0].t_start, kept[0].t_end) == pytest.approx((2.5, 7.5))

    def test_other_videos_are_not_suppressed(self):
        kept = non_max_suppression([candidate(0.8, 0.5, 0.5, 'a'), candidate(0.7, 0.5, 0.5, 'b')],
                                   topk=5, nms_iou=0.5)
        assert [m.video_id for m in kept] == ['a', 'b']

    def test_threshold_one_keeps_everything(self):
        kept = non_max_suppression([candidate(0.8, 0.5, 0.5), candidate(0.7, 0.5, 0.5)], topk=5, nms_iou=1.0)
        assert len(kept) == 2

    def test_ties_break_by_center_then_width(self):
        kept = non_max_suppression([candidate(0.5, 0.8, 0.1), candidate(0.5, 0.2, 0.2), candidate(0.5, 0.2, 0.1)],
                                   topk=3, nms_iou=1.0)
        starts = [m.t_start for m in kept]
        ends = [m.t_end for m in kept]
        assert starts == pytest.approx([1.5, 1.0, 7.5])
        assert ends == pytest.approx([2.5, 3.0, 8.5])

    def test_topk_limit(self):
        kept = non_max_suppression([candidate(s, c, 0.1) for s, c in [(0.9, 0.1), (0.8, 0.5), (0.7, 0.9)]],
                                   topk=2, nms_iou=0.5)
        assert [m.score for m in kept] == [0.9, 0.8]

    def test_kept_pairs_stay_below_threshold(self, rng):
        for _ in range(50):
            candidates = [candidate(rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(0.05, 0.6))
                          for _ in range(30)]
            kept = non_max_suppression(candidates, topk=10, nms_iou=0.6)
            scores = [m.score for m in kept]
            assert scores == sorted(scores, reverse=True)
            for i, a in enumerate(kept):
                for b in kept[i + 1:]:
                    assert iou((a.t_start, a.t_end), (b.t_start, b.t_end)) < 0.6


class TestMomentRetriever:
    def test_rejects_index_from_another_model(self, tiny_index, tiny_encoder_config, tiny_vocab):
        other = CFMRModel(tiny_encoder_config, tiny_vocab, seed=1)
        with pytest.raises(StaleIndexError):
            MomentRetriever(other, tiny_index)

    @pytest.mark.parametrize('topk, nms_iou', [(0, 0.7), (5, 0.0), (5, 1.5)])
    def test_rejects_bad_query_parameters(self, tiny_model, tiny_index, tiny_query, topk, nms_iou):
        with pytest.raises(ValidationError):
            MomentRetriever(tiny_model, tiny_index).query(tiny_query, topk=topk, nms_iou=nms_iou,
                                                          video_id='vid_00')

    def test_single_video_ranking(self, tiny_model, tiny_index, tiny_query):
        moments = MomentRetriever(tiny_model, tiny_index).query(tiny_query, topk=5, video_id='vid_04')
        assert 1 <= len(moments) <= 5
        assert all(m.video_id == 'vid_04' for m in moments)
        assert all(-1.0 <= m.score <= 1.0 for m in moments)
        assert all(0.0 <= m.t_start < m.t_end <= 14.0 for m in moments)
        scores = [m.score for m in moments]
        assert scores == sorted(scores, reverse=True)

    def test_best_score_is_best_anchor(self, tiny_model, tiny_index, tiny_query):
        retriever = MomentRetriever(tiny_model, tiny_index)
        entry = tiny_index.entry('vid_02')
        scores = retriever.score_entry(entry, retriever.encode_query(tiny_query))
        top = retriever.query(tiny_query, topk=1, video_id='vid_02')[0]
        assert top.score == pytest.approx(float(scores.max()))

    def test_unknown_video(self, tiny_model, tiny_index, tiny_query):
        with pytest.raises(InputError):
            MomentRetriever(tiny_model, tiny_index).query(tiny_query, video_id='nope')

    def test_concurrent_callers_agree(self, tiny_model, tiny_index, tiny_query):
        retriever = MomentRetriever(tiny_model, tiny_index)
        expected = retriever.query(tiny_query, topk=5, video_id='vid_07')
        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(lambda _: retriever.query(tiny_query, topk=5, video_id='vid_07'), range(8)))
        assert all(r == expected for r in results)

    def test_module_level_query(self, tiny_model, tiny_index, tiny_query):
        expected = MomentRetriever(tiny_model, tiny_index).query(tiny_query, topk=3, video_id='vid_01')
        assert query(tiny_index, tiny_query, tiny_model, topk=3, video_id='vid_01') == expected

    def test_corpus_search_spans_videos(self, tiny_model, tiny_index, tiny_query):
        moments = MomentRetriever(tiny_model, tiny_index).query(tiny_query, topk=20, nms_iou=0.5)
        assert len(moments) == 20
        assert len({m.video_id for m in moments}) > 1
