"""Concept export to CSV."""

import numpy as np
import pytest

from cfmr.exceptions.custom_exceptions import DimensionError
from cfmr.services.export_service import concept_frame, export_concepts, read_concepts
from cfmr.services.index_service import build_index


@pytest.fixture
def index(tiny_model, tiny_videos):
    return build_index(tiny_videos[:2], tiny_model, centers=3, scales=2, v_max=0.5, gamma=9.0)


def test_row_count_and_modalities(index, tiny_model, tiny_query, tmp_path):
    queries = {'q0': tiny_model.text(tiny_query)[0].data}
    path = tmp_path / 'concepts.csv'
    rows = export_concepts(index, path, queries)
    assert rows == (2 * 6 + 1) * 2

    frame = read_concepts(path)
    assert len(frame) == rows
    assert list(frame.columns[:3]) == ['modality', 'source_id', 'concept']
    assert (frame['modality'] == 'video').sum() == 24
    assert list(frame.loc[frame['modality'] == 'text', 'source_id']) == ['q0', 'q0']
    assert frame['source_id'].iloc[0] == 'vid_00@0.1667:0.3333'


def test_values_survive_at_float32_precision(index, tmp_path):
    path = tmp_path / 'concepts.csv'
    export_concepts(index, path)
    frame = read_concepts(path)
    vectors = frame[[f"v{j}" for j in range(8)]].to_numpy(dtype=np.float32)
    np.testing.assert_array_equal(vectors[:2], index.entries[0].concepts[0])


def test_frame_without_queries(index):
    frame = concept_frame(index)
    assert set(frame['modality']) == {'video'}
    assert list(frame['concept'][:4]) == [0, 1, 0, 1]


def test_rejects_mismatched_query_concepts(index):
    with pytest.raises(DimensionError):
        concept_frame(index, {'bad': np.zeros((3, 8))})
