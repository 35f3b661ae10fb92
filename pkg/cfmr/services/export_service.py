"""
Concept export for external visualization (t-SNE etc.)
"""

from pathlib import Path
from typing import Dict, List, Mapping, Optional

import numpy as np
import pandas as pd

from cfmr.exceptions.custom_exceptions import DimensionError
from cfmr.models.domain import ConceptIndex

FLOAT_FORMAT = '%.9g'


def concept_frame(index: ConceptIndex, queries: Optional[Mapping[str, np.ndarray]] = None) -> pd.DataFrame:
    """
    One row per concept vector: modality, source_id, concept, v0 .. v{d_h-1}

    Video rows are sourced as "<video_id>@<center>:<width>".
    """
    queries = queries or {}
    rows: List[Dict] = []
    columns = [f"v{j}" for j in range(index.d_h)]

    def add(modality: str, source: str, concepts: np.ndarray) -> None:
        if concepts.shape != (index.l_C, index.d_h):
            raise DimensionError(f"{source}: concept set shape {concepts.shape} does not match the index")
        for c, vector in enumerate(concepts):
            row = {'modality': modality, 'source_id': source, 'concept': c}
            row.update(zip(columns, vector.astype(np.float32).tolist()))
            rows.append(row)

    for entry in index.entries:
        for anchor, concepts in zip(entry.anchors, entry.concepts):
            add('video', f"{entry.video_id}@{anchor.center:.4f}:{anchor.width:.4f}", concepts)
    for query_id, concepts in queries.items():
        add('text', query_id, np.asarray(concepts))

    return pd.DataFrame(rows, columns=['modality', 'source_id', 'concept', *columns])


def export_concepts(index: ConceptIndex, path: Path,
                    queries: Optional[Mapping[str, np.ndarray]] = None) -> int:
    frame = concept_frame(index, queries)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return len(frame)


def read_concepts(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={'modality': str, 'source_id': str})
