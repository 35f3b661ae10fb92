"""
Vocabulary with reserved ids and a function-word stoplist
"""

import json
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np

from cfmr.exceptions.custom_exceptions import DataFormatError, InputError
from cfmr.models.domain import QueryTokens

PAD, MASK, UNK = '<pad>', '<mask>', '<unk>'
PAD_ID, MASK_ID, UNK_ID = 0, 1, 2
RESERVED = (PAD, MASK, UNK)


class Vocabulary:
    def __init__(self, words: Iterable[str], function_words: Iterable[str] = ()):
        self.tokens: List[str] = list(RESERVED) + [w for w in words if w not in RESERVED]
        self.index: Dict[str, int] = {w: i for i, w in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise InputError('vocabulary contains duplicate words')
        self.function_words = frozenset(function_words)

    def __len__(self) -> int:
        return len(self.tokens)

    def is_content(self, token_id: int) -> bool:
        return token_id >= len(RESERVED) and self.tokens[token_id] not in self.function_words

    def encode(self, text: str, max_length: Optional[int] = None) -> QueryTokens:
        words = text.lower().split()
        if not words:
            raise InputError('query text is empty')
        if max_length is not None and len(words) > max_length:
            raise InputError(f"query has {len(words)} tokens, limit is {max_length}")
        ids = np.array([self.index.get(w, UNK_ID) for w in words], dtype=np.int64)
        return self.tokens_for(ids)

    def tokens_for(self, ids) -> QueryTokens:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= len(self.tokens)):
            raise InputError(f"token id out of range for vocabulary of size {len(self.tokens)}")
        return QueryTokens(ids, np.array([self.is_content(int(i)) for i in ids], dtype=bool))

    def decode(self, ids) -> str:
        return ' '.join(self.tokens[int(i)] for i in ids)

    def to_dict(self) -> Dict:
        return {'tokens': self.tokens, 'function_words': sorted(self.function_words)}

    @classmethod
    def from_dict(cls, data: Dict) -> 'Vocabulary':
        try:
            tokens = data['tokens']
        except (KeyError, TypeError):
            raise DataFormatError("vocabulary record has no 'tokens' list")
        if list(tokens[:len(RESERVED)]) != list(RESERVED):
            raise DataFormatError('vocabulary does not start with the reserved tokens')
        return cls(tokens[len(RESERVED):], data.get('function_words', ()))

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding='utf-8')

    @classmethod
    def load(cls, path: Path) -> 'Vocabulary':
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))
        except (OSError, json.JSONDecodeError) as e:
            raise DataFormatError(f"cannot read vocabulary {path}: {e}")

    @classmethod
    def with_stoplist(cls, words: Iterable[str], stoplist_path: Path) -> 'Vocabulary':
        """Real-data ingestion: function words come from a one-word-per-line stoplist"""
        try:
            lines = Path(stoplist_path).read_text(encoding='utf-8').splitlines()
        except (OSError, UnicodeDecodeError) as e:
            raise DataFormatError(f"cannot read stoplist {stoplist_path}: {e}")
        stop = [line.strip().lower() for line in lines]
        return cls(words, [w for w in stop if w])
