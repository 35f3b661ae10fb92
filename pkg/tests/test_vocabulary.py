"""Vocabulary: reserved ids, content flags and the stored forms."""

import numpy as np
import pytest

from cfmr.exceptions.custom_exceptions import DataFormatError, InputError
from cfmr.services.vocabulary import MASK_ID, PAD_ID, UNK_ID, Vocabulary


class TestVocabulary:
    def test_reserved_ids(self, tiny_vocab):
        assert (PAD_ID, MASK_ID, UNK_ID) == (0, 1, 2)
        assert tiny_vocab.tokens[:3] == ['<pad>', '<mask>', '<unk>']
        assert len(tiny_vocab) == 12

    def test_encode_flags_content_words(self, tiny_vocab):
        tokens = tiny_vocab.encode('F0 c0 f1 nobody')
        np.testing.assert_array_equal(tokens.ids, [3, 5, 4, UNK_ID])
        np.testing.assert_array_equal(tokens.content, [False, True, False, False])
        assert tiny_vocab.decode(tokens.ids) == 'f0 c0 f1 <unk>'

    def test_encode_limits(self, tiny_vocab):
        with pytest.raises(InputError):
            tiny_vocab.encode('   ')
        with pytest.raises(InputError):
            tiny_vocab.encode('c0 c1 c2 c3 c4', max_length=4)

    def test_duplicate_words(self):
        with pytest.raises(InputError):
            Vocabulary(['a', 'b', 'a'])

    def test_stoplist(self, tmp_path):
        stoplist = tmp_path / 'stop.txt'
        stoplist.write_text('The\n\n a \n', encoding='utf-8')
        vocab = Vocabulary.with_stoplist(['the', 'a', 'person', 'opens', 'door'], stoplist)
        assert vocab.function_words == frozenset({'the', 'a'})
        np.testing.assert_array_equal(vocab.encode('a person opens the door').content,
                                      [False, True, True, False, True])

    def test_save_and_load(self, tiny_vocab, tmp_path):
        tiny_vocab.save(tmp_path / 'vocab.json')
        loaded = Vocabulary.load(tmp_path / 'vocab.json')
        assert loaded.tokens == tiny_vocab.tokens
        assert loaded.function_words == tiny_vocab.function_words

    @pytest.mark.parametrize('record', [{}, {'tokens': ['a', 'b']}, None])
    def test_rejects_malformed_records(self, record):
        with pytest.raises(DataFormatError):
            Vocabulary.from_dict(record)

    def test_unreadable_file(self, tmp_path):
        (tmp_path / 'vocab.json').write_text('{', encoding='utf-8')
        with pytest.raises(DataFormatError):
            Vocabulary.load(tmp_path / 'vocab.json')
