"""
Shared fixtures: tiny configs, a tiny model, and a small trained model with its index
"""

import numpy as np
import pytest

from cfmr.config import AnchorConfig, EncoderConfig, SyntheticSpec, TrainConfig
from cfmr.main import create_app
from cfmr.models.domain import FeatureSequence, PointSample
from cfmr.services.corpus_service import generate_corpus
from cfmr.services.index_service import build_index
from cfmr.services.model import CFMRModel
from cfmr.services.training_service import train
from cfmr.services.vocabulary import Vocabulary

# tiny: 3 reserved + f0 f1 + c0..c6
TINY_WORDS = ['f0', 'f1'] + [f"c{i}" for i in range(7)]
TINY_ENCODER = dict(d_h=8, layers=1, heads=2, ff_dim=16, l_V=6, l_Q=4, l_C=2, d_v=3, d_q=8,
                    vocab_size=12, decoder_layers=1)

SMALL_SPEC = dict(train_videos=8, test_videos=4, l_V=12, d_v=4, vocab_size=16, function_words=3,
                  content_per_query=2, events_per_video=2, event_length=(0.2, 0.35),
                  duration=(10.0, 20.0), noise=0.3, seed=7)
SMALL_ENCODER = dict(d_h=8, layers=1, heads=2, ff_dim=16, l_V=12, l_Q=4, l_C=2, d_v=4, d_q=8,
                     vocab_size=16, decoder_layers=1)
SMALL_ANCHORS = dict(gamma=9.0, v_max=0.5, scales=2, centers=4)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def tiny_vocab():
    return Vocabulary(TINY_WORDS, ['f0', 'f1'])


@pytest.fixture
def tiny_encoder_config():
    return EncoderConfig(**TINY_ENCODER)


@pytest.fixture
def tiny_train_config(tiny_encoder_config):
    return TrainConfig(encoder=tiny_encoder_config,
                       anchors=AnchorConfig(gamma=9.0, v_max=0.5, scales=2, centers=3),
                       batch_size=2, epochs=2, patience=2, workers=2)


@pytest.fixture
def tiny_model(tiny_encoder_config, tiny_vocab):
    return CFMRModel(tiny_encoder_config, tiny_vocab, seed=0)


@pytest.fixture
def tiny_query(tiny_vocab):
    """f0 c0 f1 c1"""
    return tiny_vocab.tokens_for([3, 5, 4, 6])


@pytest.fixture
def tiny_video():
    features = np.random.default_rng(5).standard_normal((6, 3))
    return FeatureSequence(video_id='v0', features=features, duration=10.0)


@pytest.fixture
def tiny_sample(tiny_query):
    return PointSample(video_id='v0', query=tiny_query, point=0.5)


@pytest.fixture
def tiny_videos():
    rng = np.random.default_rng(11)
    return [FeatureSequence(video_id=f"vid_{n:02d}", features=rng.standard_normal((6, 3)),
                            duration=float(10 + n)) for n in range(10)]


@pytest.fixture(scope='session')
def small_spec():
    return SyntheticSpec(**SMALL_SPEC)


@pytest.fixture(scope='session')
def small_corpus(small_spec):
    return generate_corpus(small_spec)


@pytest.fixture(scope='session')
def small_train_config():
    return TrainConfig(encoder=EncoderConfig(**SMALL_ENCODER), anchors=AnchorConfig(**SMALL_ANCHORS),
                       learning_rate=2e-3, batch_size=4, epochs=2, patience=2, workers=2)


@pytest.fixture(scope='session')
def trained(small_corpus, small_train_config):
    return train(small_corpus.train, small_corpus.videos, small_corpus.vocab, small_train_config)


@pytest.fixture(scope='session')
def small_model(trained):
    return trained.model


@pytest.fixture(scope='session')
def small_index(small_model, small_corpus, small_train_config):
    anchors = small_train_config.anchors
    return build_index(small_corpus.test_videos(), small_model, anchors.centers, anchors.scales,
                       anchors.v_max, anchors.gamma, workers=2)


@pytest.fixture
def app(small_model, small_index):
    app = create_app('testing', model=small_model, index=small_index)
    app.config.update({'TESTING': True})
    yield app


@pytest.fixture
def client(app):
    return app.test_client()
