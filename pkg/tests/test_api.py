"""
Moment API: health, index info, querying, validation, auth and the query cache
"""

from unittest.mock import MagicMock

import pytest
import redis

from cfmr.config import TestingConfig as ServiceTestingConfig
from cfmr.exceptions.custom_exceptions import (
    CacheError, CfmrError, CorruptionError, InputError, NumericalError, StaleIndexError, ValidationError,
)
from cfmr.main import create_app, status_for
from cfmr.middleware.auth import key_matches
from cfmr.services.cache_service import CacheService
from cfmr.services.model import CFMRModel


def post_query(client, body, headers=None):
    return client.post('/moments/query', json=body, headers=headers or {})


class TestHealth:
    def test_healthy_with_artifacts(self, client, small_model, small_index):
        response = client.get('/health')
        assert response.status_code == 200
        data = response.get_json()
        assert data['status'] == 'healthy'
        assert data['dependencies'] == {'model': 'loaded', 'index': 'loaded', 'redis': 'disconnected'}
        assert data['service'] == 'cfmr-moments'
        assert data['artifacts'] == {'mode': 'serving', 'fingerprint': small_model.fingerprint().hex(),
                                     'videos': len(small_index.entries)}

    def test_degraded_without_artifacts(self, monkeypatch, tmp_path):
        monkeypatch.setattr(ServiceTestingConfig, 'CFMR_MODEL_PATH', str(tmp_path / 'model.bin'))
        monkeypatch.setattr(ServiceTestingConfig, 'CFMR_INDEX_PATH', str(tmp_path / 'index.bin'))
        client = create_app('testing').test_client()
        data = client.get('/health').get_json()
        assert data['status'] == 'degraded'
        assert data['dependencies']['model'] == 'missing'
        assert data['artifacts'] == {'mode': 'degraded', 'fingerprint': None, 'videos': 0}
        assert client.post('/moments/query', json={'text': 'f0 c0'}).status_code == 503
        assert client.get('/index/info').status_code == 503


class TestIndexInfo:
    def test_header(self, client, small_index, small_model):
        response = client.get('/index/info')
        assert response.status_code == 200
        data = response.get_json()['data']
        assert data['videos'] == len(small_index.entries)
        assert data['entries'] == small_index.anchor_count
        assert data['fingerprint'] == small_model.fingerprint().hex()
        assert (data['centers'], data['scales']) == (4, 2)


class TestQuery:
    def test_query_by_text(self, client, small_corpus):
        sample = small_corpus.test[0]
        text = small_corpus.vocab.decode(sample.query.ids)
        response = post_query(client, {'text': text, 'video_id': sample.video_id, 'topk': 3})
        assert response.status_code == 200
        body = response.get_json()
        assert body['success'] is True
        assert body['meta'] == {'cached': False}
        moments = body['data']['moments']
        assert 1 <= len(moments) <= 3
        assert body['data']['scope'] == 'video'
        assert all(m['video_id'] == sample.video_id for m in moments)
        scores = [m['score'] for m in moments]
        assert scores == sorted(scores, reverse=True)

    def test_text_and_tokens_agree(self, client, small_corpus):
        sample = small_corpus.test[1]
        by_tokens = post_query(client, {'tokens': sample.query.ids.tolist(), 'video_id': sample.video_id})
        by_text = post_query(client, {'text': small_corpus.vocab.decode(sample.query.ids),
                                      'video_id': sample.video_id})
        assert by_tokens.get_json()['data'] == by_text.get_json()['data']

    def test_corpus_scope(self, client):
        body = post_query(client, {'text': 'f0 c0 f1 c1', 'topk': 10, 'nms': 0.5}).get_json()
        assert body['data']['scope'] == 'corpus'
        assert body['data']['video_id'] is None
        moments = body['data']['moments']
        assert 4 <= len(moments) <= 10
        assert len({m['video_id'] for m in moments}) > 1

    @pytest.mark.parametrize('body', [
        None,
        {},
        {'text': 'f0 c0', 'tokens': [3, 4]},
        {'text': '   '},
        {'tokens': []},
        {'tokens': [3, -1]},
        {'text': 'f0 c0', 'topk': 0},
        {'text': 'f0 c0', 'topk': True},
        {'text': 'f0 c0', 'nms': 0.0},
        {'text': 'f0 c0', 'video_id': 'bad/id'},
        {'text': 'f0 c0', 'limit': 3},
    ])
    def test_validation_errors(self, client, body):
        response = post_query(client, body)
        assert response.status_code == 400
        assert response.get_json()['error'] == 'validation_error'

    def test_unknown_video(self, client):
        response = post_query(client, {'text': 'f0 c0', 'video_id': 'train_99999'})
        assert response.status_code == 400
        assert response.get_json()['error'] == 'input_error'

    def test_out_of_range_token(self, client):
        response = post_query(client, {'tokens': [3, 999]})
        assert response.status_code == 400
        assert response.get_json()['error'] == 'input_error'

    def test_overlong_text(self, client):
        response = post_query(client, {'text': ' '.join(['c0'] * 5)})
        assert response.status_code == 400

    def test_not_found_and_method(self, client):
        assert client.get('/moments/nope').status_code == 404
        assert client.get('/moments/query').status_code == 405

    def test_correlation_id_is_echoed(self, client):
        response = client.get('/health', headers={'X-Correlation-ID': 'abc-123'})
        assert response.headers['X-Correlation-ID'] == 'abc-123'
        assert client.get('/health').headers['X-Correlation-ID']


class TestAuth:
    @pytest.fixture
    def keyed_client(self, app):
        app.config['API_KEYS'] = ['secret']
        return app.test_client()

    def test_missing_key(self, keyed_client):
        response = post_query(keyed_client, {'text': 'f0 c0'})
        assert response.status_code == 401
        assert response.get_json()['error'] == 'missing_api_key'

    def test_invalid_key(self, keyed_client):
        response = post_query(keyed_client, {'text': 'f0 c0'}, {'X-API-Key': 'wrong'})
        assert response.status_code == 401
        assert response.get_json()['error'] == 'invalid_api_key'

    def test_rejection_quotes_correlation_id(self, keyed_client):
        response = post_query(keyed_client, {'text': 'f0 c0'}, {'X-API-Key': 'wrong', 'X-Correlation-ID': 'req-9'})
        assert response.get_json()['meta'] == {'correlation_id': 'req-9'}

    @pytest.mark.parametrize('candidate, expected', [('secret', True), ('other', True), ('secre', False), ('', False)])
    def test_key_matches(self, candidate, expected):
        assert key_matches(candidate, ['secret', 'other']) is expected

    def test_valid_key(self, keyed_client):
        assert post_query(keyed_client, {'text': 'f0 c0'}, {'X-API-Key': 'secret'}).status_code == 200

    def test_health_stays_open(self, keyed_client):
        assert keyed_client.get('/health').status_code == 200


class TestCache:
    def test_hit_skips_ranking(self, app):
        cached = [{'video_id': 'test_00000', 't_start': 1.0, 't_end': 2.0, 'score': 0.9}]
        app.cache_service = MagicMock()
        app.cache_service.get_moments.return_value = cached
        body = post_query(app.test_client(), {'text': 'f0 c0', 'video_id': 'test_00000'}).get_json()
        assert body['meta'] == {'cached': True}
        assert body['data']['moments'] == cached
        app.cache_service.set_moments.assert_not_called()

    def test_miss_stores_ranking(self, app):
        app.cache_service = MagicMock()
        app.cache_service.get_moments.return_value = None
        body = post_query(app.test_client(), {'text': 'f0 c0', 'video_id': 'test_00000'}).get_json()
        assert body['meta'] == {'cached': False}
        key, stored = app.cache_service.set_moments.call_args[0]
        assert key.startswith('moments:')
        assert stored == body['data']['moments']

    def test_unreachable_cache_on_read_still_ranks(self, app):
        app.cache_service = MagicMock()
        app.cache_service.get_moments.side_effect = CacheError('connection refused')
        response = post_query(app.test_client(), {'text': 'f0 c0', 'video_id': 'test_00000'})
        assert response.status_code == 200
        body = response.get_json()
        assert body['meta'] == {'cached': False}
        assert body['data']['moments']

    def test_unreachable_cache_on_write_still_ranks(self, app):
        app.cache_service = MagicMock()
        app.cache_service.get_moments.return_value = None
        app.cache_service.set_moments.side_effect = CacheError('connection refused')
        response = post_query(app.test_client(), {'text': 'f0 c0', 'video_id': 'test_00000'})
        assert response.status_code == 200
        assert response.get_json()['meta'] == {'cached': False}

    def test_closed_at_exit(self, monkeypatch, small_model, small_index):
        service = MagicMock()
        registered = []
        monkeypatch.setattr(ServiceTestingConfig, 'REDIS_HOST', 'localhost')
        monkeypatch.setattr('cfmr.main.get_cache_service', lambda: service)
        monkeypatch.setattr('cfmr.main.atexit.register', registered.append)
        app = create_app('testing', model=small_model, index=small_index)
        assert app.cache_service is service
        assert registered == [service.close]


class TestCacheService:
    @pytest.mark.parametrize('failure', [redis.ConnectionError('refused'), redis.TimeoutError('slow')])
    def test_redis_failures_raise_cache_error(self, app, failure):
        client = MagicMock()
        client.get.side_effect = failure
        client.setex.side_effect = failure
        service = CacheService(client)
        with app.app_context():
            with pytest.raises(CacheError):
                service.get_moments('moments:abc')
            with pytest.raises(CacheError):
                service.set_moments('moments:abc', [])

    def test_round_trip_through_client(self, app):
        client = MagicMock()
        service = CacheService(client)
        moments = [{'video_id': 'v', 't_start': 0.0, 't_end': 1.0, 'score': 0.5}]
        with app.app_context():
            assert service.set_moments('moments:abc', moments) is True
        key, ttl, stored = client.setex.call_args[0]
        assert (key, ttl) == ('moments:abc', app.config['QUERY_CACHE_TTL'])
        client.get.return_value = stored
        assert service.get_moments('moments:abc') == moments

    def test_close(self):
        client = MagicMock()
        service = CacheService(client)
        service.close()
        client.close.assert_called_once_with()
        assert service.client is None
        assert service.is_connected() is False


class TestArtifacts:
    def test_index_from_another_model_is_not_served(self, small_index, small_corpus, small_train_config):
        other = CFMRModel(small_train_config.encoder, small_corpus.vocab, seed=99)
        client = create_app('testing', model=other, index=small_index).test_client()
        data = client.get('/health').get_json()
        assert data['dependencies']['model'] == 'loaded'
        assert data['dependencies']['index'] == 'missing'
        assert data['artifacts']['mode'] == 'degraded'
        assert post_query(client, {'text': 'f0 c0'}).status_code == 503

    @pytest.mark.parametrize('error, status', [
        (InputError('x'), 400),
        (ValidationError('x'), 400),
        (StaleIndexError('x'), 409),
        (CorruptionError('x'), 422),
        (NumericalError('x'), 500),
        (CfmrError('x'), 500),
    ])
    def test_status_for(self, error, status):
        assert status_for(error) == status
