"""
Moment retrieval endpoints
Matches /moments/* and /index/* paths in openapi.yaml
"""

from flask import Blueprint, current_app, jsonify, request

from cfmr.exceptions.custom_exceptions import CacheError
from cfmr.middleware.auth import require_api_key
from cfmr.models.request_models import QueryRequest
from cfmr.models.response_models import IndexInfoResponse, MomentsResponse, StandardResponse
from cfmr.services.cache_service import query_cache_key

moments_bp = Blueprint('moments', __name__)


def _unavailable():
    response = StandardResponse.error(
        error='service_unavailable',
        message='No model and index are loaded'
    )
    return jsonify(response), 503


@moments_bp.route('/index/info', methods=['GET'])
def index_info():
    """Index header: dims, anchor grid, fingerprint, video count"""
    retriever = getattr(current_app, 'retriever', None)
    if retriever is None:
        return _unavailable()
    return jsonify(StandardResponse.success(data=IndexInfoResponse.create(retriever.index))), 200


@moments_bp.route('/moments/query', methods=['POST'])
@require_api_key
def query_moments():
    """
    Rank the indexed anchors of one video (or of every video) for a text query
    Only the query is encoded; video concepts come from the index
    """
    data = request.get_json(silent=True)

    validation_errors = QueryRequest.validate(data)
    if validation_errors:
        return jsonify(StandardResponse.validation_failed(validation_errors)), 400

    retriever = getattr(current_app, 'retriever', None)
    if retriever is None:
        return _unavailable()

    model = retriever.model
    if 'text' in data:
        tokens = model.vocab.encode(data['text'], max_length=model.cfg.l_Q)
    else:
        tokens = model.vocab.tokens_for(data['tokens'])
    video_id = data.get('video_id')
    topk = data.get('topk', current_app.config['DEFAULT_TOPK'])
    nms = float(data.get('nms', current_app.config['DEFAULT_NMS_IOU']))

    cache = getattr(current_app, 'cache_service', None)
    cache_key = query_cache_key(current_app.fingerprint, {
        'video_id': video_id, 'tokens': tokens.ids.tolist(), 'topk': topk, 'nms': nms,
    })
    cached = None
    if cache:
        try:
            cached = cache.get_moments(cache_key)
        except CacheError as e:
            current_app.logger.warning(f"Serving uncached: {str(e)}")
        if cached is not None:
            current_app.logger.info(f"Returning cached ranking for {cache_key}")
            data = {'video_id': video_id, 'scope': 'video' if video_id else 'corpus', 'moments': cached}
            return jsonify(StandardResponse.success(data=data, meta={'cached': True})), 200

    moments = retriever.query(tokens, topk=topk, nms_iou=nms, video_id=video_id)
    response_data = MomentsResponse.create(moments, video_id)
    if cache:
        try:
            cache.set_moments(cache_key, response_data['moments'])
        except CacheError as e:
            current_app.logger.warning(f"Ranking not cached: {str(e)}")

    response = StandardResponse.success(
        data=response_data,
        message=f"{len(moments)} moments ranked",
        meta={'cached': False}
    )
    return jsonify(response), 200
