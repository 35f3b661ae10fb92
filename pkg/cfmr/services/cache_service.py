"""
Redis Cache Service
Caches ranked moments for repeated queries; Redis failures surface as CacheError
"""

import hashlib
import json
import logging
from typing import Any, Dict, List, Optional

import redis
from flask import current_app

from cfmr.exceptions.custom_exceptions import CacheError

logger = logging.getLogger(__name__)


def query_cache_key(fingerprint: str, request_data: Dict[str, Any]) -> str:
    """Key over the model fingerprint and the canonical request body"""
    canonical = json.dumps(request_data, sort_keys=True, separators=(',', ':'))
    digest = hashlib.sha256(f"{fingerprint}:{canonical}".encode('utf-8')).hexdigest()
    return f"moments:{digest}"


class CacheService:
    """
    Manages Redis operations for the moment API
    - Query result caching
    - General caching
    """

    def __init__(self, client: Optional[redis.Redis] = None):
        """Initialize cache service (connection happens lazily unless a client is given)"""
        self.client = client

    def connect(self):
        """Establish connection to Redis"""
        try:
            config = current_app.config

            self.client = redis.Redis(
                host=config['REDIS_HOST'],
                port=config['REDIS_PORT'],
                db=config['REDIS_DB'],
                password=config['REDIS_PASSWORD'] if config['REDIS_PASSWORD'] else None,
                decode_responses=True,
                socket_connect_timeout=5,
                socket_timeout=5
            )

            # Test connection
            self.client.ping()

            current_app.logger.info(
                f"Connected to Redis at {config['REDIS_HOST']}:{config['REDIS_PORT']}"
            )

        except Exception as e:
            current_app.logger.error(f"Failed to connect to Redis: {str(e)}")
            raise

    def is_connected(self) -> bool:
        try:
            if self.client:
                self.client.ping()
                return True
            return False
        except redis.RedisError:
            return False

    # ==================== QUERY RESULTS ====================

    def get_moments(self, key: str) -> Optional[List[Dict]]:
        """
        Cached ranking for a query key

        Returns:
            List of moment dicts, or None on a miss

        Raises:
            CacheError: Redis is unreachable or rejected the read
        """
        cached = self.get(key)
        return cached if isinstance(cached, list) else None

    def set_moments(self, key: str, moments: List[Dict]) -> bool:
        return self.set(key, moments, ttl=current_app.config.get('QUERY_CACHE_TTL'))

    # ==================== GENERAL CACHING ====================

    def get(self, key: str) -> Optional[Any]:
        try:
            value = self.client.get(key)
            if value:
                try:
                    return json.loads(value)
                except json.JSONDecodeError:
                    return value
            return None

        except redis.RedisError as e:
            raise CacheError(f"cache get failed for key {key}: {str(e)}")

    def set(self, key: str, value: Any, ttl: Optional[int] = None) -> bool:
        """
        Set value in cache

        Args:
            key: Cache key
            value: Value to cache (dicts and lists are stored as JSON)
            ttl: Time to live in seconds (None for no expiry)

        Returns:
            bool: True once stored

        Raises:
            CacheError: Redis is unreachable or rejected the write
        """
        try:
            if isinstance(value, (dict, list)):
                value = json.dumps(value)

            if ttl:
                self.client.setex(key, ttl, value)
            else:
                self.client.set(key, value)

            return True

        except redis.RedisError as e:
            raise CacheError(f"cache set failed for key {key}: {str(e)}")

    def close(self):
        """Close Redis connection (runs at interpreter exit, outside any app context)"""
        try:
            if self.client:
                self.client.close()
                logger.info("Redis connection closed")
        except redis.RedisError as e:
            logger.error(f"Error closing Redis connection: {str(e)}")
        finally:
            self.client = None


# Global instance
_cache_service = None


def get_cache_service() -> CacheService:
    """
    Get or create the global CacheService instance

    Returns:
        CacheService instance
    """
    global _cache_service

    if _cache_service is None:
        service = CacheService()
        service.connect()
        _cache_service = service

    return _cache_service
