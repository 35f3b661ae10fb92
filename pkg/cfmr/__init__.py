"""Point-supervised video moment retrieval with offline concept indexes."""

__version__ = '0.1.0'
