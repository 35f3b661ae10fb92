class CfmrError(Exception):
    """Base exception for CFMR"""
    exit_code = 1
    error_code = 'cfmr_error'


class ValidationError(CfmrError):
    """Config, parameter or precondition validation error"""
    error_code = 'validation_error'


class ConfigurationError(ValidationError):
    """Inconsistent model or layer configuration"""
    error_code = 'configuration_error'


class DimensionError(ValidationError):
    """Tensor shape mismatch"""
    error_code = 'dimension_error'


class UsageError(ValidationError):
    """API used out of order (e.g. backward before forward)"""
    error_code = 'usage_error'


class InputError(ValidationError):
    """Malformed query or feature input"""
    error_code = 'input_error'


class DataFormatError(CfmrError):
    """Bad magic, version or layout in a data file"""
    exit_code = 2
    error_code = 'format_error'


class CorruptionError(DataFormatError):
    """Truncated or inconsistent data file"""
    error_code = 'corruption_error'


class StaleIndexError(DataFormatError):
    """Index built by a different model"""
    error_code = 'stale_index'


class NumericalError(CfmrError):
    """NaN or inf during training"""
    exit_code = 3
    error_code = 'numerical_error'


class CacheError(CfmrError):
    """Redis cache error"""
    error_code = 'cache_error'
