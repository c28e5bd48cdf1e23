class ValidationError(ValueError):
    """Invalid configuration or input values."""
