class ConfigurationError(ValueError):
    """Invalid model, estimator or experiment configuration."""


class DegenerateDataError(ValueError):
    """Data admits no maximizer inside the parameter domain (e.g. all-zero increments)."""
