"""
Harness Exceptions
"""
from typing import Optional


class HarnessError(ValueError):
    pass


class EmptyRequirements(HarnessError):
    def __init__(self):
        super().__init__("requirements text is empty")


class ConfigError(HarnessError):
    """Experiment config is unreadable or invalid; path names the offending field"""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ProviderError(HarnessError):
    """Transport or authentication failure, after retries"""

    def __init__(self, provider_id: str, message: str, retries: int = 0):
        super().__init__(f"provider {provider_id}: {message}")
        self.provider_id = provider_id
        self.retries = retries
