"""
Tool configuration for erpipe
An optional INI file ([settings] section) overrides the Django settings
defaults; environment variables override the file.
"""
from dataclasses import dataclass
from typing import FrozenSet, Optional

from decouple import Config, Csv, RepositoryEmpty, RepositoryIni
from django.conf import settings

from linting.domain import RuleConfig
from linting.services.lint_service import LintService


class ToolConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ToolConfig:
    attribute_overload_threshold: int
    hierarchy_depth_threshold: int
    enabled_rules: Optional[FrozenSet[str]]
    match_threshold: float
    renderer_path: str

    @property
    def rule_config(self) -> RuleConfig:
        return RuleConfig(
            attribute_overload_threshold=self.attribute_overload_threshold,
            hierarchy_depth_threshold=self.hierarchy_depth_threshold,
            enabled_rules=self.enabled_rules,
        )


def load_tool_config(path: Optional[str] = None) -> ToolConfig:
    """
    Raises:
        ToolConfigError: unreadable file or values that do not cast
        UnknownRule: ENABLED_RULES names a rule outside the catalog
        InvalidRuleConfig: thresholds below 1
    """
    try:
        repository = RepositoryIni(path) if path else RepositoryEmpty()
    except OSError as e:
        raise ToolConfigError(f"cannot read config file {path}: {e}") from e
    source = Config(repository)

    try:
        rules = source('ENABLED_RULES', default='', cast=Csv())
        config = ToolConfig(
            attribute_overload_threshold=source(
                'ATTRIBUTE_OVERLOAD_THRESHOLD', default=settings.ER_ATTRIBUTE_OVERLOAD_THRESHOLD, cast=int),
            hierarchy_depth_threshold=source(
                'HIERARCHY_DEPTH_THRESHOLD', default=settings.ER_HIERARCHY_DEPTH_THRESHOLD, cast=int),
            enabled_rules=frozenset(rules) if rules else None,
            match_threshold=source('MATCH_THRESHOLD', default=settings.ER_MATCH_THRESHOLD, cast=float),
            renderer_path=source('RENDERER_PATH', default=settings.ER_RENDERER_PATH),
        )
    except ValueError as e:
        raise ToolConfigError(f"invalid value in config: {e}") from e

    LintService.check_config(config.rule_config)
    return config
