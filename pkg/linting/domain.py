"""
Lint Domain - findings, rule configuration and quality levels
"""
import re
from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Tuple

from django.db import models

from linting.exceptions import InvalidRuleConfig


class Severity(models.TextChoices):
    ERROR = 'error', 'Error'
    WARNING = 'warning', 'Warning'
    INFO = 'info', 'Info'


class QualityLevel(models.IntegerChoices):
    """Ordinal quality scale; L0 means below L1"""
    L0 = 0, 'Below basic scope recognition'
    L1 = 1, 'Basic scope recognition'
    L2 = 2, 'Semantic quality and conceptual clarity'
    L3 = 3, 'Structural robustness and data integrity'
    L4 = 4, 'Extensibility and model evolution'

    @property
    def code(self) -> str:
        return f"L{self.value}"


class ChecklistStatus(models.TextChoices):
    PASS = 'pass', 'Pass'
    FAIL = 'fail', 'Fail'
    REFERENCE = 'reference', 'Needs a gold model (erpipe diff)'
    MANUAL = 'manual', 'Manual review'


def natural_key(location: str) -> Tuple:
    """Sort key that orders entities[2] before entities[10]"""
    return tuple(int(part) if part.isdigit() else part for part in re.split(r'(\d+)', location))


@dataclass(frozen=True)
class Finding:
    rule_id: str
    severity: Severity
    location: str
    message: str

    @property
    def sort_key(self) -> Tuple:
        return self.rule_id, natural_key(self.location), self.message

    def format_line(self) -> str:
        return f"{self.severity.value} {self.rule_id} {self.location}: {self.message}"


@dataclass(frozen=True)
class RuleConfig:
    attribute_overload_threshold: int = 12
    hierarchy_depth_threshold: int = 3
    # None enables the whole catalog
    enabled_rules: Optional[FrozenSet[str]] = None

    def __post_init__(self):
        if self.attribute_overload_threshold < 1:
            raise InvalidRuleConfig("attribute_overload_threshold must be at least 1")
        if self.hierarchy_depth_threshold < 1:
            raise InvalidRuleConfig("hierarchy_depth_threshold must be at least 1")
        if self.enabled_rules is not None and not isinstance(self.enabled_rules, frozenset):
            object.__setattr__(self, 'enabled_rules', frozenset(self.enabled_rules))

    def is_enabled(self, rule_id: str) -> bool:
        return self.enabled_rules is None or rule_id in self.enabled_rules


@dataclass(frozen=True)
class LevelAssessment:
    level: QualityLevel
    failed_gates: Tuple[str, ...] = ()
    manual_review: Tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class ChecklistItem:
    category: str
    text: str
    status: ChecklistStatus
    rule_ids: Tuple[str, ...] = ()
