"""
Lint Service - run the rule catalog, classify quality levels, build the checklist
"""
import logging
from typing import Iterable, List, Optional, Sequence

from ermodel.domain import ERModel
from linting.domain import (
    ChecklistItem, ChecklistStatus, Finding, LevelAssessment, QualityLevel, RuleConfig, Severity,
)
from linting.exceptions import UnknownRule
from linting.rules import (
    ATTRIBUTE_OVERLOAD, CATALOG, DANGLING_FK_ENDPOINT, DEEP_HIERARCHY, DUPLICATE_ATTRIBUTE,
    DUPLICATE_CONCEPT, ISOLATED_ENTITY, KEY_NAMING_INCONSISTENT, MISSING_CONSTRAINTS, NARY_REVIEW,
    TRANSITIVE_REDUNDANCY,
)

logger = logging.getLogger(__name__)

# Automated gates per level; L4 is never awarded automatically
L2_RULES = (DUPLICATE_CONCEPT, KEY_NAMING_INCONSISTENT)
L3_RULES = (DANGLING_FK_ENDPOINT, MISSING_CONSTRAINTS, TRANSITIVE_REDUNDANCY)

L4_CRITERIA = (
    "the model can absorb new requirements without restructuring",
    "generalizations leave room for new specializations",
    "relationships can evolve in cardinality without redesign",
)

# (category, text, rule ids); no rule ids means the item is not structural
CHECKLIST = (
    ('Completeness', "the essential domain entities are identified", ()),
    ('Completeness', "each entity carries the attributes it needs", ()),
    ('Completeness', "every entity is connected by the relationships the domain needs", (ISOLATED_ENTITY,)),
    ('Completeness', "the model covers all of the requirements", None),
    ('Correctness', "no attribute is duplicated within an entity", (DUPLICATE_ATTRIBUTE,)),
    ('Correctness', "every relationship end names the attribute that implements it", (DANGLING_FK_ENDPOINT,)),
    ('Correctness', "cardinalities and relationship types match the business rules", None),
    ('Correctness', "primary and foreign keys follow one naming pattern", (KEY_NAMING_INCONSISTENT,)),
    ('Clarity', "each concept has exactly one name", (DUPLICATE_CONCEPT,)),
    ('Clarity', "entity and attribute names are clear and meaningful", ()),
    ('Simplicity', "no entity carries an excessive number of attributes", (ATTRIBUTE_OVERLOAD,)),
    ('Simplicity', "generalization hierarchies stay shallow", (DEEP_HIERARCHY,)),
    ('Simplicity', "n-ary relationships are used only where binary ones would not suffice", (NARY_REVIEW,)),
    ('Simplicity', "no relationship can be derived from two others", (TRANSITIVE_REDUNDANCY,)),
    ('Flexibility', "the model is prepared for natural expansion", ()),
    ('Implementability', "minimum integrity constraints (UNIQUE, NOT NULL) are declared", (MISSING_CONSTRAINTS,)),
    ('Implementability', "attribute types fit the target DBMS", ()),
)

# checklist items answered by the model itself rather than by a lint rule
STRUCTURAL_ITEMS = {
    "the essential domain entities are identified": lambda model: bool(model.entities),
    "each entity carries the attributes it needs": lambda model: all(e.attributes for e in model.entities),
}


class LintService:
    """Service for the lint engine"""

    @staticmethod
    def check_config(config: RuleConfig) -> None:
        """
        Raises:
            UnknownRule: config enables an id missing from the catalog
        """
        for rule_id in sorted(config.enabled_rules or ()):
            if rule_id not in CATALOG:
                raise UnknownRule(rule_id)

    @staticmethod
    def run_lints(model: ERModel, config: Optional[RuleConfig] = None) -> List[Finding]:
        """
        Run every enabled catalog rule except the redundancy detector

        Returns:
            findings sorted by (rule_id, location)
        """
        config = config or RuleConfig()
        LintService.check_config(config)

        findings = []
        for rule_id, rule in CATALOG.items():
            if rule_id == TRANSITIVE_REDUNDANCY or not config.is_enabled(rule_id):
                continue
            findings.extend(rule.run(model, config))
        return LintService.sort_findings(findings)

    @staticmethod
    def detect_transitive_redundancy(model: ERModel) -> List[Finding]:
        rule = CATALOG[TRANSITIVE_REDUNDANCY]
        return LintService.sort_findings(rule.run(model, RuleConfig()))

    @staticmethod
    def lint_model(model: ERModel, config: Optional[RuleConfig] = None) -> List[Finding]:
        """run_lints plus detect_transitive_redundancy when it is enabled"""
        config = config or RuleConfig()
        findings = LintService.run_lints(model, config)
        if config.is_enabled(TRANSITIVE_REDUNDANCY):
            findings += LintService.detect_transitive_redundancy(model)
        findings = LintService.sort_findings(findings)
        logger.info(f"Linted model with {len(model.entities)} entities: {len(findings)} findings")
        return findings

    @staticmethod
    def sort_findings(findings: Iterable[Finding]) -> List[Finding]:
        return sorted(findings, key=lambda f: f.sort_key)

    # ========================================================================
    # QUALITY LEVELS
    # ========================================================================

    @staticmethod
    def assess_level(model: ERModel, findings: Sequence[Finding]) -> LevelAssessment:
        """
        Evaluate the L1-L3 gates independently and award the highest level
        whose gates, and all gates below it, pass
        """
        rule_ids = {f.rule_id for f in findings}

        gates = {
            'L1': (
                bool(model.entities)
                and not any(f.severity == Severity.ERROR for f in findings)
                and all(entity.attributes for entity in model.entities)
                and ISOLATED_ENTITY not in rule_ids
            ),
            'L2': not rule_ids.intersection(L2_RULES),
            'L3': not rule_ids.intersection(L3_RULES),
        }

        level = QualityLevel.L0
        for k, gate in enumerate(('L1', 'L2', 'L3'), start=1):
            if not gates[gate]:
                break
            level = QualityLevel(k)

        failed = tuple(gate for gate, passed in gates.items() if not passed)
        return LevelAssessment(level=level, failed_gates=failed, manual_review=L4_CRITERIA)

    @staticmethod
    def classify_level(model: ERModel, findings: Sequence[Finding]) -> QualityLevel:
        return LintService.assess_level(model, findings).level

    # ========================================================================
    # CHECKLIST
    # ========================================================================

    @staticmethod
    def checklist(model: ERModel, findings: Sequence[Finding],
                  config: Optional[RuleConfig] = None) -> List[ChecklistItem]:
        """Every task-list item with its status for this model"""
        config = config or RuleConfig()
        fired = {f.rule_id for f in findings}
        items = []

        for category, text, rule_ids in CHECKLIST:
            if rule_ids is None:
                status = ChecklistStatus.REFERENCE
                rule_ids = ()
            elif text in STRUCTURAL_ITEMS:
                status = ChecklistStatus.PASS if STRUCTURAL_ITEMS[text](model) else ChecklistStatus.FAIL
            elif not rule_ids or not all(config.is_enabled(r) for r in rule_ids):
                status = ChecklistStatus.MANUAL
            elif fired.intersection(rule_ids):
                status = ChecklistStatus.FAIL
            else:
                status = ChecklistStatus.PASS
            items.append(ChecklistItem(category, text, status, tuple(rule_ids)))

        return items

    # ========================================================================
    # REPORTS
    # ========================================================================

    @staticmethod
    def format_report(findings: Sequence[Finding], assessment: Optional[LevelAssessment] = None) -> str:
        """Line-oriented report: '<severity> <rule_id> <location>: <message>' then 'level: Lk'"""
        lines = [finding.format_line() for finding in findings]
        if assessment is not None:
            lines.append(f"level: {assessment.level.code}")
        return '\n'.join(lines) + '\n' if lines else ''

    @staticmethod
    def format_checklist(items: Sequence[ChecklistItem]) -> str:
        width = max(len(item.category) for item in items)
        return ''.join(
            f"[{item.status.value:>9}] {item.category:<{width}} {item.text}\n" for item in items
        )
