"""
Lint rule catalog
Each rule is a pure function (model, config) -> findings, registered with its
severity and the checklist line it operationalizes.
"""
from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import permutations
from typing import Callable, Dict, Iterable, List

from ermodel.domain import Cardinality, ERModel, normalize_name
from ermodel.services.model_service import ModelService
from linting.domain import Finding, RuleConfig, Severity

RuleCheck = Callable[[ERModel, RuleConfig], Iterable[Finding]]


@dataclass(frozen=True)
class Rule:
    rule_id: str
    severity: Severity
    checklist: str
    check: RuleCheck

    def run(self, model: ERModel, config: RuleConfig) -> List[Finding]:
        return list(self.check(model, config))

    def finding(self, location: str, message: str) -> Finding:
        return Finding(self.rule_id, self.severity, location, message)


CATALOG: Dict[str, Rule] = {}


def rule(rule_id: str, severity: Severity, checklist: str):
    def register(check: RuleCheck) -> RuleCheck:
        CATALOG[rule_id] = Rule(rule_id, severity, checklist, check)
        return check
    return register


def _finding(rule_id: str, location: str, message: str) -> Finding:
    return CATALOG[rule_id].finding(location, message)


ATTRIBUTE_OVERLOAD = 'attribute-overload'
DEEP_HIERARCHY = 'deep-hierarchy'
NARY_REVIEW = 'nary-review'
DUPLICATE_ATTRIBUTE = 'duplicate-attribute'
ISOLATED_ENTITY = 'isolated-entity'
DANGLING_FK_ENDPOINT = 'dangling-fk-endpoint'
KEY_NAMING_INCONSISTENT = 'key-naming-inconsistent'
DUPLICATE_CONCEPT = 'duplicate-concept'
MISSING_CONSTRAINTS = 'missing-constraints'
TRANSITIVE_REDUNDANCY = 'transitive-redundancy'


# ============================================================================
# SIMPLICITY
# ============================================================================

@rule(ATTRIBUTE_OVERLOAD, Severity.WARNING, "no entity has an excessive number of attributes (more than 12)")
def attribute_overload(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    for i, entity in enumerate(model.entities):
        count = len(entity.attributes)
        if count > config.attribute_overload_threshold:
            yield _finding(
                ATTRIBUTE_OVERLOAD, f"entities[{i}]",
                f"{entity.name} has {count} attributes (threshold {config.attribute_overload_threshold})",
            )


@rule(DEEP_HIERARCHY, Severity.WARNING, "generalization hierarchies are not deeper than 3 levels")
def deep_hierarchy(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    for i, entity in enumerate(model.entities):
        depth = ModelService.entity_depth(model, entity.name)
        if depth > config.hierarchy_depth_threshold:
            root = ModelService.ancestors(model, entity.name)[-1]
            yield _finding(
                DEEP_HIERARCHY, f"entities[{i}]",
                f"{entity.name} sits {depth} levels below {root} "
                f"(threshold {config.hierarchy_depth_threshold})",
            )


@rule(NARY_REVIEW, Severity.INFO, "n-ary relationships are used only where binary ones would not suffice")
def nary_review(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    for k, relationship in enumerate(model.relationships):
        if len(relationship.endpoints) > 2:
            names = ', '.join(ep.entity for ep in relationship.endpoints)
            yield _finding(
                NARY_REVIEW, f"relationships[{k}]",
                f"{len(relationship.endpoints)}-ary relationship over {names}; check whether binary ones suffice",
            )


@rule(TRANSITIVE_REDUNDANCY, Severity.WARNING, "no relationship can be derived from two others")
def transitive_redundancy(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    """
    Flag a one-to-many relationship P->C that is also reachable as P->M->C

    One finding per (P, M, C) triple of distinct entities and per qualifying
    P-C relationship; the finding points at the P-C relationship.
    """
    edges = defaultdict(list)
    for k, relationship in enumerate(model.relationships):
        if not relationship.is_binary:
            continue
        left, right = relationship.endpoints
        left_name, right_name = ModelService.resolved_endpoints(model, relationship)
        if left.cardinality == Cardinality.EXACTLY_ONE and right.cardinality.is_many:
            edges[(left_name, right_name)].append(k)
        if right.cardinality == Cardinality.EXACTLY_ONE and left.cardinality.is_many:
            edges[(right_name, left_name)].append(k)

    names = [entity.name for entity in model.entities]
    for parent, middle, child in permutations(names, 3):
        if not (edges.get((parent, middle)) and edges.get((middle, child))):
            continue
        for k in edges.get((parent, child), []):
            yield _finding(
                TRANSITIVE_REDUNDANCY, f"relationships[{k}]",
                f"{parent}-{child} is derivable through {middle}",
            )


# ============================================================================
# CORRECTNESS
# ============================================================================

@rule(DUPLICATE_ATTRIBUTE, Severity.ERROR, "no duplicated or inconsistent attributes")
def duplicate_attribute(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    for i, entity in enumerate(model.entities):
        seen = {}
        for j, attribute in enumerate(entity.attributes):
            key = normalize_name(attribute.name)
            if key in seen:
                yield _finding(
                    DUPLICATE_ATTRIBUTE, f"entities[{i}].attributes[{j}]",
                    f"{entity.name}.{attribute.name} duplicates {entity.name}.{seen[key]}",
                )
            else:
                seen[key] = attribute.name


@rule(DANGLING_FK_ENDPOINT, Severity.WARNING, "every relationship end names the attribute that implements it")
def dangling_fk_endpoint(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    for k, relationship in enumerate(model.relationships):
        for e, endpoint in enumerate(relationship.endpoints):
            if endpoint.attribute is None:
                yield _finding(
                    DANGLING_FK_ENDPOINT, f"relationships[{k}].endpoints[{e}]",
                    f"endpoint on {endpoint.entity} does not name a key attribute",
                )


@rule(KEY_NAMING_INCONSISTENT, Severity.WARNING, "primary and foreign keys follow a consistent pattern")
def key_naming_inconsistent(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    keys = []
    for i, entity in enumerate(model.entities):
        for j, attribute in enumerate(entity.attributes):
            if attribute.is_primary_key:
                keys.append((i, j, entity.name, attribute.name, _key_pattern(entity.name, attribute.name)))

    counts = Counter(pattern for *_, pattern in keys)
    dominant = 'id' if counts['id'] > counts['entity_id'] else 'entity_id'
    for i, j, entity_name, attribute_name, pattern in keys:
        if pattern != dominant:
            yield _finding(
                KEY_NAMING_INCONSISTENT, f"entities[{i}].attributes[{j}]",
                f"primary key {entity_name}.{attribute_name} does not follow the "
                f"'{'id' if dominant == 'id' else '<entity>_id'}' pattern",
            )


def _key_pattern(entity_name: str, attribute_name: str) -> str:
    key = normalize_name(attribute_name)
    if key == 'id':
        return 'id'
    if key == normalize_name(entity_name) + 'id':
        return 'entity_id'
    return 'other'


# ============================================================================
# COMPLETENESS / CLARITY / IMPLEMENTABILITY
# ============================================================================

@rule(ISOLATED_ENTITY, Severity.WARNING, "all required relationships are present")
def isolated_entity(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    connected = set()
    for relationship in model.relationships:
        connected.update(ModelService.resolved_endpoints(model, relationship))
    for entity in model.entities:
        if entity.parent:
            connected.add(entity.name)
            resolved = ModelService.resolve_entity(model, entity.parent)
            if resolved is not None:
                connected.add(resolved.name)

    for i, entity in enumerate(model.entities):
        if entity.name not in connected:
            yield _finding(
                ISOLATED_ENTITY, f"entities[{i}]",
                f"{entity.name} takes part in no relationship or hierarchy",
            )


@rule(DUPLICATE_CONCEPT, Severity.WARNING, "no concept appears under several names")
def duplicate_concept(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    seen = {}
    for i, entity in enumerate(model.entities):
        key = normalize_name(entity.name)
        if key in seen:
            yield _finding(
                DUPLICATE_CONCEPT, f"entities[{i}]",
                f"{entity.name} names the same concept as {seen[key]}",
            )
        else:
            seen[key] = entity.name


@rule(MISSING_CONSTRAINTS, Severity.INFO, "minimum integrity constraints (UNIQUE, NOT NULL) are declared")
def missing_constraints(model: ERModel, config: RuleConfig) -> Iterable[Finding]:
    declared = any(
        attribute.not_null or attribute.unique
        for entity in model.entities
        for attribute in entity.attributes
    )
    if not declared:
        yield _finding(MISSING_CONSTRAINTS, '$', "no attribute declares NOT NULL or UNIQUE")
