"""
Diff Service - compare a generated model against a gold model

Matching is this project's own procedure: entities equal under name
normalization pair first, the rest pair greedily by attribute overlap.
"""
import logging
from collections import defaultdict
from typing import Callable, Dict, List, Optional, Tuple

import pandas as pd
from django.conf import settings

from diffing.domain import ClassCounts, DiffReport, ElementClass, MatchMapping
from ermodel.domain import Attribute, ERModel, Entity, Relationship, normalize_name
from ermodel.services.model_service import ModelService
from ermodel.services.relation_service import RelationService

logger = logging.getLogger(__name__)

CONSTRAINT_FLAGS = (
    ('pk', 'is_primary_key'),
    ('fk', 'is_foreign_key'),
    ('not_null', 'not_null'),
    ('unique', 'unique'),
)

# generated entities without a gold counterpart never compare equal to a gold name
UNMATCHED_PREFIX = '\0'

Signature = Tuple[Tuple[str, str], ...]


class _Tally:
    def __init__(self, element_class: ElementClass):
        self.element_class = element_class
        self.matched = 0
        self.missing: List[str] = []
        self.surplus: List[str] = []

    def counts(self) -> ClassCounts:
        return ClassCounts(
            element_class=self.element_class,
            matched=self.matched,
            missing=len(self.missing),
            surplus=len(self.surplus),
            missing_names=tuple(sorted(self.missing)),
            surplus_names=tuple(sorted(self.surplus)),
        )


def describe_relationship(relationship: Relationship) -> str:
    name = RelationService.relationship_key(relationship)
    return f"{name} ({relationship.label})" if relationship.label else name


def _attribute_groups(entity: Entity) -> Dict[str, List[Attribute]]:
    groups = defaultdict(list)
    for attribute in entity.attributes:
        groups[normalize_name(attribute.name)].append(attribute)
    return groups


class DiffService:
    """Service for model comparison"""

    # ========================================================================
    # ENTITY MATCHING
    # ========================================================================

    @staticmethod
    def attribute_overlap(left: Entity, right: Entity) -> float:
        """|shared normalized attribute names| / |union|, 0 when both are empty"""
        a = {normalize_name(attribute.name) for attribute in left.attributes}
        b = {normalize_name(attribute.name) for attribute in right.attributes}
        union = a | b
        return len(a & b) / len(union) if union else 0.0

    @staticmethod
    def match_entities(generated: ERModel, gold: ERModel, threshold: Optional[float] = None) -> MatchMapping:
        """
        Pair generated entities with gold entities

        Phase 1 pairs names equal under normalization. Phase 2 pairs the
        remaining entities greedily by attribute overlap (>= threshold),
        highest score first, ties broken by the unordered pair of names.
        """
        threshold = settings.ER_MATCH_THRESHOLD if threshold is None else threshold

        generated_groups = defaultdict(list)
        gold_groups = defaultdict(list)
        for entity in generated.entities:
            generated_groups[normalize_name(entity.name)].append(entity)
        for entity in gold.entities:
            gold_groups[normalize_name(entity.name)].append(entity)

        pairs = []
        rest_generated, rest_gold = [], []
        for key in sorted(set(generated_groups) | set(gold_groups)):
            left = sorted(generated_groups.get(key, []), key=lambda e: e.name)
            right = sorted(gold_groups.get(key, []), key=lambda e: e.name)
            pairs.extend((a.name, b.name) for a, b in zip(left, right))
            rest_generated.extend(left[len(right):])
            rest_gold.extend(right[len(left):])

        candidates = []
        for a in rest_generated:
            for b in rest_gold:
                score = DiffService.attribute_overlap(a, b)
                if score >= threshold:
                    low, high = sorted((a.name, b.name))
                    candidates.append(((-score, low, high, a.name), a.name, b.name, score))
        candidates.sort(key=lambda candidate: candidate[0])

        taken_generated, taken_gold = set(), set()
        scores = []
        for _, a, b, score in candidates:
            if a in taken_generated or b in taken_gold:
                continue
            taken_generated.add(a)
            taken_gold.add(b)
            pairs.append((a, b))
            scores.append((a, b, score))

        paired_generated = {a for a, _ in pairs}
        paired_gold = {b for _, b in pairs}
        mapping = MatchMapping(
            entity_pairs=tuple(sorted(pairs)),
            unmatched_generated=tuple(sorted(e.name for e in generated.entities if e.name not in paired_generated)),
            unmatched_gold=tuple(sorted(e.name for e in gold.entities if e.name not in paired_gold)),
            scores=tuple(sorted(scores)),
        )
        logger.debug(f"Matched {len(pairs)} entities ({len(scores)} by attribute overlap)")
        return mapping

    # ========================================================================
    # DIFF
    # ========================================================================

    @staticmethod
    def diff_models(generated: ERModel, gold: ERModel, threshold: Optional[float] = None) -> DiffReport:
        """
        Count matched/missing/surplus elements per class

        Missing elements are in gold only, surplus elements in generated only.
        """
        mapping = DiffService.match_entities(generated, gold, threshold)

        entities = _Tally(ElementClass.ENTITIES)
        entities.matched = len(mapping.entity_pairs)
        entities.missing.extend(mapping.unmatched_gold)
        entities.surplus.extend(mapping.unmatched_generated)

        attributes, constraints = DiffService._compare_attributes(generated, gold, mapping)
        relationships, cardinalities = DiffService._compare_relationships(generated, gold, mapping)

        report = DiffReport(mapping=mapping, classes=tuple(
            tally.counts() for tally in (entities, attributes, relationships, cardinalities, constraints)
        ))
        logger.info(
            f"Diffed models: {entities.matched} entities matched, overall F1 {report.overall_f1:.3f}"
        )
        return report

    @staticmethod
    def _compare_attributes(generated: ERModel, gold: ERModel, mapping: MatchMapping) -> Tuple[_Tally, _Tally]:
        attributes = _Tally(ElementClass.ATTRIBUTES)
        constraints = _Tally(ElementClass.CONSTRAINTS)
        generated_entities = {e.name: e for e in generated.entities}
        gold_entities = {e.name: e for e in gold.entities}

        def flags(entity_name: str, attribute: Attribute) -> List[str]:
            return [f"{entity_name}.{attribute.name}:{flag}" for flag, field_name in CONSTRAINT_FLAGS
                    if getattr(attribute, field_name)]

        for a_name, b_name in mapping.entity_pairs:
            left = _attribute_groups(generated_entities[a_name])
            right = _attribute_groups(gold_entities[b_name])
            for key in sorted(set(left) | set(right)):
                ours, theirs = left.get(key, []), right.get(key, [])
                for a, b in zip(ours, theirs):
                    attributes.matched += 1
                    for flag, field_name in CONSTRAINT_FLAGS:
                        has_a, has_b = getattr(a, field_name), getattr(b, field_name)
                        if has_a and has_b:
                            constraints.matched += 1
                        elif has_a:
                            constraints.surplus.append(f"{a_name}.{a.name}:{flag}")
                        elif has_b:
                            constraints.missing.append(f"{b_name}.{b.name}:{flag}")
                for a in ours[len(theirs):]:
                    attributes.surplus.append(f"{a_name}.{a.name}")
                    constraints.surplus.extend(flags(a_name, a))
                for b in theirs[len(ours):]:
                    attributes.missing.append(f"{b_name}.{b.name}")
                    constraints.missing.extend(flags(b_name, b))

        for name in mapping.unmatched_generated:
            for a in generated_entities[name].attributes:
                attributes.surplus.append(f"{name}.{a.name}")
                constraints.surplus.extend(flags(name, a))
        for name in mapping.unmatched_gold:
            for b in gold_entities[name].attributes:
                attributes.missing.append(f"{name}.{b.name}")
                constraints.missing.extend(flags(name, b))

        return attributes, constraints

    @staticmethod
    def signature(model: ERModel, relationship: Relationship, rename: Callable[[str], str]) -> Signature:
        """Sorted (entity, mark) pairs; binary relationships compare direction-insensitively"""
        names = ModelService.resolved_endpoints(model, relationship)
        return tuple(sorted(
            (rename(name), endpoint.cardinality.value)
            for name, endpoint in zip(names, relationship.endpoints)
        ))

    @staticmethod
    def _compare_relationships(generated: ERModel, gold: ERModel,
                               mapping: MatchMapping) -> Tuple[_Tally, _Tally]:
        relationships = _Tally(ElementClass.RELATIONSHIPS)
        cardinalities = _Tally(ElementClass.CARDINALITIES)
        to_gold = mapping.generated_to_gold

        def grouped(model: ERModel, rename: Callable[[str], str]) -> Dict[Tuple[str, ...], list]:
            groups = defaultdict(list)
            for relationship in model.relationships:
                signature = DiffService.signature(model, relationship, rename)
                key = tuple(name for name, _ in signature)
                groups[key].append((signature, describe_relationship(relationship)))
            return groups

        left = grouped(generated, lambda name: to_gold.get(name, UNMATCHED_PREFIX + name))
        right = grouped(gold, lambda name: name)

        for key in sorted(set(left) | set(right)):
            pool = sorted(right.get(key, []))
            unpaired = []
            for item in sorted(left.get(key, [])):
                same = next((other for other in pool if other[0] == item[0]), None)
                if same is None:
                    unpaired.append(item)
                    continue
                pool.remove(same)
                relationships.matched += 1
                cardinalities.matched += 1

            # same entities, different marks
            for (_, ours), (_, theirs) in zip(unpaired, pool):
                relationships.matched += 1
                cardinalities.surplus.append(ours)
                cardinalities.missing.append(theirs)
            for _, ours in unpaired[len(pool):]:
                relationships.surplus.append(ours)
                cardinalities.surplus.append(ours)
            for _, theirs in pool[len(unpaired):]:
                relationships.missing.append(theirs)
                cardinalities.missing.append(theirs)

        return relationships, cardinalities

    # ========================================================================
    # REPORTS
    # ========================================================================

    @staticmethod
    def report_table(report: DiffReport) -> pd.DataFrame:
        """Per-class rows (matched/missing/surplus/P/R/F1) plus an overall row"""
        rows = [{
            'class': counts.element_class.value,
            'matched': counts.matched,
            'missing': counts.missing,
            'surplus': counts.surplus,
            'precision': counts.precision,
            'recall': counts.recall,
            'f1': counts.f1,
        } for counts in report.classes]
        rows.append({
            'class': 'overall',
            'matched': sum(c.matched for c in report.classes),
            'missing': sum(c.missing for c in report.classes),
            'surplus': sum(c.surplus for c in report.classes),
            'precision': report.overall_precision,
            'recall': report.overall_recall,
            'f1': report.overall_f1,
        })
        return pd.DataFrame(rows).set_index('class')

    @staticmethod
    def format_report(report: DiffReport) -> str:
        table = DiffService.report_table(report).to_string(float_format=lambda value: f"{value:.3f}")
        lines = [table]
        for counts in report.classes:
            for label, names in (('missing', counts.missing_names), ('surplus', counts.surplus_names)):
                if names:
                    lines.append(f"{label} {counts.element_class.value}: {', '.join(names)}")
        for generated, gold, score in report.mapping.scores:
            lines.append(f"matched by attribute overlap: {generated} ~ {gold} ({score:.2f})")
        if report.mapping.scores:
            lines.append(f"attribute overlap total: {report.mapping.overlap_total:.2f}")
        return '\n'.join(lines) + '\n'
