"""
Diff Domain - entity mapping and per-class comparison counts
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from django.db import models


class ElementClass(models.TextChoices):
    ENTITIES = 'entities', 'Entities'
    ATTRIBUTES = 'attributes', 'Attributes'
    RELATIONSHIPS = 'relationships', 'Relationships'
    CARDINALITIES = 'cardinalities', 'Cardinalities'
    CONSTRAINTS = 'constraints', 'Constraints'


def ratio(numerator: int, denominator: int) -> float:
    """Vacuous ratios count as perfect"""
    return numerator / denominator if denominator else 1.0


def harmonic_mean(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class MatchMapping:
    """Partial injection between generated and gold entity names"""
    entity_pairs: Tuple[Tuple[str, str], ...] = ()
    unmatched_generated: Tuple[str, ...] = ()
    unmatched_gold: Tuple[str, ...] = ()
    # attribute-overlap score of each pair made in the second phase
    scores: Tuple[Tuple[str, str, float], ...] = ()

    @property
    def generated_to_gold(self) -> Dict[str, str]:
        return dict(self.entity_pairs)

    @property
    def gold_to_generated(self) -> Dict[str, str]:
        return {gold: generated for generated, gold in self.entity_pairs}

    @property
    def overlap_total(self) -> float:
        return sum(score for *_, score in self.scores)


@dataclass(frozen=True)
class ClassCounts:
    element_class: ElementClass
    matched: int = 0
    missing: int = 0
    surplus: int = 0
    missing_names: Tuple[str, ...] = ()
    surplus_names: Tuple[str, ...] = ()

    @property
    def precision(self) -> float:
        return ratio(self.matched, self.matched + self.surplus)

    @property
    def recall(self) -> float:
        return ratio(self.matched, self.matched + self.missing)

    @property
    def f1(self) -> float:
        return harmonic_mean(self.precision, self.recall)


@dataclass(frozen=True)
class DiffReport:
    mapping: MatchMapping
    classes: Tuple[ClassCounts, ...] = field(default=())

    def counts(self, element_class: str) -> Optional[ClassCounts]:
        return next((c for c in self.classes if c.element_class == element_class), None)

    @property
    def overall_precision(self) -> float:
        matched = sum(c.matched for c in self.classes)
        return ratio(matched, matched + sum(c.surplus for c in self.classes))

    @property
    def overall_recall(self) -> float:
        matched = sum(c.matched for c in self.classes)
        return ratio(matched, matched + sum(c.missing for c in self.classes))

    @property
    def overall_f1(self) -> float:
        """Micro F1 over the summed counts of every class"""
        return harmonic_mean(self.overall_precision, self.overall_recall)
