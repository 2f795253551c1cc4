"""
ER Model Domain - entities, attributes, relationships and cardinality marks
Pure value types: every instance is immutable and hashable.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

from django.db import models

# ":" separates entity and attribute in relation text; the rest would break DOT node ids
RESERVED_CHARACTERS = frozenset(':\\<>')


def normalize_name(name: str) -> str:
    """Lowercase and strip everything that is not a letter or digit"""
    return ''.join(ch for ch in name.lower() if ch.isalnum())


def is_identifier(name: Optional[str]) -> bool:
    """Names may not be empty nor contain whitespace, ':' (relation grammar) or DOT-reserved characters"""
    if not name:
        return False
    return not any(ch.isspace() or ch in RESERVED_CHARACTERS for ch in name)


class Cardinality(models.TextChoices):
    """Per-endpoint multiplicity mark"""
    EXACTLY_ONE = '1', 'Exactly one'
    ZERO_OR_MORE = '*', 'Zero or more'
    ZERO_OR_ONE = '?', 'Zero or one'
    ONE_OR_MORE = '+', 'One or more'

    @property
    def is_many(self) -> bool:
        return self in (Cardinality.ZERO_OR_MORE, Cardinality.ONE_OR_MORE)


class RelationshipKind(models.TextChoices):
    ONE_TO_ONE = '1:1', 'One to one'
    ONE_TO_MANY = '1:N', 'One to many'
    MANY_TO_MANY = 'N:N', 'Many to many'
    N_ARY = 'N-ary', 'N-ary'


class StructuralErrorKind(models.TextChoices):
    UNKNOWN_ENTITY = 'UnknownEntityReference', 'Unknown entity reference'
    UNKNOWN_ATTRIBUTE = 'UnknownAttributeReference', 'Unknown attribute reference'
    AMBIGUOUS_REFERENCE = 'AmbiguousReference', 'Ambiguous reference'
    UNKNOWN_PARENT = 'UnknownParent', 'Unknown parent entity'
    CYCLIC_HIERARCHY = 'CyclicHierarchy', 'Cyclic hierarchy'
    DUPLICATE_ENTITY = 'DuplicateEntity', 'Duplicate entity name'
    DUPLICATE_ATTRIBUTE = 'DuplicateAttribute', 'Duplicate attribute name'
    INVALID_IDENTIFIER = 'InvalidIdentifier', 'Invalid identifier'
    ARITY = 'ArityError', 'Relationship with fewer than two endpoints'


# ============================================================================
# MODEL ELEMENTS
# ============================================================================

@dataclass(frozen=True)
class Attribute:
    name: str
    declared_type: str = ''
    is_primary_key: bool = False
    is_foreign_key: bool = False
    not_null: bool = False
    unique: bool = False


@dataclass(frozen=True)
class Entity:
    name: str
    attributes: Tuple[Attribute, ...] = ()
    parent: Optional[str] = None


@dataclass(frozen=True)
class Endpoint:
    entity: str
    attribute: Optional[str]
    cardinality: Cardinality


@dataclass(frozen=True)
class Relationship:
    endpoints: Tuple[Endpoint, ...]
    label: Optional[str] = None

    @property
    def is_binary(self) -> bool:
        return len(self.endpoints) == 2


@dataclass(frozen=True)
class ERModel:
    """Typed graph of entities and relationships; the unit of all analysis"""
    title: Optional[str] = None
    entities: Tuple[Entity, ...] = ()
    relationships: Tuple[Relationship, ...] = field(default=())


@dataclass(frozen=True)
class StructuralError:
    kind: StructuralErrorKind
    location: str
    message: str

    def __str__(self):
        return f"{self.kind} at {self.location}: {self.message}"


def relationship_kind(relationship: Relationship) -> RelationshipKind:
    """Classify a relationship as 1:1, 1:N, N:N (binary) or N-ary"""
    if not relationship.is_binary:
        return RelationshipKind.N_ARY

    left, right = relationship.endpoints
    many = [left.cardinality.is_many, right.cardinality.is_many]
    if all(many):
        return RelationshipKind.MANY_TO_MANY
    if any(many):
        return RelationshipKind.ONE_TO_MANY
    return RelationshipKind.ONE_TO_ONE
