"""
Model Service - structural validation, name resolution and canonical form
"""
from collections import defaultdict
from dataclasses import replace
from typing import Dict, Iterable, List, Optional, Tuple

from ermodel.domain import (
    ERModel, Entity, Relationship, StructuralError, StructuralErrorKind,
    is_identifier, normalize_name,
)
from ermodel.exceptions import InvalidModel
from ermodel.services.relation_service import RelationService


class NameIndex:
    """Resolves a reference by exact name, then by unique normalized name"""

    def __init__(self, names: Iterable[str]):
        self._exact = set()
        self._by_norm: Dict[str, List[str]] = defaultdict(list)
        for name in names:
            self._exact.add(name)
            self._by_norm[normalize_name(name)].append(name)

    def resolve(self, name: Optional[str]) -> Optional[str]:
        if not name:
            return None
        if name in self._exact:
            return name
        candidates = self._by_norm.get(normalize_name(name), [])
        return candidates[0] if len(candidates) == 1 else None

    def is_ambiguous(self, name: str) -> bool:
        return name not in self._exact and len(self._by_norm.get(normalize_name(name), [])) > 1


class ModelService:
    """Service for ER model validation and canonicalization"""

    @staticmethod
    def validate_model(model: ERModel) -> List[StructuralError]:
        """
        Check references, identifiers, uniqueness and hierarchy acyclicity

        Returns:
            list of StructuralError, empty when the model is sound
        """
        errors: List[StructuralError] = []
        errors.extend(ModelService._check_entities(model))
        errors.extend(ModelService._check_hierarchy(model))
        errors.extend(ModelService._check_relationships(model))
        return errors

    @staticmethod
    def _check_entities(model: ERModel) -> List[StructuralError]:
        errors = []
        seen_entities = set()

        for i, entity in enumerate(model.entities):
            location = f"entities[{i}]"
            if not is_identifier(entity.name):
                errors.append(StructuralError(
                    StructuralErrorKind.INVALID_IDENTIFIER, f"{location}.name",
                    f"entity name {entity.name!r} is not an identifier",
                ))
            elif entity.name in seen_entities:
                errors.append(StructuralError(
                    StructuralErrorKind.DUPLICATE_ENTITY, location,
                    f"entity {entity.name!r} is declared more than once",
                ))
            seen_entities.add(entity.name)

            seen_attributes = set()
            for j, attribute in enumerate(entity.attributes):
                attr_location = f"{location}.attributes[{j}]"
                if not is_identifier(attribute.name):
                    errors.append(StructuralError(
                        StructuralErrorKind.INVALID_IDENTIFIER, f"{attr_location}.name",
                        f"attribute name {attribute.name!r} is not an identifier",
                    ))
                elif attribute.name in seen_attributes:
                    errors.append(StructuralError(
                        StructuralErrorKind.DUPLICATE_ATTRIBUTE, attr_location,
                        f"attribute {entity.name}.{attribute.name} is declared more than once",
                    ))
                seen_attributes.add(attribute.name)

        return errors

    @staticmethod
    def _check_hierarchy(model: ERModel) -> List[StructuralError]:
        errors = []
        index = NameIndex(e.name for e in model.entities)
        positions = {e.name: i for i, e in reversed(list(enumerate(model.entities)))}
        parent_of: Dict[str, Optional[str]] = {}

        for i, entity in enumerate(model.entities):
            if entity.parent is None:
                continue
            resolved = index.resolve(entity.parent)
            if resolved is None:
                errors.append(StructuralError(
                    StructuralErrorKind.UNKNOWN_PARENT, f"entities[{i}].parent",
                    f"parent {entity.parent!r} of {entity.name!r} is not a declared entity",
                ))
                continue
            parent_of.setdefault(entity.name, resolved)

        reported = set()
        for start in parent_of:
            chain = [start]
            current = parent_of.get(start)
            while current is not None and current not in chain:
                chain.append(current)
                current = parent_of.get(current)
            if current is None:
                continue
            cycle = chain[chain.index(current):]
            key = frozenset(cycle)
            if key in reported:
                continue
            reported.add(key)
            anchor = min(cycle, key=lambda name: positions[name])
            errors.append(StructuralError(
                StructuralErrorKind.CYCLIC_HIERARCHY, f"entities[{positions[anchor]}]",
                "parent chain forms a cycle: " + ' -> '.join(cycle + [cycle[0]]),
            ))

        return errors

    @staticmethod
    def _check_relationships(model: ERModel) -> List[StructuralError]:
        errors = []
        index = NameIndex(e.name for e in model.entities)
        by_name = {e.name: e for e in model.entities}

        for k, relationship in enumerate(model.relationships):
            location = f"relationships[{k}]"
            if len(relationship.endpoints) < 2:
                errors.append(StructuralError(
                    StructuralErrorKind.ARITY, location,
                    f"relationship has {len(relationship.endpoints)} endpoint(s); at least 2 are required",
                ))

            for e, endpoint in enumerate(relationship.endpoints):
                ep_location = f"{location}.endpoints[{e}]"
                resolved = index.resolve(endpoint.entity)
                if resolved is None:
                    kind = (StructuralErrorKind.AMBIGUOUS_REFERENCE if index.is_ambiguous(endpoint.entity)
                            else StructuralErrorKind.UNKNOWN_ENTITY)
                    errors.append(StructuralError(
                        kind, ep_location, f"entity {endpoint.entity!r} cannot be resolved",
                    ))
                    continue

                if endpoint.attribute is None:
                    continue
                attributes = NameIndex(a.name for a in by_name[resolved].attributes)
                if attributes.resolve(endpoint.attribute) is None:
                    kind = (StructuralErrorKind.AMBIGUOUS_REFERENCE if attributes.is_ambiguous(endpoint.attribute)
                            else StructuralErrorKind.UNKNOWN_ATTRIBUTE)
                    errors.append(StructuralError(
                        kind, ep_location,
                        f"attribute {endpoint.attribute!r} cannot be resolved on {resolved!r}",
                    ))

        return errors

    @staticmethod
    def canonicalize(model: ERModel) -> ERModel:
        """
        Produce the order-stable canonical form

        Entities are sorted by normalized name, relationships by their
        relation-string (or structured) key; references are rewritten to the
        declared names they resolve to.

        Raises:
            InvalidModel: if validate_model reports errors
        """
        errors = ModelService.validate_model(model)
        if errors:
            raise InvalidModel.from_errors(errors)

        index = NameIndex(e.name for e in model.entities)
        by_name = {e.name: e for e in model.entities}

        entities = [
            replace(entity, parent=index.resolve(entity.parent)) if entity.parent else entity
            for entity in model.entities
        ]
        entities.sort(key=lambda e: (normalize_name(e.name), e.name))

        relationships = [
            ModelService._resolve_relationship(rel, index, by_name) for rel in model.relationships
        ]
        relationships.sort(key=lambda r: (RelationService.relationship_key(r), r.label or ''))

        return ERModel(title=model.title, entities=tuple(entities), relationships=tuple(relationships))

    @staticmethod
    def _resolve_relationship(relationship: Relationship, index: NameIndex,
                              by_name: Dict[str, Entity]) -> Relationship:
        endpoints = []
        for endpoint in relationship.endpoints:
            entity_name = index.resolve(endpoint.entity)
            attribute = endpoint.attribute
            if attribute is not None:
                attribute = NameIndex(a.name for a in by_name[entity_name].attributes).resolve(attribute)
            endpoints.append(replace(endpoint, entity=entity_name, attribute=attribute))
        return replace(relationship, endpoints=tuple(endpoints))

    # ========================================================================
    # LOOKUP HELPERS
    # ========================================================================

    @staticmethod
    def resolve_entity(model: ERModel, name: str) -> Optional[Entity]:
        resolved = NameIndex(e.name for e in model.entities).resolve(name)
        if resolved is None:
            return None
        return next(e for e in model.entities if e.name == resolved)

    @staticmethod
    def ancestors(model: ERModel, name: str) -> List[str]:
        """Parent chain of an entity, nearest first (stops on a cycle)"""
        index = NameIndex(e.name for e in model.entities)
        parent_of = {e.name: index.resolve(e.parent) for e in model.entities if e.parent}
        chain: List[str] = []
        current = parent_of.get(index.resolve(name) or name)
        while current is not None and current not in chain:
            chain.append(current)
            current = parent_of.get(current)
        return chain

    @staticmethod
    def entity_depth(model: ERModel, name: str) -> int:
        return len(ModelService.ancestors(model, name))

    @staticmethod
    def resolved_endpoints(model: ERModel, relationship: Relationship) -> Tuple[str, ...]:
        """Declared entity names of a relationship's endpoints, in order"""
        index = NameIndex(e.name for e in model.entities)
        return tuple(index.resolve(ep.entity) or ep.entity for ep in relationship.endpoints)
