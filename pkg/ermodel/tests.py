import itertools
import random
import re

import pytest

from ermodel.domain import (
    Attribute, Cardinality, ERModel, Endpoint, Entity, Relationship,
    RelationshipKind, StructuralErrorKind, normalize_name, relationship_kind,
)
from ermodel.exceptions import (
    BadCardinalitySymbol, InvalidModel, MalformedRelation, NotBinary, UnknownEntityReference,
)
from ermodel.factories import random_model, random_relation_string, shuffled
from ermodel.services.model_service import ModelService
from ermodel.services.relation_service import RelationService


def _entity(name, *attributes, parent=None):
    return Entity(name=name, attributes=tuple(Attribute(name=a) for a in attributes), parent=parent)


def _endpoint(entity, attribute, mark):
    return Endpoint(entity=entity, attribute=attribute, cardinality=Cardinality(mark))


class TestParseRelation:
    def test_department_relation(self):
        rel = RelationService.parse_relation("Hospital:hospital_id 1--* HospitalDepartment:hospital_id")
        assert rel.endpoints == (
            _endpoint('Hospital', 'hospital_id', '1'),
            _endpoint('HospitalDepartment', 'hospital_id', '*'),
        )
        assert rel.label is None

    def test_optional_card_relation(self):
        rel = RelationService.parse_relation("IdentificationCard:card_id ?--1 Visitor:card_id")
        assert rel.endpoints == (
            _endpoint('IdentificationCard', 'card_id', '?'),
            _endpoint('Visitor', 'card_id', '1'),
        )

    def test_self_relationship(self):
        rel = RelationService.parse_relation("A:id 1--1 A:id")
        assert rel.endpoints == (_endpoint('A', 'id', '1'), _endpoint('A', 'id', '1'))

    def test_endpoint_without_attribute(self):
        rel = RelationService.parse_relation("Hospital:hospital_id 1--* VisitorAccess")
        assert rel.endpoints[1] == _endpoint('VisitorAccess', None, '*')

    def test_whitespace_around_cardinality_pair(self):
        rel = RelationService.parse_relation("  A:id    +--?\tB  ")
        assert [e.cardinality for e in rel.endpoints] == [Cardinality.ONE_OR_MORE, Cardinality.ZERO_OR_ONE]

    def test_bad_cardinality_symbol(self):
        with pytest.raises(BadCardinalitySymbol) as exc:
            RelationService.parse_relation("X 9--* Y")
        assert exc.value.fragment == '9'

    def test_right_bad_cardinality_symbol(self):
        with pytest.raises(BadCardinalitySymbol) as exc:
            RelationService.parse_relation("X 1--0..* Y")
        assert exc.value.fragment == '0..*'

    @pytest.mark.parametrize('text', [
        'Hospital 1--*',
        'Hospital1--*Department',
        'A: 1--* B',
        'A 1 -- * B',
        '',
    ])
    def test_malformed(self, text):
        with pytest.raises(MalformedRelation) as exc:
            RelationService.parse_relation(text)
        assert exc.value.fragment == text.strip()


class TestSerializeRelation:
    def test_endpoint_without_attribute(self):
        rel = Relationship(endpoints=(
            _endpoint('Hospital', 'hospital_id', '1'),
            _endpoint('VisitorAccess', None, '*'),
        ))
        assert RelationService.serialize_relation(rel) == "Hospital:hospital_id 1--* VisitorAccess"

    def test_round_trip_quoted_string(self):
        text = "IdentificationCard:card_id ?--1 Visitor:card_id"
        assert RelationService.serialize_relation(RelationService.parse_relation(text)) == text

    def test_nary_is_not_binary(self):
        rel = Relationship(endpoints=(
            _endpoint('A', None, '1'), _endpoint('B', None, '*'), _endpoint('C', None, '+'),
        ))
        with pytest.raises(NotBinary):
            RelationService.serialize_relation(rel)

    def test_round_trip_corpus(self):
        rng = random.Random(1234)
        corpus = [random_relation_string(rng) for _ in range(250)]
        corpus += [
            "Hospital:hospital_id 1--* HospitalDepartment:hospital_id",
            "IdentificationCard:card_id ?--1 Visitor:card_id",
        ]
        for text in corpus:
            serialized = RelationService.serialize_relation(RelationService.parse_relation(text))
            assert serialized == re.sub(r'\s+', ' ', text.strip())
            assert RelationService.parse_relation(serialized) == RelationService.parse_relation(text)


class TestRelationshipKind:
    @pytest.mark.parametrize('text, kind', [
        ('A 1--1 B', RelationshipKind.ONE_TO_ONE),
        ('A ?--1 B', RelationshipKind.ONE_TO_ONE),
        ('A 1--* B', RelationshipKind.ONE_TO_MANY),
        ('A +--? B', RelationshipKind.ONE_TO_MANY),
        ('A *--+ B', RelationshipKind.MANY_TO_MANY),
    ])
    def test_binary_kinds(self, text, kind):
        assert relationship_kind(RelationService.parse_relation(text)) == kind

    def test_nary(self):
        rel = Relationship(endpoints=tuple(_endpoint(n, None, '1') for n in 'ABC'))
        assert relationship_kind(rel) == RelationshipKind.N_ARY


class TestValidateModel:
    def test_empty_model(self):
        assert ModelService.validate_model(ERModel()) == []

    def test_unknown_entity_reference(self):
        model = ERModel(
            entities=(_entity('Hospital', 'id'), _entity('Department', 'id')),
            relationships=(RelationService.parse_relation('Hospital:id 1--* Departmant'),),
        )
        errors = ModelService.validate_model(model)
        assert [(e.kind, e.location) for e in errors] == [
            (StructuralErrorKind.UNKNOWN_ENTITY, 'relationships[0].endpoints[1]'),
        ]

    def test_unknown_attribute_reference(self):
        model = ERModel(
            entities=(_entity('A', 'id'), _entity('B', 'id')),
            relationships=(RelationService.parse_relation('A:id 1--* B:a_id'),),
        )
        errors = ModelService.validate_model(model)
        assert [(e.kind, e.location) for e in errors] == [
            (StructuralErrorKind.UNKNOWN_ATTRIBUTE, 'relationships[0].endpoints[1]'),
        ]

    def test_cyclic_hierarchy(self):
        model = ERModel(entities=(_entity('A', 'id', parent='B'), _entity('B', 'id', parent='A')))
        errors = ModelService.validate_model(model)
        assert [e.kind for e in errors] == [StructuralErrorKind.CYCLIC_HIERARCHY]
        assert errors[0].location == 'entities[0]'

    def test_unknown_parent(self):
        errors = ModelService.validate_model(ERModel(entities=(_entity('A', 'id', parent='Z'),)))
        assert [(e.kind, e.location) for e in errors] == [
            (StructuralErrorKind.UNKNOWN_PARENT, 'entities[0].parent'),
        ]

    def test_exact_duplicates(self):
        model = ERModel(entities=(_entity('A', 'id', 'id'), _entity('A', 'id')))
        kinds = [(e.kind, e.location) for e in ModelService.validate_model(model)]
        assert (StructuralErrorKind.DUPLICATE_ATTRIBUTE, 'entities[0].attributes[1]') in kinds
        assert (StructuralErrorKind.DUPLICATE_ENTITY, 'entities[1]') in kinds

    def test_normalization_equal_names_are_lint_concerns(self):
        model = ERModel(entities=(_entity('Visitor', 'visitorName', 'visitor_name'), _entity('visitor', 'id')))
        assert ModelService.validate_model(model) == []

    def test_invalid_identifier(self):
        model = ERModel(entities=(_entity('Visitor Access', 'id'),))
        errors = ModelService.validate_model(model)
        assert [(e.kind, e.location) for e in errors] == [
            (StructuralErrorKind.INVALID_IDENTIFIER, 'entities[0].name'),
        ]

    @pytest.mark.parametrize('name', ['A\\', '<x>', 'a>b', 'Ward<'])
    def test_dot_reserved_characters_rejected(self, name):
        model = ERModel(entities=(_entity('Ward', 'id'), _entity('Bed', name)))
        errors = ModelService.validate_model(model)
        assert [(e.kind, e.location) for e in errors] == [
            (StructuralErrorKind.INVALID_IDENTIFIER, 'entities[1].attributes[0].name'),
        ]

    @pytest.mark.parametrize('name', ['Weird"Name', 'a;b', '{x}', 'Pátient', '1st', 'A=B', '[x]', 'x-y'])
    def test_punctuation_is_allowed(self, name):
        assert ModelService.validate_model(ERModel(entities=(_entity(name, 'id'),))) == []

    def test_reference_resolves_by_normalized_name(self):
        model = ERModel(
            entities=(_entity('HospitalDepartment', 'hospital_department_id'), _entity('Ward', 'id')),
            relationships=(RelationService.parse_relation('hospital_department:hospitalDepartmentId 1--* Ward'),),
        )
        assert ModelService.validate_model(model) == []

    def test_ambiguous_reference(self):
        model = ERModel(
            entities=(_entity('Visitor', 'id'), _entity('visitor', 'id'), _entity('Ward', 'id')),
            relationships=(RelationService.parse_relation('VISITOR 1--* Ward'),),
        )
        errors = ModelService.validate_model(model)
        assert [e.kind for e in errors] == [StructuralErrorKind.AMBIGUOUS_REFERENCE]

    def test_single_endpoint_relationship(self):
        model = ERModel(
            entities=(_entity('A', 'id'),),
            relationships=(Relationship(endpoints=(_endpoint('A', None, '1'),)),),
        )
        assert [e.kind for e in ModelService.validate_model(model)] == [StructuralErrorKind.ARITY]

    def test_random_models_are_valid(self):
        rng = random.Random(7)
        for _ in range(50):
            assert ModelService.validate_model(random_model(rng, nary_probability=0.2)) == []


class TestCanonicalize:
    def test_order_independence(self):
        a = ERModel(entities=(_entity('Ward', 'id'), _entity('Bed', 'id')))
        b = ERModel(entities=(_entity('Bed', 'id'), _entity('Ward', 'id')))
        assert ModelService.canonicalize(a) == ModelService.canonicalize(b)
        assert [e.name for e in ModelService.canonicalize(a).entities] == ['Bed', 'Ward']

    def test_idempotent(self):
        rng = random.Random(99)
        for _ in range(30):
            canonical = ModelService.canonicalize(random_model(rng, nary_probability=0.2))
            assert ModelService.canonicalize(canonical) == canonical

    def test_permutation_corpus_has_single_image(self):
        entities = [
            _entity('Hospital', 'hospital_id'),
            _entity('HospitalDepartment', 'hospital_department_id', 'hospital_id'),
            _entity('VisitorAccess', 'visitor_access_id'),
            _entity('Visitor', 'visitor_id'),
            _entity('IdentificationCard', 'card_id'),
        ]
        relationships = (
            RelationService.parse_relation('Hospital:hospital_id 1--* HospitalDepartment:hospital_id'),
            RelationService.parse_relation('Visitor:visitor_id 1--* VisitorAccess'),
            RelationService.parse_relation('IdentificationCard:card_id ?--1 Visitor'),
        )
        images = {
            ModelService.canonicalize(ERModel(entities=tuple(perm), relationships=relationships))
            for perm in itertools.permutations(entities)
        }
        assert len(images) == 1

    def test_relationship_permutations(self):
        rng = random.Random(5)
        model = random_model(rng, max_entities=6, max_relationships=10)
        canonical = ModelService.canonicalize(model)
        for _ in range(20):
            assert ModelService.canonicalize(shuffled(rng, model)) == canonical

    def test_references_rewritten_to_declared_names(self):
        model = ERModel(
            entities=(_entity('HospitalDepartment', 'hospital_department_id'), _entity('Ward', 'id')),
            relationships=(RelationService.parse_relation('hospital_department:HospitalDepartmentId 1--* Ward'),),
        )
        rel = ModelService.canonicalize(model).relationships[0]
        assert rel.endpoints[0] == _endpoint('HospitalDepartment', 'hospital_department_id', '1')

    def test_invalid_model_rejected(self):
        model = ERModel(
            entities=(_entity('A', 'id'),),
            relationships=(RelationService.parse_relation('A 1--* Missing'),),
        )
        with pytest.raises(UnknownEntityReference) as exc:
            ModelService.canonicalize(model)
        assert isinstance(exc.value, InvalidModel)
        assert exc.value.path == 'relationships[0].endpoints[1]'


class TestHierarchyHelpers:
    def test_depth_of_chain(self):
        model = ERModel(entities=(
            _entity('A', 'id'),
            _entity('B', 'x', parent='A'),
            _entity('C', 'x', parent='B'),
            _entity('D', 'x', parent='C'),
            _entity('E', 'x', parent='D'),
        ))
        assert ModelService.entity_depth(model, 'E') == 4
        assert ModelService.ancestors(model, 'C') == ['B', 'A']
        assert ModelService.entity_depth(model, 'A') == 0


def test_normalize_name_mixes_styles():
    assert normalize_name('HospitalDepartment') == normalize_name('hospital_department')
    assert normalize_name('hospital-department ID') == 'hospitaldepartmentid'
