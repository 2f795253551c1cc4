import logging
import random

import pytest

from diffing.domain import ClassCounts, ElementClass
from diffing.serializers import DiffReportSerializer
from diffing.services.diff_service import DiffService
from ermodel.domain import Attribute, ERModel, Entity, Relationship
from ermodel.factories import ATTRIBUTE_NAMES, random_model, shuffled
from ermodel.services.relation_service import RelationService

logger = logging.getLogger(__name__)


def _entity(name, *attributes):
    return Entity(name=name, attributes=tuple(Attribute(name=a) for a in attributes))


def _model(entities, relations=()):
    return ERModel(entities=tuple(entities), relationships=tuple(RelationService.parse_relation(r) for r in relations))


class TestRatios:
    def test_vacuous_ratios(self):
        counts = ClassCounts(ElementClass.ENTITIES)
        assert (counts.precision, counts.recall) == (1.0, 1.0)
        assert counts.f1 == 1.0

    def test_zero_f1(self):
        counts = ClassCounts(ElementClass.ENTITIES, matched=0, missing=3, surplus=2)
        assert (counts.precision, counts.recall, counts.f1) == (0.0, 0.0, 0.0)

    def test_values(self):
        counts = ClassCounts(ElementClass.ATTRIBUTES, matched=3, missing=1, surplus=3)
        assert counts.precision == 0.5
        assert counts.recall == 0.75
        assert counts.f1 == pytest.approx(0.6)


class TestMatchEntities:
    def test_identity(self, load_model):
        gold = load_model('gold_hospital.json')
        mapping = DiffService.match_entities(gold, gold)
        assert len(mapping.entity_pairs) == len(gold.entities)
        assert mapping.unmatched_generated == mapping.unmatched_gold == ()

    def test_normalization_equal_names(self):
        gen = _model([_entity('hospitalDepartment', 'id')])
        gold = _model([_entity('HospitalDepartment', 'name')])
        mapping = DiffService.match_entities(gen, gold)
        assert mapping.entity_pairs == (('hospitalDepartment', 'HospitalDepartment'),)
        assert mapping.scores == ()

    def test_attribute_overlap_pairs_renamed_entity(self):
        gen = _model([_entity('Staff', 'employee_id', 'full_name', 'role')])
        gold = _model([_entity('Employee', 'employee_id', 'full_name', 'document_number')])
        mapping = DiffService.match_entities(gen, gold)
        assert mapping.entity_pairs == (('Staff', 'Employee'),)
        assert mapping.overlap_total == 0.5

    def test_below_threshold_stays_unmatched(self):
        gen = _model([_entity('Staff', 'employee_id', 'role', 'shift')])
        gold = _model([_entity('Employee', 'employee_id', 'full_name', 'document_number')])
        mapping = DiffService.match_entities(gen, gold)
        assert mapping.entity_pairs == ()
        assert mapping.unmatched_generated == ('Staff',)
        assert mapping.unmatched_gold == ('Employee',)

    def test_configurable_threshold(self):
        gen = _model([_entity('Staff', 'employee_id', 'role', 'shift')])
        gold = _model([_entity('Employee', 'employee_id', 'full_name', 'document_number')])
        assert DiffService.match_entities(gen, gold, threshold=0.2).entity_pairs == (('Staff', 'Employee'),)

    def test_highest_score_first(self):
        gen = _model([_entity('Worker', 'a', 'b', 'c')])
        gold = _model([_entity('Partial', 'a', 'b', 'x'), _entity('Exact', 'a', 'b', 'c')])
        assert DiffService.match_entities(gen, gold).entity_pairs == (('Worker', 'Exact'),)

    def test_tie_broken_by_name(self):
        gen = _model([_entity('Worker', 'a', 'b')])
        gold = _model([_entity('Zeta', 'a', 'b'), _entity('Alpha', 'a', 'b')])
        assert DiffService.match_entities(gen, gold).entity_pairs == (('Worker', 'Alpha'),)

    def test_greedy_close_to_optimal(self):
        rng = random.Random(77)
        optimal = 0
        for n in range(50):
            gen, gold = _renamed_pair(rng)
            greedy = DiffService.match_entities(gen, gold).overlap_total
            best = _best_overlap(gen.entities, gold.entities, 0.5)
            if greedy >= best - 1e-9:
                optimal += 1
            else:
                logger.warning(f"instance {n}: greedy overlap {greedy:.3f} below optimal {best:.3f}")
        assert optimal >= 45


def _renamed_pair(rng):
    """Gold entities and perturbed, renamed generated copies"""
    gold, gen = [], []
    for i in range(rng.randint(1, 6)):
        names = rng.sample(ATTRIBUTE_NAMES, rng.randint(2, 5))
        gold.append(_entity(f"Gold{i}", *names))
        if rng.random() < 0.15:
            continue
        kept = [a for a in names if rng.random() < 0.8] + rng.sample(ATTRIBUTE_NAMES, rng.randint(0, 2))
        gen.append(_entity(f"Gen{i}", *dict.fromkeys(kept)))
    rng.shuffle(gen)
    return ERModel(entities=tuple(gen)), ERModel(entities=tuple(gold))


def _best_overlap(generated, gold, threshold):
    """Exhaustive search over every partial injection"""
    best = 0.0

    def search(i, used, total):
        nonlocal best
        if i == len(generated):
            best = max(best, total)
            return
        search(i + 1, used, total)
        for j, candidate in enumerate(gold):
            if j in used:
                continue
            score = DiffService.attribute_overlap(generated[i], candidate)
            if score >= threshold:
                search(i + 1, used | {j}, total + score)

    search(0, frozenset(), 0.0)
    return best


class TestDiffModels:
    def test_identity_on_random_models(self):
        rng = random.Random(11)
        for _ in range(100):
            model = random_model(rng, nary_probability=0.2)
            report = DiffService.diff_models(model, model)
            assert all(c.f1 == 1.0 for c in report.classes)
            assert all(c.missing == c.surplus == 0 for c in report.classes)
            assert report.overall_f1 == 1.0

    def test_roles_are_symmetric(self):
        rng = random.Random(12)
        for _ in range(100):
            gen, gold = random_model(rng), random_model(rng)
            forward = DiffService.diff_models(gen, gold)
            backward = DiffService.diff_models(gold, gen)
            for element_class in ElementClass:
                a, b = forward.counts(element_class), backward.counts(element_class)
                assert a.missing == b.surplus, element_class
                assert a.surplus == b.missing, element_class
                assert a.matched == b.matched, element_class

    def test_removing_a_relationship_is_monotone(self):
        rng = random.Random(13)
        checked = 0
        for _ in range(100):
            gen, gold = random_model(rng), random_model(rng)
            if not gen.relationships:
                continue
            drop = rng.randrange(len(gen.relationships))
            smaller = ERModel(
                title=gen.title, entities=gen.entities,
                relationships=gen.relationships[:drop] + gen.relationships[drop + 1:],
            )
            before = DiffService.diff_models(gen, gold).counts(ElementClass.RELATIONSHIPS)
            after = DiffService.diff_models(smaller, gold).counts(ElementClass.RELATIONSHIPS)
            assert after.missing >= before.missing
            assert after.surplus <= before.surplus
            checked += 1
        assert checked > 0

    def test_permutation_invariant(self):
        rng = random.Random(14)
        for _ in range(30):
            gen, gold = random_model(rng), random_model(rng)
            assert DiffService.diff_models(gen, gold) == DiffService.diff_models(shuffled(rng, gen), shuffled(rng, gold))

    def test_empty_against_gold(self, load_model):
        report = DiffService.diff_models(load_model('empty.json'), load_model('gold_hospital.json'))
        entities = report.counts(ElementClass.ENTITIES)
        assert entities.recall == 0.0
        assert entities.precision == 1.0
        assert entities.missing == 9

    def test_merged_employee_misses_supervision(self, load_model):
        report = DiffService.diff_models(load_model('merged_employee.json'), load_model('gold_hospital.json'))
        relationships = report.counts(ElementClass.RELATIONSHIPS)
        assert relationships.missing >= 1
        assert any('supervises' in name for name in relationships.missing_names)
        assert set(report.mapping.unmatched_gold) >= {'Physician', 'Resident'}

    def test_redundant_triple_has_one_surplus(self, load_model):
        report = DiffService.diff_models(load_model('hospital_triple.json'), load_model('hospital_triple_gold.json'))
        relationships = report.counts(ElementClass.RELATIONSHIPS)
        assert relationships.surplus == 1
        assert relationships.missing == 0
        assert relationships.surplus_names == ('Hospital:hospital_id 1--* VisitorAccess',)

    def test_direction_insensitive(self):
        gen = _model([_entity('A', 'id'), _entity('B', 'id')], ['B:id *--1 A:id'])
        gold = _model([_entity('A', 'id'), _entity('B', 'id')], ['A:id 1--* B:id'])
        report = DiffService.diff_models(gen, gold)
        assert report.counts(ElementClass.RELATIONSHIPS).f1 == 1.0
        assert report.counts(ElementClass.CARDINALITIES).f1 == 1.0

    def test_cardinality_disagreement(self):
        gen = _model([_entity('A', 'id'), _entity('B', 'id')], ['A:id ?--1 B:id'])
        gold = _model([_entity('A', 'id'), _entity('B', 'id')], ['A:id 1--* B:id'])
        report = DiffService.diff_models(gen, gold)
        assert report.counts(ElementClass.RELATIONSHIPS).matched == 1
        cardinalities = report.counts(ElementClass.CARDINALITIES)
        assert (cardinalities.matched, cardinalities.missing, cardinalities.surplus) == (0, 1, 1)

    def test_relationships_follow_renamed_entities(self):
        gen = _model(
            [_entity('Hospital', 'hospital_id'), _entity('Staff', 'employee_id', 'full_name')],
            ['Hospital:hospital_id 1--* Staff'],
        )
        gold = _model(
            [_entity('Hospital', 'hospital_id'), _entity('Employee', 'employee_id', 'full_name')],
            ['Hospital:hospital_id 1--* Employee'],
        )
        assert DiffService.diff_models(gen, gold).counts(ElementClass.RELATIONSHIPS).matched == 1

    def test_constraints(self):
        gen = ERModel(entities=(Entity('A', (
            Attribute('id', is_primary_key=True), Attribute('code', unique=True),
        )),))
        gold = ERModel(entities=(Entity('A', (
            Attribute('id', is_primary_key=True, not_null=True), Attribute('code'), Attribute('name', not_null=True),
        )),))
        constraints = DiffService.diff_models(gen, gold).counts(ElementClass.CONSTRAINTS)
        assert constraints.matched == 1
        assert constraints.missing_names == ('A.id:not_null', 'A.name:not_null')
        assert constraints.surplus_names == ('A.code:unique',)

    def test_nary_relationships(self):
        entities = [_entity(n, 'id') for n in 'ABC']
        nary = Relationship(endpoints=tuple(
            RelationService.parse_relation(f"{n}:id 1--1 X").endpoints[0] for n in 'ABC'
        ))
        model = ERModel(entities=tuple(entities), relationships=(nary,))
        report = DiffService.diff_models(model, ERModel(entities=tuple(entities)))
        assert report.counts(ElementClass.RELATIONSHIPS).surplus == 1


class TestReports:
    def test_table_rows(self, load_model):
        report = DiffService.diff_models(load_model('merged_employee.json'), load_model('gold_hospital.json'))
        table = DiffService.report_table(report)
        assert list(table.index) == ['entities', 'attributes', 'relationships', 'cardinalities', 'constraints', 'overall']
        assert list(table.columns) == ['matched', 'missing', 'surplus', 'precision', 'recall', 'f1']
        assert table.loc['overall', 'f1'] == pytest.approx(report.overall_f1)

    def test_human_report_names_elements(self, load_model):
        report = DiffService.diff_models(load_model('hospital_triple.json'), load_model('hospital_triple_gold.json'))
        text = DiffService.format_report(report)
        assert 'surplus relationships: Hospital:hospital_id 1--* VisitorAccess' in text

    def test_overlap_pairs_reported(self):
        gen = _model([_entity('Staff', 'employee_id', 'full_name', 'role'), _entity('Ward', 'ward_id')])
        gold = _model([_entity('Employee', 'employee_id', 'full_name', 'document_number'), _entity('Ward', 'ward_id')])
        report = DiffService.diff_models(gen, gold)

        text = DiffService.format_report(report)
        assert 'matched by attribute overlap: Staff ~ Employee (0.50)' in text
        assert 'attribute overlap total: 0.50' in text
        assert 'Ward ~' not in text

        mapping = DiffReportSerializer(report).data['mapping']
        assert mapping['overlap_pairs'] == [{'generated': 'Staff', 'gold': 'Employee', 'score': 0.5}]
        assert mapping['overlap_total'] == 0.5

    def test_name_matches_report_no_overlap(self, load_model):
        gold = load_model('gold_hospital.json')
        report = DiffService.diff_models(gold, gold)
        assert 'attribute overlap' not in DiffService.format_report(report)
        assert DiffReportSerializer(report).data['mapping']['overlap_total'] == 0.0

    def test_identity_table(self, load_model):
        gold = load_model('gold_hospital.json')
        table = DiffService.report_table(DiffService.diff_models(gold, gold))
        assert (table['f1'] == 1.0).all()

    def test_serializer(self, load_model):
        report = DiffService.diff_models(load_model('empty.json'), load_model('gold_hospital.json'))
        data = DiffReportSerializer(report).data
        assert [c['element_class'] for c in data['classes']] == [c.value for c in ElementClass]
        assert data['classes'][0]['recall'] == 0.0
        assert data['mapping']['unmatched_gold'][0] == 'CardAssignment'
