import random
from itertools import permutations

import pytest

from ermodel.domain import Attribute, Cardinality, ERModel, Endpoint, Entity, Relationship
from ermodel.factories import random_model
from ermodel.services.model_service import ModelService
from ermodel.services.relation_service import RelationService
from er_modeling.toolconfig import ToolConfigError, load_tool_config
from linting.domain import ChecklistStatus, Finding, QualityLevel, RuleConfig, Severity
from linting.exceptions import InvalidRuleConfig, UnknownRule
from linting.rules import CATALOG
from linting.services.lint_service import LintService


def _entity(name, *attributes, parent=None, pk=None):
    return Entity(
        name=name,
        attributes=tuple(Attribute(name=a, is_primary_key=(a == pk), not_null=True) for a in attributes),
        parent=parent,
    )


def _rel(text):
    return RelationService.parse_relation(text)


def _rule_ids(findings):
    return [f.rule_id for f in findings]


def _only(findings, rule_id):
    return [f for f in findings if f.rule_id == rule_id]


class TestRules:
    def test_thirteen_attributes_overload(self):
        model = ERModel(entities=(_entity('Wide', *[f"a{i}" for i in range(13)]),))
        found = _only(LintService.run_lints(model), 'attribute-overload')
        assert [f.location for f in found] == ['entities[0]']
        assert found[0].severity == Severity.WARNING

    def test_twelve_attributes_is_fine(self):
        model = ERModel(entities=(_entity('Wide', *[f"a{i}" for i in range(12)]),))
        assert _only(LintService.run_lints(model), 'attribute-overload') == []

    def test_depth_four_chain(self):
        model = ERModel(entities=(
            _entity('A', 'id'),
            _entity('B', 'id', parent='A'),
            _entity('C', 'id', parent='B'),
            _entity('D', 'id', parent='C'),
            _entity('E', 'id', parent='D'),
        ))
        found = _only(LintService.run_lints(model), 'deep-hierarchy')
        assert [f.location for f in found] == ['entities[4]']
        assert found[0].message.startswith('E sits 4 levels below A')

    def test_nary_review(self):
        model = ERModel(
            entities=(_entity('A', 'id'), _entity('B', 'id'), _entity('C', 'id')),
            relationships=(Relationship(endpoints=tuple(
                Endpoint(n, 'id', Cardinality.ZERO_OR_MORE) for n in 'ABC'
            )),),
        )
        found = _only(LintService.run_lints(model), 'nary-review')
        assert [(f.location, f.severity) for f in found] == [('relationships[0]', Severity.INFO)]

    def test_duplicate_attribute_reported_at_later_one(self):
        model = ERModel(entities=(_entity('Visitor', 'visitor_id', 'visitorName', 'visitor_name'),))
        found = _only(LintService.run_lints(model), 'duplicate-attribute')
        assert [(f.location, f.severity) for f in found] == [('entities[0].attributes[2]', Severity.ERROR)]

    def test_duplicate_attribute_is_the_only_error_rule(self):
        errors = [r.rule_id for r in CATALOG.values() if r.severity == Severity.ERROR]
        assert errors == ['duplicate-attribute']

    def test_isolated_entity(self):
        model = ERModel(
            entities=(_entity('A', 'id'), _entity('B', 'id'), _entity('Lonely', 'id'),
                      _entity('Base', 'id'), _entity('Special', 'id', parent='Base')),
            relationships=(_rel('A:id 1--* B:id'),),
        )
        found = _only(LintService.run_lints(model), 'isolated-entity')
        assert [f.location for f in found] == ['entities[2]']

    def test_dangling_endpoint(self):
        model = ERModel(
            entities=(_entity('Hospital', 'hospital_id'), _entity('VisitorAccess', 'visitor_access_id')),
            relationships=(_rel('Hospital:hospital_id 1--* VisitorAccess'),),
        )
        found = _only(LintService.run_lints(model), 'dangling-fk-endpoint')
        assert [f.location for f in found] == ['relationships[0].endpoints[1]']

    def test_key_naming_flags_minority_pattern(self):
        model = ERModel(entities=(
            _entity('Visitor', 'visitor_id', pk='visitor_id'),
            _entity('Ward', 'ward_id', pk='ward_id'),
            _entity('IdentificationCard', 'card_id', pk='card_id'),
            _entity('Badge', 'id', pk='id'),
        ))
        found = _only(LintService.run_lints(model), 'key-naming-inconsistent')
        assert [f.location for f in found] == ['entities[2].attributes[0]', 'entities[3].attributes[0]']

    def test_key_naming_consistent_id_pattern(self):
        model = ERModel(entities=(_entity('A', 'id', pk='id'), _entity('B', 'ID', pk='ID')))
        assert _only(LintService.run_lints(model), 'key-naming-inconsistent') == []

    def test_key_naming_tie_prefers_entity_id(self):
        model = ERModel(entities=(_entity('A', 'id', pk='id'), _entity('B', 'b_id', pk='b_id')))
        found = _only(LintService.run_lints(model), 'key-naming-inconsistent')
        assert [f.location for f in found] == ['entities[0].attributes[0]']

    def test_duplicate_concept(self):
        model = ERModel(entities=(_entity('HospitalDepartment', 'id'), _entity('hospital_department', 'id')))
        found = _only(LintService.run_lints(model), 'duplicate-concept')
        assert [f.location for f in found] == ['entities[1]']

    def test_missing_constraints(self):
        model = ERModel(entities=(Entity('A', (Attribute('id', is_primary_key=True),)),))
        found = _only(LintService.run_lints(model), 'missing-constraints')
        assert [(f.location, f.severity) for f in found] == [('$', Severity.INFO)]

    def test_unknown_rule(self):
        with pytest.raises(UnknownRule):
            LintService.run_lints(ERModel(), RuleConfig(enabled_rules={'no-such-rule'}))

    def test_threshold_below_one_rejected(self):
        with pytest.raises(InvalidRuleConfig):
            RuleConfig(attribute_overload_threshold=0)

    def test_disabled_rules_do_not_run(self):
        model = ERModel(entities=(Entity('A', (Attribute('id'),)),))
        findings = LintService.lint_model(model, RuleConfig(enabled_rules={'isolated-entity'}))
        assert _rule_ids(findings) == ['isolated-entity']

    def test_findings_sorted_naturally(self):
        entities = tuple(Entity(f"E{i}", (Attribute('id'),)) for i in range(12))
        findings = _only(LintService.run_lints(ERModel(entities=entities)), 'isolated-entity')
        assert [f.location for f in findings] == [f"entities[{i}]" for i in range(12)]

    def test_report_line_format(self):
        finding = Finding('isolated-entity', Severity.WARNING, 'entities[0]', 'A takes part in nothing')
        assert finding.format_line() == 'warning isolated-entity entities[0]: A takes part in nothing'


def _links(model, relationship, one, many):
    if not relationship.is_binary:
        return False
    ends = list(zip(ModelService.resolved_endpoints(model, relationship), relationship.endpoints))
    for (a, x), (b, y) in (ends, ends[::-1]):
        if a == one and b == many and x.cardinality == Cardinality.EXACTLY_ONE and y.cardinality.is_many:
            return True
    return False


def _redundancy_oracle(model):
    locations = []
    names = [e.name for e in model.entities]
    rels = list(model.relationships)
    for p, m, c in permutations(names, 3):
        if not any(_links(model, r, p, m) for r in rels):
            continue
        if not any(_links(model, r, m, c) for r in rels):
            continue
        locations += [f"relationships[{k}]" for k, r in enumerate(rels) if _links(model, r, p, c)]
    return sorted(locations)


class TestTransitiveRedundancy:
    def test_hospital_triple(self, load_model):
        model = load_model('hospital_triple.json')
        findings = LintService.detect_transitive_redundancy(model)
        assert len(findings) == 1
        direct = model.relationships[int(findings[0].location[len('relationships['):-1])]
        assert RelationService.serialize_relation(direct) == 'Hospital:hospital_id 1--* VisitorAccess'

    def test_without_direct_edge(self, load_model):
        assert LintService.detect_transitive_redundancy(load_model('hospital_triple_gold.json')) == []

    def test_matches_brute_force_oracle(self):
        rng = random.Random(2024)
        for _ in range(200):
            model = random_model(rng, max_entities=8, max_relationships=14, nary_probability=0.1)
            findings = LintService.detect_transitive_redundancy(model)
            assert sorted(f.location for f in findings) == _redundancy_oracle(model)

    def test_skipped_when_disabled(self, load_model):
        model = load_model('hospital_triple.json')
        findings = LintService.lint_model(model, RuleConfig(enabled_rules={'dangling-fk-endpoint'}))
        assert 'transitive-redundancy' not in _rule_ids(findings)


class TestLevels:
    def test_fixture_expectations(self, load_model, expectations):
        for name, expected in expectations.items():
            model = load_model(name)
            findings = LintService.lint_model(model)
            assessment = LintService.assess_level(model, findings)
            assert assessment.level == QualityLevel(expected['level']), name
            assert list(assessment.failed_gates) == expected['failed_gates'], name
            assert sorted(set(_rule_ids(findings))) == expected['rules'], name

    def test_zero_attribute_entity_is_l0(self):
        model = ERModel(
            entities=(Entity('A', (Attribute('id', not_null=True),)), Entity('B')),
            relationships=(_rel('A:id 1--* B'),),
        )
        findings = LintService.lint_model(model)
        assert LintService.classify_level(model, findings) == QualityLevel.L0

    def test_never_awards_l4(self, load_model):
        model = load_model('gold_hospital.json')
        assessment = LintService.assess_level(model, LintService.lint_model(model))
        assert assessment.level == QualityLevel.L3
        assert assessment.manual_review

    def test_merged_employee_below_l3(self, load_model):
        model = load_model('merged_employee.json')
        assert LintService.classify_level(model, LintService.lint_model(model)) < QualityLevel.L3

    def test_extra_finding_never_raises_level(self):
        rng = random.Random(31)
        rules = list(CATALOG.values())
        for _ in range(100):
            model = random_model(rng, nary_probability=0.2)
            findings = LintService.lint_model(model)
            rule = rng.choice(rules)
            extra = rule.finding('$', 'injected')
            before = LintService.classify_level(model, findings)
            after = LintService.classify_level(model, findings + [extra])
            assert after <= before

    def test_raising_threshold_never_adds_findings(self):
        rng = random.Random(8)
        for _ in range(50):
            model = random_model(rng)
            counts = [
                len(LintService.lint_model(model, RuleConfig(attribute_overload_threshold=t)))
                for t in range(1, 8)
            ]
            assert counts == sorted(counts, reverse=True)

    def test_deterministic(self):
        model = random_model(random.Random(3), nary_probability=0.3)
        assert LintService.lint_model(model) == LintService.lint_model(model)


class TestChecklist:
    def test_gold_model(self, load_model):
        model = load_model('gold_hospital.json')
        items = LintService.checklist(model, LintService.lint_model(model))
        statuses = {item.status for item in items}
        assert ChecklistStatus.FAIL not in statuses
        assert sum(item.status == ChecklistStatus.REFERENCE for item in items) == 2
        assert {item.category for item in items} == {
            'Completeness', 'Correctness', 'Clarity', 'Simplicity', 'Flexibility', 'Implementability',
        }

    def test_redundant_triple_fails_redundancy_item(self, load_model):
        model = load_model('hospital_triple.json')
        items = LintService.checklist(model, LintService.lint_model(model))
        failing = {item.text for item in items if item.status == ChecklistStatus.FAIL}
        assert "no relationship can be derived from two others" in failing

    def test_disabled_rule_becomes_manual(self, load_model):
        model = load_model('hospital_triple.json')
        config = RuleConfig(enabled_rules={'isolated-entity'})
        items = LintService.checklist(model, LintService.lint_model(model, config), config)
        item = next(i for i in items if i.rule_ids == ('transitive-redundancy',))
        assert item.status == ChecklistStatus.MANUAL


class TestToolConfig:
    def test_defaults_from_settings(self):
        config = load_tool_config()
        assert config.attribute_overload_threshold == 12
        assert config.hierarchy_depth_threshold == 3
        assert config.enabled_rules is None
        assert config.match_threshold == 0.5

    def test_ini_file(self, tmp_path):
        path = tmp_path / 'erpipe.ini'
        path.write_text(
            "[settings]\nATTRIBUTE_OVERLOAD_THRESHOLD=5\nENABLED_RULES=attribute-overload, isolated-entity\n",
            encoding='utf-8',
        )
        config = load_tool_config(str(path))
        assert config.attribute_overload_threshold == 5
        assert config.enabled_rules == frozenset({'attribute-overload', 'isolated-entity'})
        assert config.rule_config.hierarchy_depth_threshold == 3

    def test_environment_overrides_file(self, tmp_path, monkeypatch):
        path = tmp_path / 'erpipe.ini'
        path.write_text("[settings]\nHIERARCHY_DEPTH_THRESHOLD=5\n", encoding='utf-8')
        monkeypatch.setenv('HIERARCHY_DEPTH_THRESHOLD', '2')
        assert load_tool_config(str(path)).hierarchy_depth_threshold == 2

    def test_unknown_rule_in_file(self, tmp_path):
        path = tmp_path / 'erpipe.ini'
        path.write_text("[settings]\nENABLED_RULES=no-such-rule\n", encoding='utf-8')
        with pytest.raises(UnknownRule):
            load_tool_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ToolConfigError):
            load_tool_config(str(tmp_path / 'absent.ini'))
