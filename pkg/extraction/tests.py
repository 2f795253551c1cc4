import json
import random

import pytest

from ermodel.domain import Cardinality, ERModel
from ermodel.exceptions import BadCardinalitySymbol, InvalidModel, MalformedRelation, UnknownEntityReference
from ermodel.factories import random_model
from ermodel.services.model_service import ModelService
from ermodel.services.relation_service import RelationService
from extraction.domain import SourceKind
from extraction.exceptions import MalformedDocument, NoDocumentFound, SchemaViolation
from extraction.services.extraction_service import ExtractionService, balanced_spans

ERRORS = {
    'NoDocumentFound': NoDocumentFound,
    'MalformedDocument': MalformedDocument,
    'SchemaViolation': SchemaViolation,
    'BadCardinalitySymbol': BadCardinalitySymbol,
    'UnknownEntityReference': UnknownEntityReference,
}

MINIMAL = '{"entities": [{"name": "A", "attributes": [{"name": "id"}]}], "relationships": []}'


@pytest.fixture
def noisy_index(testdata_dir):
    return json.loads((testdata_dir / 'noisy_index.json').read_text(encoding='utf-8'))


def _expected_model(testdata_dir, name):
    document = (testdata_dir / 'noisy_expected' / name).read_text(encoding='utf-8')
    return ModelService.canonicalize(ExtractionService.parse_model(document))


class TestExtractDocument:
    def test_pure_document_passes_through(self):
        raw = MINIMAL + '\n'
        document, report = ExtractionService.extract_document(raw)
        assert document == raw
        assert report.source_kind == SourceKind.PURE_DOCUMENT
        assert report.bytes_discarded == 0
        assert report.warnings == ()

    def test_fenced_block(self):
        raw = f"Here is the model:\n```json\n{MINIMAL}\n```\nHope this helps"
        document, report = ExtractionService.extract_document(raw)
        assert document == MINIMAL
        assert report.source_kind == SourceKind.FENCED_BLOCK
        assert report.bytes_discarded == len(raw.encode()) - len(MINIMAL.encode())
        assert len(report.warnings) == 1

    def test_escaped_string(self):
        raw = json.dumps(MINIMAL)
        document, report = ExtractionService.extract_document(raw)
        assert json.loads(document) == json.loads(MINIMAL)
        assert report.source_kind == SourceKind.ESCAPED_STRING
        assert report.bytes_discarded > 0

    def test_embedded_in_prose(self):
        raw = f"Sure. {MINIMAL} That is all."
        document, report = ExtractionService.extract_document(raw)
        assert document == MINIMAL
        assert report.source_kind == SourceKind.EMBEDDED_IN_PROSE

    def test_prose_without_braces(self):
        with pytest.raises(NoDocumentFound):
            ExtractionService.extract_document("No model today, sorry.")

    def test_empty_input(self):
        with pytest.raises(NoDocumentFound):
            ExtractionService.extract_document("")

    def test_trailing_comma_is_repaired_with_warning(self):
        raw = '{"entities": [{"name": "A", "attributes": [{"name": "id"},]},], "relationships": [],}'
        document, report = ExtractionService.extract_document(raw)
        assert json.loads(document)['entities'][0]['name'] == 'A'
        assert report.source_kind == SourceKind.PURE_DOCUMENT
        assert report.bytes_discarded == 0
        assert any('lenient' in w for w in report.warnings)

    def test_unrepairable_candidate(self):
        with pytest.raises(MalformedDocument) as exc:
            ExtractionService.extract_document("Look: { nothing useful here }")
        assert exc.value.stage == 'extract'

    def test_deterministic(self):
        raw = f"prefix ```json\n{MINIMAL}\n``` suffix"
        assert ExtractionService.extract_document(raw) == ExtractionService.extract_document(raw)


def test_balanced_spans_ignore_braces_in_strings():
    text = 'a {"t": "}{"} b {"x": {"y": 1}} c'
    assert balanced_spans(text) == ['{"x": {"y": 1}}', '{"t": "}{"}']


class TestParseModel:
    def test_minimal_document(self):
        model = ExtractionService.parse_model(MINIMAL)
        assert len(model.entities) == 1
        attribute = model.entities[0].attributes[0]
        assert attribute.name == 'id'
        assert not (attribute.is_primary_key or attribute.is_foreign_key or attribute.not_null or attribute.unique)
        assert model.relationships == ()

    def test_relation_string_encoding(self):
        document = json.dumps({
            'entities': [
                {'name': 'Hospital', 'attributes': [{'name': 'hospital_id', 'pk': True}]},
                {'name': 'HospitalDepartment', 'attributes': [{'name': 'hospital_id', 'fk': True}]},
            ],
            'relationships': ['Hospital:hospital_id 1--* HospitalDepartment:hospital_id'],
        })
        model = ExtractionService.parse_model(document)
        assert model.relationships == (
            RelationService.parse_relation('Hospital:hospital_id 1--* HospitalDepartment:hospital_id'),
        )

    def test_structured_encoding_matches_string_encoding(self):
        entities = [
            {'name': 'A', 'attributes': [{'name': 'id'}]},
            {'name': 'B', 'attributes': [{'name': 'a_id'}]},
        ]
        structured = ExtractionService.parse_model(json.dumps({'entities': entities, 'relationships': [
            {'endpoints': [
                {'entity': 'A', 'attribute': 'id', 'cardinality': '1'},
                {'entity': 'B', 'attribute': 'a_id', 'cardinality': '*'},
            ]},
        ]}))
        string = ExtractionService.parse_model(json.dumps({
            'entities': entities, 'relationships': ['A:id 1--* B:a_id'],
        }))
        assert structured == string

    def test_number_in_relationships(self):
        with pytest.raises(SchemaViolation) as exc:
            ExtractionService.parse_model('{"entities": [], "relationships": [42]}')
        assert exc.value.path == 'relationships[0]'
        assert exc.value.expected == 'string or endpoint list'
        assert exc.value.found == 'number'

    def test_missing_entities(self):
        with pytest.raises(SchemaViolation) as exc:
            ExtractionService.parse_model('{"relationships": []}')
        assert exc.value.path == 'entities'
        assert exc.value.found == 'missing'

    def test_top_level_array(self):
        with pytest.raises(SchemaViolation) as exc:
            ExtractionService.parse_model('[1, 2]')
        assert (exc.value.path, exc.value.expected, exc.value.found) == ('$', 'object', 'array')

    def test_nested_attribute_path(self):
        document = '{"entities": [{"name": "A", "attributes": [{"name": "id"}, {"name": 7}]}]}'
        with pytest.raises(SchemaViolation) as exc:
            ExtractionService.parse_model(document)
        assert exc.value.path == 'entities[0].attributes[1].name'
        assert exc.value.found == 'number'

    def test_unsupported_format_version(self):
        with pytest.raises(SchemaViolation) as exc:
            ExtractionService.parse_model('{"format_version": "2", "entities": []}')
        assert exc.value.path == 'format_version'

    def test_single_endpoint_structured_relationship(self):
        document = json.dumps({'entities': [{'name': 'A', 'attributes': [{'name': 'id'}]}], 'relationships': [
            {'endpoints': [{'entity': 'A', 'cardinality': '1'}]},
        ]})
        with pytest.raises(SchemaViolation) as exc:
            ExtractionService.parse_model(document)
        assert exc.value.path == 'relationships[0].endpoints'
        assert exc.value.expected == 'list of at least 2 endpoints'

    def test_bad_cardinality_in_structured_endpoint(self):
        document = json.dumps({'entities': [{'name': 'A'}, {'name': 'B'}], 'relationships': [
            {'endpoints': [{'entity': 'A', 'cardinality': '1'}, {'entity': 'B', 'cardinality': 'N'}]},
        ]})
        with pytest.raises(BadCardinalitySymbol) as exc:
            ExtractionService.parse_model(document)
        assert exc.value.fragment == 'N'
        assert exc.value.path == 'relationships[0].endpoints[1].cardinality'

    def test_malformed_relation_string(self):
        document = json.dumps({'entities': [{'name': 'A'}], 'relationships': ['A one-to-many B']})
        with pytest.raises(MalformedRelation) as exc:
            ExtractionService.parse_model(document)
        assert exc.value.path == 'relationships[0]'

    def test_unknown_entity_reference(self):
        document = json.dumps({
            'entities': [{'name': 'Hospital'}, {'name': 'Department'}],
            'relationships': ['Hospital 1--* Departmant'],
        })
        with pytest.raises(UnknownEntityReference) as exc:
            ExtractionService.parse_model(document)
        assert exc.value.path == 'relationships[0].endpoints[1]'
        assert exc.value.stage == 'parse'

    def test_cycle_is_invalid(self):
        document = json.dumps({'entities': [{'name': 'A', 'parent': 'B'}, {'name': 'B', 'parent': 'A'}]})
        with pytest.raises(InvalidModel):
            ExtractionService.parse_model(document)


class TestDumpModel:
    def test_dump_then_parse_random_models(self):
        rng = random.Random(11)
        for _ in range(25):
            model = ModelService.canonicalize(random_model(rng, nary_probability=0.3))
            assert ExtractionService.parse_model(ExtractionService.dump_model(model)) == model

    def test_dump_shape(self, load_model):
        data = json.loads(ExtractionService.dump_model(load_model('hospital_triple.json')))
        assert data['format_version'] == '1'
        assert 'Hospital:hospital_id 1--* VisitorAccess' in data['relationships']
        assert 'parent' not in data['entities'][0]

    def test_labeled_binary_keeps_structured_form(self, load_model):
        data = json.loads(ExtractionService.dump_model(load_model('gold_hospital.json')))
        structured = [r for r in data['relationships'] if isinstance(r, dict)]
        assert structured == [{
            'endpoints': [
                {'entity': 'Physician', 'attribute': 'employee_id', 'cardinality': '1'},
                {'entity': 'Resident', 'attribute': 'supervisor_id', 'cardinality': '*'},
            ],
            'label': 'supervises',
        }]

    def test_empty_model(self):
        assert json.loads(ExtractionService.dump_model(ERModel())) == {
            'format_version': '1', 'entities': [], 'relationships': [],
        }


class TestNormalizePipeline:
    def test_fenced_fixture(self):
        raw = f"Here is the model:\n```json\n{MINIMAL}\n```\nHope this helps"
        model, report = ExtractionService.normalize_pipeline(raw)
        assert model == ModelService.canonicalize(model)
        assert len(report.warnings) == 1
        assert 'prose' in report.warnings[0]

    def test_prose_without_braces_fails_at_extract(self):
        with pytest.raises(NoDocumentFound) as exc:
            ExtractionService.normalize_pipeline("I cannot help with that.")
        assert exc.value.stage == 'extract'

    def test_noisy_corpus(self, testdata_dir, noisy_index):
        cases = noisy_index['noisy']
        assert len(cases) >= 20
        for name, case in cases.items():
            raw = (testdata_dir / 'noisy' / name).read_text(encoding='utf-8')
            model, report = ExtractionService.normalize_pipeline(raw)

            assert report.source_kind == SourceKind(case['source_kind']), name
            assert (report.bytes_discarded == 0) == (report.source_kind == SourceKind.PURE_DOCUMENT), name
            assert model == _expected_model(testdata_dir, case['expected']), name
            assert ModelService.validate_model(model) == [], name
            if case.get('repaired'):
                assert any('lenient' in w for w in report.warnings), name

    def test_pure_corpus_documents_pass_through(self, testdata_dir, noisy_index):
        for name, case in noisy_index['noisy'].items():
            if case['source_kind'] != 'PureDocument' or case.get('repaired'):
                continue
            raw = (testdata_dir / 'noisy' / name).read_text(encoding='utf-8')
            document, _ = ExtractionService.extract_document(raw)
            assert document == raw, name

    def test_malformed_corpus(self, testdata_dir, noisy_index):
        for name, case in noisy_index['malformed'].items():
            raw = (testdata_dir / 'noisy_malformed' / name).read_text(encoding='utf-8')
            with pytest.raises(ERRORS[case['error']]) as exc:
                ExtractionService.normalize_pipeline(raw)
            assert exc.value.stage == case['stage'], name
            if 'path' in case:
                assert exc.value.path == case['path'], name
            if 'found' in case:
                assert (exc.value.expected, exc.value.found) == (case['expected'], case['found']), name


class TestBatch:
    def test_batch_over_corpus(self, testdata_dir, tmp_path):
        items = ExtractionService.extract_batch(testdata_dir / 'noisy', tmp_path)
        assert len(items) == 20
        assert all(item.ok for item in items)
        assert len(list(tmp_path.glob('*.json'))) == 20

    def test_batch_reports_failures(self, testdata_dir, tmp_path):
        items = ExtractionService.extract_batch(testdata_dir / 'noisy_malformed', tmp_path)
        assert not any(item.ok for item in items)
        assert items[0].error.startswith('extract:')


def test_cardinality_of_parsed_card_relation():
    model = ExtractionService.parse_model(json.dumps({
        'entities': [
            {'name': 'IdentificationCard', 'attributes': [{'name': 'card_id'}]},
            {'name': 'Visitor', 'attributes': [{'name': 'card_id'}]},
        ],
        'relationships': ['IdentificationCard:card_id ?--1 Visitor:card_id'],
    }))
    assert [e.cardinality for e in model.relationships[0].endpoints] == [
        Cardinality.ZERO_OR_ONE, Cardinality.EXACTLY_ONE,
    ]
