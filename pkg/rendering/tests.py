import random
import re
import shutil
import subprocess
from unittest.mock import patch

import pytest

from ermodel.domain import Attribute, Cardinality, ERModel, Endpoint, Entity, Relationship
from ermodel.exceptions import InvalidModel
from ermodel.factories import random_model
from ermodel.services.relation_service import RelationService
from rendering.domain import RecordStyle, RenderOptions
from rendering.exceptions import RendererFailed, RendererUnavailable
from rendering.services.render_service import RenderService

ID = r'"(?:[^"\\]|\\.)*"|[^\s\[\]"]+'
STATEMENT = re.compile(rf'^\t(?P<tail>{ID})(?: -> (?P<head>{ID}))?(?: \[.*\])?$')

HAS_RENDERER = shutil.which('dot') is not None


def _statements(source):
    """(nodes, edges) declared in DOT emitted by RenderService"""
    nodes, edges = [], []
    for line in source.splitlines()[1:-1]:
        match = STATEMENT.match(line)
        assert match, line
        tail, head = match.group('tail'), match.group('head')
        if head is not None:
            edges.append((tail, head))
        elif tail not in ('graph', 'node', 'edge'):
            nodes.append(tail)
    return nodes, edges


def _assert_balanced(source):
    braces, angle, in_quote, previous = 0, 0, False, ''
    for ch in source:
        if in_quote:
            if ch == '"' and previous != '\\':
                in_quote = False
        elif angle:
            angle += {'<': 1, '>': -1}.get(ch, 0)
        elif ch == '"':
            in_quote = True
        elif ch == '<':
            angle = 1
        elif ch in '{}':
            braces += 1 if ch == '{' else -1
            assert braces >= 0
        previous = ch
    assert (braces, angle, in_quote) == (0, 0, False)


def _rel(text, label=None):
    relationship = RelationService.parse_relation(text)
    return Relationship(endpoints=relationship.endpoints, label=label)


class TestEmitDot:
    def test_single_entity(self):
        model = ERModel(entities=(Entity('A', (Attribute('id', is_primary_key=True),)),))
        source = RenderService.emit_dot(model)
        nodes, edges = _statements(source)
        assert nodes == ['A']
        assert edges == []
        assert '<U>id</U>' in source

    def test_hospital_triple(self, load_model):
        source = RenderService.emit_dot(load_model('hospital_triple.json'))
        nodes, edges = _statements(source)
        assert nodes == ['Hospital', 'HospitalDepartment', 'VisitorAccess']
        assert len(edges) == 3
        assert source.count('taillabel=1 ') == 3
        assert source.count('headlabel="*"') == 3

    def test_golden_file(self, load_model, testdata_dir):
        golden = (testdata_dir / 'golden' / 'hospital_triple.dot').read_text(encoding='utf-8')
        assert RenderService.emit_dot(load_model('hospital_triple.json')) == golden

    def test_empty_model(self):
        source = RenderService.emit_dot(ERModel())
        _assert_balanced(source)
        assert _statements(source) == ([], [])

    def test_plain_nodes(self):
        model = ERModel(entities=(
            Entity('Base', (Attribute('id', is_primary_key=True),)),
            Entity('Child', (Attribute('base_id', is_foreign_key=True),), parent='Base'),
        ))
        source = RenderService.emit_dot(model, RenderOptions(record_style=RecordStyle.PLAIN_NODES))
        assert 'shape=box' in source
        assert 'Base [label="Base\\nPK id"]' in source
        assert 'Child [label="Child\\nis a Base\\nbase_id (FK)"]' in source

    def test_title_hidden(self, load_model):
        model = load_model('hospital_triple.json')
        source = RenderService.emit_dot(model, RenderOptions(title_visible=False))
        assert model.title not in source
        assert 'graph [rankdir=LR]' in source

    def test_relationship_label_and_kind(self):
        model = ERModel(
            entities=(Entity('Physician', (Attribute('id'),)), Entity('Resident', (Attribute('id'),))),
            relationships=(_rel('Physician:id 1--* Resident:id', label='supervises'),),
        )
        source = RenderService.emit_dot(model)
        assert 'Physician -> Resident [label=supervises' in source
        assert 'tooltip="1:N"' in source

    def test_nary_relationship_uses_diamond(self):
        entities = tuple(Entity(name, (Attribute('id'),)) for name in ('Nurse', 'Patient', 'Ward'))
        nary = Relationship(
            endpoints=tuple(Endpoint(e.name, 'id', Cardinality.ZERO_OR_MORE) for e in entities),
            label='rounds',
        )
        source = RenderService.emit_dot(ERModel(entities=entities, relationships=(nary,)))
        nodes, edges = _statements(source)
        assert nodes == ['Nurse', 'Patient', 'Ward', '"relationship 0"']
        assert edges == [('"relationship 0"', name) for name in ('Nurse', 'Patient', 'Ward')]
        assert 'shape=diamond' in source
        assert 'tooltip=N-ary' not in source and 'tooltip="N-ary"' in source

    def test_escapes_html(self):
        model = ERModel(entities=(Entity('A', (Attribute('id', declared_type='varchar<20>'),)),))
        assert 'varchar&lt;20&gt;' in RenderService.emit_dot(model)

    def test_invalid_model(self):
        model = ERModel(
            entities=(Entity('A', (Attribute('id'),)),),
            relationships=(_rel('A:id 1--* Missing'),),
        )
        with pytest.raises(InvalidModel):
            RenderService.emit_dot(model)

    def test_random_models_emit_valid_dot(self):
        rng = random.Random(5)
        for _ in range(100):
            model = random_model(rng, nary_probability=0.2)
            source = RenderService.emit_dot(model, RenderOptions(record_style=rng.choice(list(RecordStyle))))
            _assert_balanced(source)
            nodes, edges = _statements(source)
            declared = set(nodes)
            assert all(tail in declared and head in declared for tail, head in edges)

            nary = [r for r in model.relationships if not r.is_binary]
            assert len(nodes) == len(model.entities) + len(nary)
            assert len(edges) == (len(model.relationships) - len(nary)) + sum(len(r.endpoints) for r in nary)

    def test_odd_names_emit_valid_dot(self):
        names = ['Weird"Name', 'a;b', '{x}', 'Pátient', '1st', 'A=B', '[x]', 'node', 'x-y']
        entities = tuple(Entity(name, (Attribute('id', is_primary_key=True),)) for name in names)
        relationships = (
            Relationship(endpoints=(Endpoint(names[0], 'id', Cardinality.EXACTLY_ONE),
                                    Endpoint(names[1], 'id', Cardinality.ZERO_OR_MORE)), label='has "many"'),
            Relationship(endpoints=tuple(Endpoint(name, 'id', Cardinality.ONE_OR_MORE) for name in names[2:5]),
                         label='<b>joins</b>'),
            Relationship(endpoints=(Endpoint(names[5], 'id', Cardinality.ZERO_OR_ONE),
                                    Endpoint(names[6], 'id', Cardinality.EXACTLY_ONE))),
        )
        model = ERModel(entities=entities, relationships=relationships, title='Ward "A" <main> \\ annex')
        for style in RecordStyle:
            source = RenderService.emit_dot(model, RenderOptions(record_style=style))
            _assert_balanced(source)
            nodes, edges = _statements(source)
            assert len(nodes) == len(names) + 1
            assert all(tail in set(nodes) and head in set(nodes) for tail, head in edges)
            assert len(edges) == 2 + 3

    def test_free_text_labels_are_never_html(self):
        model = ERModel(
            entities=(Entity('A', (Attribute('id'),)), Entity('B', (Attribute('id'),))),
            relationships=(_rel('A:id 1--* B:id', label='<owns>'),),
            title='<b>Ward</b> \\ annex',
        )
        source = RenderService.emit_dot(model)
        assert 'label="<owns>"' in source
        assert 'label="<b>Ward</b> \\\\ annex"' in source

    def test_deterministic(self, load_model):
        model = load_model('gold_hospital.json')
        assert RenderService.emit_dot(model) == RenderService.emit_dot(model)


class TestRenderExternal:
    def test_dot_format_needs_no_renderer(self):
        assert RenderService.render_external('digraph {}\n', 'dot', 'no-such-renderer') == b'digraph {}\n'

    def test_missing_executable(self):
        with pytest.raises(RendererUnavailable):
            RenderService.render_external('digraph {}\n', 'png', 'no-such-renderer-on-path')

    def test_failure_keeps_diagnostics(self):
        failed = subprocess.CompletedProcess(['dot', '-Tsvg'], 1, b'', b'Error: syntax error in line 1\n')
        with patch('rendering.services.render_service.shutil.which', return_value='/usr/bin/dot'), \
                patch('rendering.services.render_service.subprocess.run', return_value=failed) as run:
            with pytest.raises(RendererFailed) as excinfo:
                RenderService.render_external('digraph {', 'svg', 'dot')
        assert excinfo.value.returncode == 1
        assert 'syntax error' in excinfo.value.diagnostics
        assert run.call_args.args[0] == ['/usr/bin/dot', '-Tsvg']

    def test_timeout(self):
        with patch('rendering.services.render_service.shutil.which', return_value='/usr/bin/dot'), \
                patch('rendering.services.render_service.subprocess.run',
                      side_effect=subprocess.TimeoutExpired('dot', 1)):
            with pytest.raises(RendererFailed) as excinfo:
                RenderService.render_external('digraph {}', 'png', 'dot', timeout=1)
        assert excinfo.value.returncode is None

    def test_success_returns_output(self):
        done = subprocess.CompletedProcess(['dot', '-Tpng'], 0, b'\x89PNG...', b'')
        with patch('rendering.services.render_service.shutil.which', return_value='/usr/bin/dot'), \
                patch('rendering.services.render_service.subprocess.run', return_value=done):
            assert RenderService.render_external('digraph {}', 'png', 'dot') == b'\x89PNG...'

    @pytest.mark.skipif(not HAS_RENDERER, reason="Graphviz dot is not installed")
    def test_real_renderer(self, load_model):
        rng = random.Random(6)
        for _ in range(10):
            output = RenderService.render_external(RenderService.emit_dot(random_model(rng)), 'svg', 'dot')
            assert b'<svg' in output
        assert RenderService.render_external(RenderService.emit_dot(load_model('gold_hospital.json')), 'png', 'dot')

    @pytest.mark.skipif(not HAS_RENDERER, reason="Graphviz dot is not installed")
    def test_real_renderer_rejects_malformed_dot(self):
        with pytest.raises(RendererFailed) as excinfo:
            RenderService.render_external('digraph { A -> ', 'svg', 'dot')
        assert excinfo.value.diagnostics
