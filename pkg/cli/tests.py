import json
import shutil
from io import StringIO
from unittest.mock import patch

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import OperationalError, connection

from extraction.services.extraction_service import ExtractionService
from harness.models import ExperimentRun

ANALYSIS_FILES = ('findings.json', 'findings.txt', 'level.json', 'diff.json', 'model.dot')


def erpipe(*args):
    out = StringIO()
    call_command('erpipe', *[str(a) for a in args], stdout=out)
    return out.getvalue()


def erpipe_fails(*args):
    out = StringIO()
    with pytest.raises(CommandError) as excinfo:
        call_command('erpipe', *[str(a) for a in args], stdout=out)
    return excinfo.value.returncode, out.getvalue(), str(excinfo.value)


@pytest.fixture
def workspace(tmp_path, samples_dir):
    """A private copy of samples/ so runs write under tmp_path"""
    target = tmp_path / 'samples'
    shutil.copytree(samples_dir, target, ignore=shutil.ignore_patterns('runs'))
    return target


class TestExtract:
    def test_fenced_file(self, testdata_dir, tmp_path):
        output = tmp_path / 'clinic.json'
        printed = erpipe('extract', testdata_dir / 'noisy' / '05_fenced_json.txt', output)
        assert 'source: FencedBlock' in printed
        expected = ExtractionService.load_model_file(testdata_dir / 'noisy_expected' / 'clinic.json')
        assert ExtractionService.load_model_file(output) == expected

    def test_prose_only_exits_2(self, testdata_dir, tmp_path):
        code, _, message = erpipe_fails('extract', testdata_dir / 'noisy_malformed' / 'm01_prose_only.txt',
                                        tmp_path / 'out.json')
        assert code == 2
        assert 'extract' in message
        assert not (tmp_path / 'out.json').exists()

    def test_missing_input_exits_2(self, tmp_path):
        code, _, _ = erpipe_fails('extract', tmp_path / 'absent.txt', tmp_path / 'out.json')
        assert code == 2

    def test_batch_directory(self, testdata_dir, tmp_path):
        printed = erpipe('extract', testdata_dir / 'noisy', tmp_path / 'out')
        assert printed.rstrip().splitlines()[-1] == '20 ok / 0 failed'
        assert len(list((tmp_path / 'out').glob('*.json'))) == 20

    def test_batch_with_failures_exits_2(self, testdata_dir, tmp_path):
        code, printed, _ = erpipe_fails('extract', testdata_dir / 'noisy_malformed', tmp_path / 'out')
        assert code == 2
        assert printed.rstrip().splitlines()[-1] == '0 ok / 7 failed'

    def test_json_output(self, testdata_dir, tmp_path):
        printed = erpipe('extract', testdata_dir / 'noisy' / '05_fenced_json.txt', tmp_path / 'c.json', '--json')
        data = json.loads(printed)
        assert data['report']['source_kind'] == 'FencedBlock'
        assert data['report']['bytes_discarded'] > 0

    @pytest.mark.parametrize('name', ['01_pure_minimal.txt', '05_fenced_json.txt', '10_fenced_trailing_comma.txt'])
    def test_json_matches_human(self, testdata_dir, tmp_path, name):
        source = testdata_dir / 'noisy' / name
        human = erpipe('extract', source, tmp_path / 'human.json')
        report = json.loads(erpipe('extract', source, tmp_path / 'machine.json', '--json'))['report']
        assert f"source: {report['source_kind']} ({report['bytes_discarded']} bytes discarded)" in human
        assert [line[len('warning: '):] for line in human.splitlines() if line.startswith('warning: ')] == \
            report['warnings']

    def test_batch_json_matches_human(self, testdata_dir, tmp_path):
        human = erpipe_fails('extract', testdata_dir / 'noisy_malformed', tmp_path / 'a')[1]
        items = json.loads(erpipe_fails('extract', testdata_dir / 'noisy_malformed', tmp_path / 'b', '--json')[1])
        for item in items:
            assert item['output'] is None
            assert f"failed {item['name']}: {item['error']}" in human

    def test_quiet(self, testdata_dir, tmp_path):
        assert erpipe('extract', testdata_dir / 'noisy' / '05_fenced_json.txt', tmp_path / 'c.json', '--quiet') == ''


class TestLint:
    def test_hospital_triple_warns(self, testdata_dir):
        printed = erpipe('lint', testdata_dir / 'hospital_triple.json')
        assert 'transitive-redundancy' in printed
        assert printed.rstrip().splitlines()[-1] == 'level: L2'

    def test_error_finding_exits_1(self, testdata_dir):
        code, printed, _ = erpipe_fails('lint', testdata_dir / 'duplicate_attribute.json')
        assert code == 1
        assert 'duplicate-attribute' in printed

    def test_empty_model_is_l0(self, testdata_dir):
        assert 'level: L0' in erpipe('lint', testdata_dir / 'empty.json')

    def test_invalid_model_exits_2(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{"entities": [{"name": "A"}], "relationships": ["A:id 1--* Ghost"]}', encoding='utf-8')
        code, _, _ = erpipe_fails('lint', path)
        assert code == 2

    def test_json_matches_human(self, testdata_dir):
        human = erpipe('lint', testdata_dir / 'hospital_triple.json')
        data = json.loads(erpipe('lint', testdata_dir / 'hospital_triple.json', '--json'))
        assert data['level']['level'] == 'L2'
        for finding in data['findings']:
            assert f"{finding['rule_id']} {finding['location']}: {finding['message']}" in human

    def test_checklist(self, testdata_dir):
        printed = erpipe('lint', testdata_dir / 'gold_hospital.json', '--checklist')
        assert '[     pass]' in printed
        assert '[reference]' in printed

    def test_config_disables_rule(self, testdata_dir, tmp_path):
        ini = tmp_path / 'erpipe.ini'
        ini.write_text('[settings]\nENABLED_RULES=missing-constraints\n', encoding='utf-8')
        printed = erpipe('lint', testdata_dir / 'hospital_triple.json', '--config', ini)
        assert 'transitive-redundancy' not in printed

    def test_unknown_rule_exits_2(self, testdata_dir, tmp_path):
        ini = tmp_path / 'erpipe.ini'
        ini.write_text('[settings]\nENABLED_RULES=no-such-rule\n', encoding='utf-8')
        code, _, _ = erpipe_fails('lint', testdata_dir / 'hospital_triple.json', '--config', ini)
        assert code == 2

    def test_idempotent(self, testdata_dir):
        path = testdata_dir / 'merged_employee.json'
        assert erpipe('lint', path) == erpipe('lint', path)


class TestDiff:
    def test_identity(self, testdata_dir):
        data = json.loads(erpipe('diff', testdata_dir / 'gold_hospital.json', testdata_dir / 'gold_hospital.json',
                                 '--json'))
        assert data['overall_f1'] == 1.0
        assert all(row['f1'] == 1.0 for row in data['classes'])

    def test_missing_relationship(self, testdata_dir):
        printed = erpipe('diff', testdata_dir / 'merged_employee.json', testdata_dir / 'gold_hospital.json')
        assert 'missing relationships:' in printed
        assert 'supervises' in printed

    def test_empty_against_gold(self, testdata_dir):
        data = json.loads(erpipe('diff', testdata_dir / 'empty.json', testdata_dir / 'gold_hospital.json', '--json'))
        assert data['overall_recall'] == 0.0

    @pytest.mark.parametrize('generated', ['merged_employee.json', 'hospital_triple.json'])
    def test_json_matches_human(self, testdata_dir, generated):
        args = (testdata_dir / generated, testdata_dir / 'gold_hospital.json')
        human = erpipe('diff', *args)
        data = json.loads(erpipe('diff', *args, '--json'))

        rows = {line.split()[0]: line.split()[1:] for line in human.splitlines() if line.strip()}
        for row in data['classes']:
            cells = rows[row['element_class']]
            assert [int(c) for c in cells[:3]] == [row['matched'], row['missing'], row['surplus']]
            assert [float(c) for c in cells[3:6]] == pytest.approx(
                [row['precision'], row['recall'], row['f1']], abs=5e-4)
            for label in ('missing', 'surplus'):
                names = row[f"{label}_names"]
                if names:
                    assert f"{label} {row['element_class']}: {', '.join(names)}" in human
        assert float(rows['overall'][5]) == pytest.approx(data['overall_f1'], abs=5e-4)
        for pair in data['mapping']['overlap_pairs']:
            assert f"{pair['generated']} ~ {pair['gold']} ({pair['score']:.2f})" in human

    def test_unreadable_input_exits_2(self, testdata_dir, tmp_path):
        code, _, _ = erpipe_fails('diff', tmp_path / 'absent.json', testdata_dir / 'gold_hospital.json')
        assert code == 2


class TestRender:
    def test_dot_matches_golden(self, testdata_dir, tmp_path):
        output = tmp_path / 'triple.dot'
        erpipe('render', testdata_dir / 'hospital_triple.json', output, '--format', 'dot')
        assert output.read_bytes() == (testdata_dir / 'golden' / 'hospital_triple.dot').read_bytes()

    def test_png_without_renderer_exits_2(self, testdata_dir, tmp_path):
        ini = tmp_path / 'erpipe.ini'
        ini.write_text('[settings]\nRENDERER_PATH=/nonexistent/dot\n', encoding='utf-8')
        code, _, message = erpipe_fails('render', testdata_dir / 'hospital_triple.json', tmp_path / 'out.png',
                                        '--format', 'png', '--config', ini)
        assert code == 2
        assert '/nonexistent/dot' in message
        assert not (tmp_path / 'out.png').exists()

    def test_plain_without_title(self, testdata_dir, tmp_path):
        output = tmp_path / 'plain.dot'
        erpipe('render', testdata_dir / 'hospital_triple.json', output, '--plain', '--no-title')
        source = output.read_text(encoding='utf-8')
        assert 'shape=box' in source
        assert 'labelloc' not in source


@pytest.mark.django_db
class TestRun:
    def test_replay_matrix_with_analysis(self, workspace):
        printed = erpipe('run', workspace / 'experiment.json', '--analyze')
        record_dirs = sorted((workspace / 'runs').glob('*/*/*'))
        assert len(record_dirs) == 9
        for record_dir in record_dirs:
            with_gold = record_dir.parts[-3] == 'hospital_access'
            for name in ANALYSIS_FILES:
                expected = with_gold or name != 'diff.json'
                assert (record_dir / name).exists() == expected, f"{record_dir}/{name}"
            assert (record_dir / 'gold.json').exists() == with_gold
        assert 'hospital_access' in printed
        assert ExperimentRun.objects.get().ok_records == 9

    def test_rerun_is_byte_identical(self, workspace):
        erpipe('run', workspace / 'experiment.json', '--analyze', '--quiet')
        first = {p: p.read_bytes() for p in (workspace / 'runs').rglob('*') if p.name in ANALYSIS_FILES}
        erpipe('run', workspace / 'experiment.json', '--analyze', '--quiet')
        second = {p: p.read_bytes() for p in (workspace / 'runs').rglob('*') if p.name in ANALYSIS_FILES}
        # diff.json only where the scenario has a gold model
        assert len(first) == 9 * 4 + 3
        assert first == second

    def test_json_output(self, workspace):
        records = json.loads(erpipe('run', workspace / 'experiment.json', '--json', '--analyze'))
        assert len(records) == 9
        assert {r['outcome'] for r in records} == {'ok'}
        assert {r['strategy'] for r in records} == {'baseline', 'cot', 'cot_verifier'}
        scored = {r['scenario_id'] for r in records if r['analysis']['overall_f1'] is not None}
        assert scored == {'hospital_access'}

    def test_missing_credentials_exit_3(self, workspace, monkeypatch):
        monkeypatch.delenv('ER_TEST_UNSET_KEY', raising=False)
        config = workspace / 'llm.json'
        config.write_text(json.dumps({
            'scenarios': ['scenarios/hospital_access.txt'],
            'strategies': ['baseline'],
            'providers': [{'id': 'llm', 'kind': 'openai', 'model': 'm', 'credential_env': 'ER_TEST_UNSET_KEY'}],
        }), encoding='utf-8')
        code, _, _ = erpipe_fails('run', config)
        assert code == 3

    def test_provider_error_records_exit_3(self, workspace):
        (workspace / 'replay' / 'fallback.txt').unlink()
        code, _, _ = erpipe_fails('run', workspace / 'experiment.json', '--quiet')
        assert code == 3
        record = json.loads((workspace / 'runs' / 'hospital_access' / 'baseline' / 'replay' / 'record.json')
                            .read_text(encoding='utf-8'))
        assert record['outcome'] == 'provider_error'

    def test_unreadable_canned_response_fails_only_its_cells(self, workspace):
        good = workspace / 'replay_good'
        shutil.copytree(workspace / 'replay', good)
        (workspace / 'replay' / 'fallback.txt').write_bytes(b'\xff\xfe not utf-8 \xff')
        config = workspace / 'two.json'
        config.write_text(json.dumps({
            'scenarios': ['scenarios/hospital_access.txt'],
            'strategies': ['baseline'],
            'providers': [
                {'id': 'broken', 'kind': 'replay', 'replay_dir': 'replay'},
                {'id': 'good', 'kind': 'replay', 'replay_dir': 'replay_good'},
            ],
        }), encoding='utf-8')
        code, _, _ = erpipe_fails('run', config, '--quiet')
        assert code == 3
        outcomes = {
            provider: json.loads((workspace / 'runs' / 'hospital_access' / 'baseline' / provider / 'record.json')
                                 .read_text(encoding='utf-8'))['outcome']
            for provider in ('broken', 'good')
        }
        assert outcomes == {'broken': 'provider_error', 'good': 'ok'}

    def test_invalid_config_exits_2(self, workspace):
        config = workspace / 'broken.json'
        config.write_text('{"scenarios": []}', encoding='utf-8')
        code, _, message = erpipe_fails('run', config)
        assert code == 2
        assert 'scenarios' in message

    def test_colliding_provider_directories_exit_2(self, workspace):
        config = workspace / 'clash.json'
        config.write_text(json.dumps({
            'scenarios': ['scenarios/hospital_access.txt'],
            'strategies': ['baseline'],
            'providers': [
                {'id': 'gpt-5.1', 'kind': 'replay', 'replay_dir': 'replay'},
                {'id': 'gpt-51', 'kind': 'replay', 'replay_dir': 'replay'},
            ],
        }), encoding='utf-8')
        code, _, message = erpipe_fails('run', config)
        assert code == 2
        assert 'gpt-5.1, gpt-51' in message
        assert not (workspace / 'runs').exists()

    def test_fresh_database_is_migrated(self, workspace, monkeypatch):
        monkeypatch.setattr(connection.introspection, 'table_names', lambda *args, **kwargs: [])
        with patch('harness.services.experiment_service.call_command') as migrate:
            erpipe('run', workspace / 'experiment.json', '--quiet')
        migrate.assert_called_once_with('migrate', interactive=False, verbosity=0)

    def test_migrated_database_is_left_alone(self, workspace):
        with patch('harness.services.experiment_service.call_command') as migrate:
            erpipe('run', workspace / 'experiment.json', '--quiet')
        migrate.assert_not_called()

    def test_unusable_database_exits_2(self, workspace):
        failure = OperationalError('unable to open database file')
        with patch('harness.services.experiment_service.ExperimentService.ensure_history_tables',
                   side_effect=failure):
            code, _, message = erpipe_fails('run', workspace / 'experiment.json', '--quiet')
        assert code == 2
        assert 'unable to open database file' in message


@pytest.mark.django_db
class TestHistory:
    def test_empty(self):
        assert erpipe('history').strip() == 'no runs recorded'
        assert json.loads(erpipe('history', '--json')) == []

    def test_lists_runs_with_records(self, workspace):
        erpipe('run', workspace / 'experiment.json', '--analyze', '--quiet')
        printed = erpipe('history')
        assert 'COMPLETED' in printed
        assert '9/9 ok' in printed

        [run] = json.loads(erpipe('history', '--json'))
        assert run['id'] == str(ExperimentRun.objects.get().id)
        assert run['status'] == 'COMPLETED'
        assert run['analyzed'] is True
        assert len(run['records']) == 9
        levels = {record['scenario_id']: record['overall_f1'] for record in run['records']}
        assert levels['outpatient_clinic'] is None
        assert levels['hospital_access'] is not None

    def test_limit(self, workspace):
        erpipe('run', workspace / 'experiment.json', '--quiet')
        erpipe('run', workspace / 'experiment.json', '--quiet')
        assert len(json.loads(erpipe('history', '--json', '--limit', 1))) == 1
        assert len(json.loads(erpipe('history', '--json'))) == 2
