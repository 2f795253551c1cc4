import json
import shutil
from types import SimpleNamespace

import httpx
import openai
import pytest

from er_modeling.toolconfig import load_tool_config
from extraction.services.extraction_service import ExtractionService
from harness.domain import (
    STAGE_1_PLACEHOLDER, ExperimentConfig, Outcome, PromptStrategy, ProviderKind, ProviderSpec, Scenario,
)
from harness.exceptions import ConfigError, EmptyRequirements, ProviderError
from harness.models import ExperimentRecordEntry, ExperimentRun
from harness.prompts import STEP_BY_STEP_MARKER, build_prompt
from harness.providers import ChatProvider, OpenAIChatProvider, ReplayProvider, build_provider, prompt_hash
from harness.services.experiment_service import ExperimentService

REQUIREMENTS = "Each hospital has departments. Visitors access departments."

PROSE = "I could not design a model for these requirements, sorry."

ANALYSIS_FILES = ('findings.json', 'findings.txt', 'level.json', 'diff.json', 'model.dot')


@pytest.fixture
def model_answer(samples_dir):
    return (samples_dir / 'replay' / 'fallback.txt').read_text(encoding='utf-8')


@pytest.fixture
def gold(samples_dir):
    return ExtractionService.load_model_file(samples_dir / 'gold' / 'hospital_access.json')


def _replay_dir(path, fallback=None, canned=None):
    path.mkdir(parents=True, exist_ok=True)
    if fallback is not None:
        (path / 'fallback.txt').write_text(fallback, encoding='utf-8')
    for key, text in (canned or {}).items():
        (path / f"{key}.txt").write_text(text, encoding='utf-8')
    return path


def _replay_spec(provider_id, replay_dir):
    return ProviderSpec(provider_id=provider_id, kind=ProviderKind.REPLAY, replay_dir=replay_dir)


def _config(tmp_path, providers, strategies=tuple(PromptStrategy), scenarios=('hospital',), gold=None):
    return ExperimentConfig(
        scenarios=tuple(Scenario(s, tmp_path / f"{s}.txt", REQUIREMENTS, gold) for s in scenarios),
        strategies=tuple(strategies),
        providers=tuple(providers),
        output_root=tmp_path / 'runs',
        parallelism=2,
    )


def _read(path):
    return json.loads(path.read_text(encoding='utf-8'))


class _StubCompletions:
    """chat.completions stand-in that raises or answers from a script"""

    def __init__(self, script):
        self.script = list(script)
        self.calls = 0

    def create(self, **kwargs):
        self.calls += 1
        step = self.script.pop(0)
        if isinstance(step, Exception):
            raise step
        message = SimpleNamespace(content=step)
        return SimpleNamespace(choices=[SimpleNamespace(message=message)])


def _stub_client(*script):
    completions = _StubCompletions(script)
    return SimpleNamespace(chat=SimpleNamespace(completions=completions)), completions


def _connection_error():
    return openai.APIConnectionError(request=httpx.Request('POST', 'http://llm.test/v1/chat/completions'))


class _FailingProvider(ChatProvider):
    def send(self, messages):
        raise ProviderError(self.provider_id, "connection reset", retries=2)


class _BrokenProvider(ChatProvider):
    def send(self, messages):
        return [][0]


class TestPrompts:
    def test_baseline_single_stage(self):
        bundle = build_prompt('baseline', REQUIREMENTS)
        assert len(bundle.stages) == 1
        roles = [m['role'] for m in bundle.stage_messages(0)]
        assert roles == ['system', 'user']
        user = bundle.stage_messages(0)[1]['content']
        assert REQUIREMENTS in user
        assert STEP_BY_STEP_MARKER not in user

    def test_chain_of_thought_carries_marker(self):
        bundle = build_prompt(PromptStrategy.CHAIN_OF_THOUGHT, REQUIREMENTS)
        assert len(bundle.stages) == 1
        assert STEP_BY_STEP_MARKER in bundle.stage_messages(0)[1]['content']

    def test_verifier_has_second_stage_with_slot(self):
        bundle = build_prompt('cot_verifier', REQUIREMENTS)
        assert len(bundle.stages) == 2
        assert STAGE_1_PLACEHOLDER in bundle.stages[1][1].content
        filled = bundle.stage_messages(1, 'FIRST DRAFT')[1]['content']
        assert 'FIRST DRAFT' in filled
        assert STAGE_1_PLACEHOLDER not in filled
        assert REQUIREMENTS in filled

    def test_format_spec_override(self):
        bundle = build_prompt('baseline', REQUIREMENTS, format_spec='Answer in the house format.')
        assert 'Answer in the house format.' in bundle.stage_messages(0)[1]['content']

    @pytest.mark.parametrize('requirements', ['', '   \n\t'])
    def test_empty_requirements(self, requirements):
        with pytest.raises(EmptyRequirements):
            build_prompt('baseline', requirements)

    def test_prompts_are_stable(self):
        first = build_prompt('cot_verifier', REQUIREMENTS).as_dict()
        assert first == build_prompt('cot_verifier', REQUIREMENTS).as_dict()
        assert first['template_version'] == '1'


class TestReplayProvider:
    def test_hashed_response_wins(self, tmp_path):
        messages = build_prompt('baseline', REQUIREMENTS).stage_messages(0)
        replay = _replay_dir(tmp_path / 'replay', fallback='fallback', canned={prompt_hash(messages): 'exact'})
        provider = ReplayProvider(_replay_spec('r', replay))
        assert provider.send(messages) == 'exact'

    def test_fallback_when_unknown(self, tmp_path):
        replay = _replay_dir(tmp_path / 'replay', fallback='fallback')
        provider = ReplayProvider(_replay_spec('r', replay))
        assert provider.send([{'role': 'user', 'content': 'anything'}]) == 'fallback'

    def test_no_response_available(self, tmp_path):
        provider = ReplayProvider(_replay_spec('r', _replay_dir(tmp_path / 'replay')))
        with pytest.raises(ProviderError):
            provider.send([{'role': 'user', 'content': 'anything'}])

    def test_undecodable_response(self, tmp_path):
        replay = _replay_dir(tmp_path / 'replay')
        (replay / 'fallback.txt').write_bytes(b'\xff\xfe{"entities": []}')
        provider = ReplayProvider(_replay_spec('r', replay))
        with pytest.raises(ProviderError) as excinfo:
            provider.send([{'role': 'user', 'content': 'anything'}])
        assert 'fallback.txt' in str(excinfo.value)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(ProviderError):
            build_provider(_replay_spec('r', tmp_path / 'absent'))

    def test_hash_ignores_key_order(self):
        assert prompt_hash([{'role': 'user', 'content': 'x'}]) == prompt_hash([{'content': 'x', 'role': 'user'}])


class TestOpenAIProvider:
    SPEC = ProviderSpec(provider_id='llm', kind=ProviderKind.OPENAI, model='test-model', max_retries=2)

    def test_answer(self):
        client, completions = _stub_client('hello')
        provider = OpenAIChatProvider(self.SPEC, client=client, retry_backoff=0)
        assert provider.send([{'role': 'user', 'content': 'hi'}]) == 'hello'
        assert completions.calls == 1

    def test_retries_transient_errors(self):
        client, completions = _stub_client(_connection_error(), 'recovered')
        provider = OpenAIChatProvider(self.SPEC, client=client, retry_backoff=0)
        assert provider.send([{'role': 'user', 'content': 'hi'}]) == 'recovered'
        assert completions.calls == 2

    def test_gives_up_after_max_retries(self):
        client, completions = _stub_client(*[_connection_error() for _ in range(3)])
        provider = OpenAIChatProvider(self.SPEC, client=client, retry_backoff=0)
        with pytest.raises(ProviderError) as excinfo:
            provider.send([{'role': 'user', 'content': 'hi'}])
        assert excinfo.value.retries == 2
        assert completions.calls == 3

    def test_empty_choices(self):
        completions = SimpleNamespace(create=lambda **kwargs: SimpleNamespace(choices=[]))
        client = SimpleNamespace(chat=SimpleNamespace(completions=completions))
        provider = OpenAIChatProvider(self.SPEC, client=client, retry_backoff=0)
        with pytest.raises(ProviderError) as excinfo:
            provider.send([{'role': 'user', 'content': 'hi'}])
        assert 'no choices' in str(excinfo.value)

    def test_authentication_error_is_not_retried(self):
        request = httpx.Request('POST', 'http://llm.test/v1/chat/completions')
        error = openai.AuthenticationError('bad key', response=httpx.Response(401, request=request), body=None)
        client, completions = _stub_client(error, 'unreachable')
        provider = OpenAIChatProvider(self.SPEC, client=client, retry_backoff=0)
        with pytest.raises(ProviderError):
            provider.send([{'role': 'user', 'content': 'hi'}])
        assert completions.calls == 1

    def test_missing_credential(self, monkeypatch):
        monkeypatch.delenv('ER_TEST_UNSET_KEY', raising=False)
        spec = ProviderSpec(provider_id='llm', kind=ProviderKind.OPENAI, model='m', credential_env='ER_TEST_UNSET_KEY')
        with pytest.raises(ProviderError):
            build_provider(spec)


class TestLoadConfig:
    def test_sample_config(self, samples_dir):
        config = ExperimentService.load_config(samples_dir / 'experiment.json')
        assert [s.scenario_id for s in config.scenarios] == [
            'hospital_access', 'outpatient_clinic', 'university_library',
        ]
        assert config.strategies == (
            PromptStrategy.BASELINE, PromptStrategy.CHAIN_OF_THOUGHT, PromptStrategy.COT_VERIFIER,
        )
        assert config.providers[0].replay_dir == samples_dir.resolve() / 'replay'
        assert config.output_root == samples_dir.resolve() / 'runs'
        assert config.parallelism == 2
        assert [s.gold is not None for s in config.scenarios] == [True, False, False]
        assert config.cell_count == 9

    def _write(self, tmp_path, data):
        path = tmp_path / 'experiment.json'
        path.write_text(json.dumps(data), encoding='utf-8')
        (tmp_path / 'a.txt').write_text(REQUIREMENTS, encoding='utf-8')
        return path

    def _valid(self):
        return {
            'scenarios': ['a.txt'],
            'strategies': ['baseline'],
            'providers': [{'id': 'r', 'kind': 'replay', 'replay_dir': 'replay'}],
        }

    def test_defaults(self, tmp_path, settings):
        settings.ER_DEFAULT_PARALLELISM = 3
        config = ExperimentService.load_config(self._write(tmp_path, self._valid()))
        assert config.parallelism == 3
        assert config.scenarios[0].gold is None
        assert config.output_root == tmp_path.resolve() / 'runs'

    @pytest.mark.parametrize('mutate,path', [
        (lambda d: d.pop('strategies'), 'strategies'),
        (lambda d: d.update(strategies=['few-shot']), 'strategies[0]'),
        (lambda d: d['providers'][0].update(kind='openai'), 'providers[0].model'),
        (lambda d: d['providers'][0].pop('replay_dir'), 'providers[0].replay_dir'),
        (lambda d: d.update(providers=[]), 'providers'),
        (lambda d: d.update(parallelism=0), 'parallelism'),
        (lambda d: d.update(scenarios=['missing.txt']), 'scenarios[0]'),
        (lambda d: d.update(gold='missing.json'), 'gold'),
        (lambda d: d.update(scenarios=[{'path': 'a.txt', 'gold': 'missing.json'}]), 'scenarios[0].gold'),
        (lambda d: d.update(scenarios=[{'gold': 'g.json'}]), 'scenarios[0].path'),
        (lambda d: d.update(scenarios=[7]), 'scenarios[0]'),
    ])
    def test_invalid_field(self, tmp_path, mutate, path):
        data = self._valid()
        mutate(data)
        with pytest.raises(ConfigError) as excinfo:
            ExperimentService.load_config(self._write(tmp_path, data))
        assert excinfo.value.path == path

    def test_duplicate_provider_ids(self, tmp_path):
        data = self._valid()
        data['providers'].append(dict(data['providers'][0]))
        with pytest.raises(ConfigError) as excinfo:
            ExperimentService.load_config(self._write(tmp_path, data))
        assert 'duplicate provider ids' in str(excinfo.value)

    def test_provider_ids_sharing_a_directory(self, tmp_path):
        data = self._valid()
        data['providers'] = [
            {'id': 'gpt-5.1', 'kind': 'replay', 'replay_dir': 'replay'},
            {'id': 'gpt-51', 'kind': 'replay', 'replay_dir': 'replay'},
        ]
        with pytest.raises(ConfigError) as excinfo:
            ExperimentService.load_config(self._write(tmp_path, data))
        assert excinfo.value.path == 'providers'
        assert 'gpt-5.1, gpt-51' in str(excinfo.value)

    def test_scenario_gold_overrides_default(self, tmp_path, samples_dir):
        shutil.copy(samples_dir / 'gold' / 'hospital_access.json', tmp_path / 'hospital.json')
        (tmp_path / 'small.json').write_text(
            '{"format_version": "1", "entities": [{"name": "Ward", "attributes": [{"name": "id"}]}], '
            '"relationships": []}',
            encoding='utf-8',
        )
        (tmp_path / 'b.txt').write_text(REQUIREMENTS, encoding='utf-8')
        data = self._valid()
        data['gold'] = 'hospital.json'
        data['scenarios'] = ['a.txt', {'path': 'b.txt', 'gold': 'small.json'}]
        config = ExperimentService.load_config(self._write(tmp_path, data))

        hospital = ExtractionService.load_model_file(tmp_path / 'hospital.json')
        assert config.scenarios[0].gold == hospital
        assert [e.name for e in config.scenarios[1].gold.entities] == ['Ward']

    def test_not_json(self, tmp_path):
        path = tmp_path / 'experiment.json'
        path.write_text('{"scenarios": [', encoding='utf-8')
        with pytest.raises(ConfigError):
            ExperimentService.load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentService.load_config(tmp_path / 'absent.json')


@pytest.mark.django_db
class TestRunExperiment:
    def test_three_strategies_ok(self, tmp_path, model_answer):
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer)
        records = ExperimentService.run_experiment(_config(tmp_path, [_replay_spec('replay', replay)]))

        assert [r.outcome for r in records] == [Outcome.OK] * 3
        for record in records:
            assert record.record_dir == tmp_path / 'runs' / 'hospital' / record.strategy.value / 'replay'
            assert (record.record_dir / 'raw_1.txt').read_text(encoding='utf-8') == model_answer
            assert (record.record_dir / 'model.json').exists()
            assert (record.record_dir / 'prompts.json').exists()
            meta = _read(record.record_dir / 'record.json')
            assert meta['outcome'] == 'ok'
            assert meta['extraction']['source_kind'] == 'FencedBlock'

        verifier = records[2]
        assert verifier.strategy == PromptStrategy.COT_VERIFIER
        assert (verifier.record_dir / 'raw_2.txt').exists()
        assert len(verifier.timestamps) == 2
        assert not (records[0].record_dir / 'raw_2.txt').exists()

    def test_prose_only_answer_keeps_raw_output(self, tmp_path):
        replay = _replay_dir(tmp_path / 'replay', fallback=PROSE)
        [record] = ExperimentService.run_experiment(
            _config(tmp_path, [_replay_spec('replay', replay)], strategies=[PromptStrategy.BASELINE]),
        )
        assert record.outcome == Outcome.EXTRACTION_FAILED
        assert (record.record_dir / 'raw_1.txt').read_text(encoding='utf-8') == PROSE
        error = _read(record.record_dir / 'extraction_error.json')
        assert error['stage'] == 'extract'
        assert not (record.record_dir / 'model.json').exists()
        assert _read(record.record_dir / 'record.json')['outcome'] == 'extraction_failed'

    def test_cross_product_directories(self, tmp_path, model_answer):
        providers = [
            _replay_spec('replay-a', _replay_dir(tmp_path / 'a', fallback=model_answer)),
            _replay_spec('replay-b', _replay_dir(tmp_path / 'b', fallback=model_answer)),
        ]
        config = _config(tmp_path, providers, scenarios=('clinic', 'hospital', 'library'))
        records = ExperimentService.run_experiment(config)

        assert len(records) == 18
        dirs = sorted(p.relative_to(tmp_path / 'runs').as_posix() for p in (tmp_path / 'runs').glob('*/*/*'))
        expected = sorted(
            f"{s}/{strategy}/{p}"
            for s in ('clinic', 'hospital', 'library')
            for strategy in ('baseline', 'cot', 'cot_verifier')
            for p in ('replay-a', 'replay-b')
        )
        assert dirs == expected

    def test_verifier_failure_falls_back_to_first_stage(self, tmp_path, model_answer):
        bundle = build_prompt('cot_verifier', REQUIREMENTS)
        review_key = prompt_hash(bundle.stage_messages(1, model_answer))
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer, canned={review_key: PROSE})

        [record] = ExperimentService.run_experiment(
            _config(tmp_path, [_replay_spec('replay', replay)], strategies=[PromptStrategy.COT_VERIFIER]),
        )
        assert record.outcome == Outcome.OK
        assert record.raw_responses == [model_answer, PROSE]
        assert len(record.warnings) == 1
        assert _read(record.record_dir / 'record.json')['warnings'] == record.warnings

    def test_provider_error_is_recorded(self, tmp_path):
        spec = ProviderSpec(provider_id='flaky', kind=ProviderKind.OPENAI, model='m')
        config = _config(tmp_path, [spec], strategies=[PromptStrategy.BASELINE])
        [record] = ExperimentService.run_experiment(config, providers={'flaky': _FailingProvider(spec)})

        assert record.outcome == Outcome.PROVIDER_ERROR
        assert record.retries == 2
        meta = _read(record.record_dir / 'record.json')
        assert meta['outcome'] == 'provider_error'
        assert meta['raw_responses'] == []
        assert ExperimentRun.objects.get().provider_error_records == 1

    def test_missing_credential_aborts_before_running(self, tmp_path, monkeypatch):
        monkeypatch.delenv('ER_TEST_UNSET_KEY', raising=False)
        spec = ProviderSpec(provider_id='llm', kind=ProviderKind.OPENAI, model='m', credential_env='ER_TEST_UNSET_KEY')
        with pytest.raises(ProviderError):
            ExperimentService.run_experiment(_config(tmp_path, [spec]))
        assert not (tmp_path / 'runs').exists()
        assert ExperimentRun.objects.count() == 0

    def test_unexpected_send_failure_fails_only_its_cell(self, tmp_path, model_answer):
        broken = ProviderSpec(provider_id='broken', kind=ProviderKind.OPENAI, model='m')
        good = _replay_spec('good', _replay_dir(tmp_path / 'replay', fallback=model_answer))
        config = _config(tmp_path, [broken, good], strategies=[PromptStrategy.BASELINE])
        records = ExperimentService.run_experiment(
            config, providers={'broken': _BrokenProvider(broken), 'good': ReplayProvider(good)},
        )

        assert [(r.provider_id, r.outcome) for r in records] == [
            ('broken', Outcome.PROVIDER_ERROR), ('good', Outcome.OK),
        ]
        assert 'IndexError' in records[0].error
        assert _read(records[0].record_dir / 'record.json')['outcome'] == 'provider_error'
        run = ExperimentRun.objects.get()
        assert run.status == ExperimentRun.Status.COMPLETED
        assert run.provider_error_records == 1

    def test_colliding_record_directories(self, tmp_path, model_answer):
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer)
        config = _config(tmp_path, [_replay_spec('gpt-5.1', replay), _replay_spec('gpt-51', replay)])
        with pytest.raises(ConfigError) as excinfo:
            ExperimentService.run_experiment(config)
        assert 'gpt-51' in str(excinfo.value)
        assert not (tmp_path / 'runs').exists()
        assert ExperimentRun.objects.count() == 0

    def test_history_rows(self, tmp_path, model_answer):
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer)
        ExperimentService.run_experiment(_config(tmp_path, [_replay_spec('replay', replay)]))

        run = ExperimentRun.objects.get()
        assert run.status == ExperimentRun.Status.COMPLETED
        assert run.total_records == 3
        assert run.ok_records == 3
        assert run.completed_at is not None
        assert sorted(run.records.values_list('strategy', flat=True)) == ['baseline', 'cot', 'cot_verifier']
        assert set(ExperimentRecordEntry.objects.values_list('template_version', flat=True)) == {'1'}

    def test_summary_table(self, tmp_path, model_answer):
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer)
        records = ExperimentService.run_experiment(_config(tmp_path, [_replay_spec('replay', replay)]))
        table = ExperimentService.summary_table(records)
        assert list(table.columns) == ['scenario', 'strategy', 'provider', 'outcome', 'level', 'overall_f1']
        assert list(table['strategy']) == ['baseline', 'cot', 'cot_verifier']
        assert set(table['level']) == {'-'}


@pytest.mark.django_db
class TestAnalyzeRecord:
    def test_analysis_outputs(self, tmp_path, model_answer, gold):
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer)
        config = _config(tmp_path, [_replay_spec('replay', replay)], strategies=[PromptStrategy.BASELINE], gold=gold)
        [record] = ExperimentService.run_experiment(config, analyze=True)

        for name in ANALYSIS_FILES:
            assert (record.record_dir / name).exists(), name
        assert record.analysis['level'] in {'L0', 'L1', 'L2', 'L3'}
        assert 0.0 < record.analysis['overall_f1'] < 1.0
        assert _read(record.record_dir / 'level.json')['level'] == record.analysis['level']
        missing = _read(record.record_dir / 'diff.json')['mapping']['unmatched_gold']
        assert set(missing) == {'CardAssignment', 'IdentificationCard'}
        assert ExperimentRecordEntry.objects.get().level == record.analysis['level']

    def test_reanalysis_is_byte_identical(self, tmp_path, model_answer, gold):
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer)
        config = _config(tmp_path, [_replay_spec('replay', replay)], gold=gold)
        records = ExperimentService.run_experiment(config, analyze=True)

        for record in records:
            before = {name: (record.record_dir / name).read_bytes() for name in ANALYSIS_FILES}
            # nothing but the record directory is needed
            moved = tmp_path / 'moved' / record.strategy.value
            shutil.copytree(record.record_dir, moved)
            result = ExperimentService.analyze_record(moved)
            assert result['level'] == record.analysis['level']
            assert {name: (moved / name).read_bytes() for name in ANALYSIS_FILES} == before

    def test_diff_only_where_scenario_has_gold(self, tmp_path, model_answer, gold):
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer)
        config = ExperimentConfig(
            scenarios=(
                Scenario('hospital', tmp_path / 'hospital.txt', REQUIREMENTS, gold),
                Scenario('library', tmp_path / 'library.txt', REQUIREMENTS),
            ),
            strategies=(PromptStrategy.BASELINE,),
            providers=(_replay_spec('replay', replay),),
            output_root=tmp_path / 'runs',
        )
        hospital, library = ExperimentService.run_experiment(config, analyze=True)

        assert (hospital.record_dir / 'gold.json').exists()
        assert (hospital.record_dir / 'diff.json').exists()
        assert hospital.analysis['overall_f1'] is not None
        assert not (library.record_dir / 'gold.json').exists()
        assert not (library.record_dir / 'diff.json').exists()
        assert library.analysis['overall_f1'] is None

    def test_without_gold_no_diff(self, tmp_path, model_answer):
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer)
        config = _config(tmp_path, [_replay_spec('replay', replay)], strategies=[PromptStrategy.BASELINE])
        [record] = ExperimentService.run_experiment(config, analyze=True)
        assert record.analysis['overall_f1'] is None
        assert not (record.record_dir / 'diff.json').exists()
        assert (record.record_dir / 'findings.json').exists()

    def test_failed_extraction_has_no_level(self, tmp_path):
        replay = _replay_dir(tmp_path / 'replay', fallback=PROSE)
        config = _config(tmp_path, [_replay_spec('replay', replay)], strategies=[PromptStrategy.BASELINE])
        [record] = ExperimentService.run_experiment(config)
        result = ExperimentService.analyze_record(record.record_dir)
        assert result == {'outcome': 'extraction_failed', 'level': None, 'overall_f1': None}

    def test_tool_config_thresholds_apply(self, tmp_path, model_answer, gold):
        ini = tmp_path / 'erpipe.ini'
        ini.write_text('[settings]\nMATCH_THRESHOLD=0.99\nENABLED_RULES=missing-constraints\n', encoding='utf-8')
        replay = _replay_dir(tmp_path / 'replay', fallback=model_answer)
        config = _config(tmp_path, [_replay_spec('replay', replay)], strategies=[PromptStrategy.BASELINE], gold=gold)
        [record] = ExperimentService.run_experiment(config)

        result = ExperimentService.analyze_record(record.record_dir, load_tool_config(str(ini)))
        findings = _read(record.record_dir / 'findings.json')
        assert {f['rule_id'] for f in findings} <= {'missing-constraints'}
        assert result['overall_f1'] is not None
