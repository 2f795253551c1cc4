"""
Experiment Service - run the scenario x strategy x provider cross product

Run tree: <output_root>/<scenario>/<strategy>/<provider>/ holding
prompts.json, raw_N.txt, model.json or extraction_error.json, record.json
and, after analysis, findings.json, findings.txt, level.json, diff.json and
model.dot.
"""
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd
from django.conf import settings
from django.core.management import call_command
from django.db import connection
from django.utils import timezone
from django.utils.text import slugify

from diffing.serializers import DiffReportSerializer
from diffing.services.diff_service import DiffService
from er_modeling.toolconfig import ToolConfig
from ermodel.domain import ERModel
from ermodel.exceptions import ERModelError
from extraction.domain import ExtractionReport
from extraction.serializers import flatten_errors, format_path
from extraction.services.extraction_service import ExtractionService
from harness.domain import (
    ExperimentConfig, ExperimentRecord, Outcome, PromptStrategy, ProviderKind, ProviderSpec, Scenario,
)
from harness.exceptions import ConfigError, ProviderError
from harness.models import ExperimentRecordEntry, ExperimentRun
from harness.prompts import build_prompt
from harness.providers import ChatProvider, build_provider
from harness.serializers import ExperimentConfigSerializer
from linting.serializers import FindingSerializer, LevelAssessmentSerializer
from linting.services.lint_service import LintService
from rendering.services.render_service import RenderService

logger = logging.getLogger(__name__)

PROMPTS_FILE = 'prompts.json'
RECORD_FILE = 'record.json'
MODEL_FILE = 'model.json'
EXTRACTION_ERROR_FILE = 'extraction_error.json'
GOLD_FILE = 'gold.json'
ANALYSIS_FILES = ('findings.json', 'findings.txt', 'level.json', 'diff.json', 'model.dot')


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + '\n', encoding='utf-8')


def raw_file(index: int) -> str:
    return f"raw_{index}.txt"


class ExperimentService:
    """Service for experiment runs"""

    # ========================================================================
    # CONFIG
    # ========================================================================

    @staticmethod
    def load_config(path) -> ExperimentConfig:
        """
        Read and validate a JSON experiment config; relative paths resolve
        against the config file's directory

        Raises:
            ConfigError: unreadable file, invalid field, missing scenario or gold

        A scenario is a path, or {"path": ..., "gold": ...}; the top-level gold
        applies to scenarios that name none.
        """
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except OSError as e:
            raise ConfigError(f"cannot read experiment config: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"experiment config is not valid JSON: {e}") from e

        serializer = ExperimentConfigSerializer(data=data)
        if not serializer.is_valid():
            tokens, message = next(flatten_errors(serializer.errors))
            raise ConfigError(str(message), format_path(tokens))
        values = serializer.validated_data
        base = path.resolve().parent

        default_gold = None
        if values['gold']:
            default_gold = ExperimentService._load_gold(base / values['gold'], 'gold')

        scenarios = []
        for i, entry in enumerate(values['scenarios']):
            scenario_path = base / entry['path']
            try:
                requirements = scenario_path.read_text(encoding='utf-8')
            except OSError as e:
                raise ConfigError(f"cannot read scenario file {scenario_path}: {e}", f"scenarios[{i}]") from e
            gold = default_gold
            if entry['gold']:
                gold = ExperimentService._load_gold(base / entry['gold'], f"scenarios[{i}].gold")
            scenarios.append(Scenario(slugify(scenario_path.stem), scenario_path, requirements, gold))

        ids = [scenario.scenario_id for scenario in scenarios]
        if len(set(ids)) != len(ids):
            raise ConfigError("scenario file names must be distinct", 'scenarios')

        providers = tuple(
            ProviderSpec(
                provider_id=entry['id'],
                kind=ProviderKind(entry['kind']),
                model=entry['model'],
                endpoint=entry['endpoint'],
                credential_env=entry['credential_env'],
                replay_dir=base / entry['replay_dir'] if entry['replay_dir'] else None,
                temperature=entry['temperature'],
                max_retries=entry['max_retries'],
            )
            for entry in values['providers']
        )

        return ExperimentConfig(
            scenarios=tuple(scenarios),
            strategies=tuple(PromptStrategy(s) for s in values['strategies']),
            providers=providers,
            output_root=base / values['output_root'],
            parallelism=values['parallelism'] or settings.ER_DEFAULT_PARALLELISM,
            format_spec=values['format_spec'],
            source=path,
        )

    @staticmethod
    def _load_gold(path: Path, field: str) -> ERModel:
        try:
            return ExtractionService.load_model_file(path)
        except (OSError, ERModelError) as e:
            raise ConfigError(f"invalid gold model: {e}", field) from e

    @staticmethod
    def record_dir(output_root: Path, scenario_id: str, strategy: str, provider_id: str) -> Path:
        return Path(output_root) / slugify(scenario_id) / PromptStrategy(strategy).value / slugify(provider_id)

    @staticmethod
    def check_record_dirs(config: ExperimentConfig) -> None:
        """
        Raises:
            ConfigError: two cells would write into the same record directory
        """
        seen = {}
        for scenario, strategy, spec in itertools.product(config.scenarios, config.strategies, config.providers):
            cell = f"{scenario.scenario_id}/{PromptStrategy(strategy).value}/{spec.provider_id}"
            record_dir = ExperimentService.record_dir(config.output_root, scenario.scenario_id, strategy,
                                                      spec.provider_id)
            if record_dir in seen:
                raise ConfigError(f"cells {seen[record_dir]} and {cell} share the record directory {record_dir}")
            seen[record_dir] = cell

    @staticmethod
    def ensure_history_tables() -> None:
        """Apply migrations when the run history tables do not exist yet (fresh checkout)"""
        if ExperimentRun._meta.db_table in connection.introspection.table_names():
            return
        logger.info("Run history tables missing, applying migrations")
        call_command('migrate', interactive=False, verbosity=0)

    # ========================================================================
    # RUN
    # ========================================================================

    @staticmethod
    def run_experiment(config: ExperimentConfig, analyze: bool = False,
                       tool_config: Optional[ToolConfig] = None,
                       providers: Optional[Dict[str, ChatProvider]] = None) -> List[ExperimentRecord]:
        """
        Execute every cell of the cross product

        Cells run on a thread pool bounded by config.parallelism and write only
        inside their own record directory. Provider failures are materialized
        as records with outcome provider_error.

        Raises:
            ConfigError: two cells would share a record directory
            ProviderError: a provider cannot be built (missing credential)
            DatabaseError: the run history database is unusable
        """
        ExperimentService.check_record_dirs(config)
        if providers is None:
            providers = {spec.provider_id: build_provider(spec) for spec in config.providers}

        ExperimentService.ensure_history_tables()
        run = ExperimentRun.objects.create(
            config_path=str(config.source or ''),
            output_root=str(config.output_root),
            analyzed=analyze,
            status=ExperimentRun.Status.IN_PROGRESS,
        )
        logger.info(f"Starting experiment run {run.id}: {config.cell_count} cells")
        start_time = timezone.now()

        cells = list(itertools.product(config.scenarios, config.strategies, config.providers))
        try:
            with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                records = list(pool.map(
                    lambda cell: ExperimentService.run_cell(
                        config, cell[0], cell[1], providers[cell[2].provider_id], analyze, tool_config,
                    ),
                    cells,
                ))
        except Exception as e:
            logger.error(f"Experiment run {run.id} failed: {e}", exc_info=True)
            run.status = ExperimentRun.Status.FAILED
            run.error_message = str(e)
            run.completed_at = timezone.now()
            run.save()
            raise

        ExperimentRecordEntry.objects.bulk_create([
            ExperimentRecordEntry(
                run=run,
                scenario_id=record.scenario_id,
                strategy=record.strategy,
                provider_id=record.provider_id,
                outcome=record.outcome,
                record_dir=str(record.record_dir),
                template_version=record.prompts.template_version if record.prompts else '',
                retries=record.retries,
                level=record.analysis.get('level'),
                overall_f1=record.analysis.get('overall_f1'),
            )
            for record in records
        ])

        end_time = timezone.now()
        run.total_records = len(records)
        run.ok_records = sum(r.outcome == Outcome.OK for r in records)
        run.extraction_failed_records = sum(r.outcome == Outcome.EXTRACTION_FAILED for r in records)
        run.provider_error_records = sum(r.outcome == Outcome.PROVIDER_ERROR for r in records)
        run.status = ExperimentRun.Status.COMPLETED
        run.completed_at = end_time
        run.processing_duration = int((end_time - start_time).total_seconds())
        run.save()

        logger.info(
            f"Experiment run {run.id} completed: {run.ok_records} ok, "
            f"{run.extraction_failed_records} extraction failed, {run.provider_error_records} provider errors"
        )
        return records

    @staticmethod
    def run_cell(config: ExperimentConfig, scenario: Scenario, strategy: PromptStrategy,
                 provider: ChatProvider, analyze: bool = False,
                 tool_config: Optional[ToolConfig] = None) -> ExperimentRecord:
        record_dir = ExperimentService.record_dir(config.output_root, scenario.scenario_id, strategy,
                                                  provider.provider_id)
        record_dir.mkdir(parents=True, exist_ok=True)
        for stale in record_dir.glob('raw_*.txt'):
            stale.unlink()
        for name in (MODEL_FILE, EXTRACTION_ERROR_FILE) + ANALYSIS_FILES:
            (record_dir / name).unlink(missing_ok=True)

        bundle = build_prompt(strategy, scenario.requirements, config.format_spec)
        record = ExperimentRecord(
            scenario_id=scenario.scenario_id,
            strategy=PromptStrategy(strategy),
            provider_id=provider.provider_id,
            record_dir=record_dir,
            prompts=bundle,
            decoding=provider.spec.decoding,
        )
        write_json(record_dir / PROMPTS_FILE, bundle.as_dict())
        if scenario.gold is not None:
            (record_dir / GOLD_FILE).write_text(ExtractionService.dump_model(scenario.gold), encoding='utf-8')
        else:
            (record_dir / GOLD_FILE).unlink(missing_ok=True)

        previous = None
        try:
            for index in range(len(bundle.stages)):
                started = timezone.now()
                text = ExperimentService._send(provider, bundle.stage_messages(index, previous))
                # raw output is durable before any parsing
                (record_dir / raw_file(index + 1)).write_text(text, encoding='utf-8')
                record.raw_responses.append(text)
                record.timestamps.append({
                    'stage': index + 1,
                    'started_at': started.isoformat(),
                    'finished_at': timezone.now().isoformat(),
                })
                previous = text
        except ProviderError as e:
            logger.error(f"{scenario.scenario_id}/{strategy}/{provider.provider_id}: {e}")
            record.outcome = Outcome.PROVIDER_ERROR
            record.error = str(e)
            record.retries = e.retries
            write_json(record_dir / RECORD_FILE, record.as_dict())
            return record

        ExperimentService._extract_into(record)
        write_json(record_dir / RECORD_FILE, record.as_dict())
        if analyze:
            record.analysis = ExperimentService.analyze_record(record_dir, tool_config)
        return record

    @staticmethod
    def _send(provider: ChatProvider, messages) -> str:
        """provider.send, with any failure of the call turned into ProviderError so only this cell fails"""
        try:
            text = provider.send(messages)
        except ProviderError:
            raise
        except Exception as e:
            logger.error(f"Provider {provider.provider_id} failed unexpectedly: {e}", exc_info=True)
            raise ProviderError(provider.provider_id, f"unexpected failure: {e!r}") from e
        if not isinstance(text, str):
            raise ProviderError(provider.provider_id, f"expected text, got {type(text).__name__}")
        return text

    # ========================================================================
    # EXTRACTION
    # ========================================================================

    @staticmethod
    def extract_final(strategy: PromptStrategy, raw_responses: List[str]) -> Tuple[ERModel, ExtractionReport, List[str]]:
        """
        Normalize the last stage's output; a verifier whose output cannot be
        extracted falls back to the stage-1 document with a warning

        Raises:
            ERModelError: no usable document
        """
        try:
            model, report = ExtractionService.normalize_pipeline(raw_responses[-1])
            return model, report, []
        except ERModelError as e:
            if strategy != PromptStrategy.COT_VERIFIER or len(raw_responses) < 2:
                raise
            try:
                model, report = ExtractionService.normalize_pipeline(raw_responses[0])
            except ERModelError:
                raise e from None
            warning = f"verifier output could not be used ({e}); kept the stage-1 document"
            logger.warning(warning)
            return model, report.with_warning(warning), [warning]

    @staticmethod
    def _extract_into(record: ExperimentRecord) -> None:
        record_dir = record.record_dir
        for name in (MODEL_FILE, EXTRACTION_ERROR_FILE):
            (record_dir / name).unlink(missing_ok=True)
        try:
            model, report, warnings = ExperimentService.extract_final(record.strategy, record.raw_responses)
        except ERModelError as e:
            record.outcome = Outcome.EXTRACTION_FAILED
            record.error = str(e)
            write_json(record_dir / EXTRACTION_ERROR_FILE, {
                'error': type(e).__name__,
                'stage': e.stage,
                'path': e.path,
                'message': str(e),
            })
            return
        record.extracted_model = model
        record.extraction_report = report
        record.warnings.extend(warnings)
        record.outcome = Outcome.OK
        (record_dir / MODEL_FILE).write_text(ExtractionService.dump_model(model), encoding='utf-8')

    # ========================================================================
    # ANALYSIS
    # ========================================================================

    @staticmethod
    def analyze_record(record_dir, tool_config: Optional[ToolConfig] = None) -> dict:
        """
        Re-run extraction, lint, diff and rendering from a record directory alone

        Returns:
            {'outcome', 'level', 'overall_f1'}; level and overall_f1 are None
            when no model could be extracted or no gold model was archived
        """
        record_dir = Path(record_dir)
        try:
            meta = json.loads((record_dir / RECORD_FILE).read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"not a record directory: {e}", str(record_dir)) from e

        for name in ANALYSIS_FILES:
            (record_dir / name).unlink(missing_ok=True)
        if meta['outcome'] == Outcome.PROVIDER_ERROR:
            return {'outcome': meta['outcome'], 'level': None, 'overall_f1': None}

        raw_responses = [
            (record_dir / name).read_text(encoding='utf-8') for name in meta['raw_responses']
        ]
        record = ExperimentRecord(
            scenario_id=meta['scenario_id'],
            strategy=PromptStrategy(meta['strategy']),
            provider_id=meta['provider_id'],
            record_dir=record_dir,
            raw_responses=raw_responses,
        )
        ExperimentService._extract_into(record)
        if record.outcome != Outcome.OK:
            return {'outcome': record.outcome.value, 'level': None, 'overall_f1': None}

        model = record.extracted_model
        findings = LintService.lint_model(model, tool_config.rule_config if tool_config else None)
        assessment = LintService.assess_level(model, findings)
        write_json(record_dir / 'findings.json', FindingSerializer(findings, many=True).data)
        (record_dir / 'findings.txt').write_text(LintService.format_report(findings, assessment), encoding='utf-8')
        write_json(record_dir / 'level.json', LevelAssessmentSerializer(assessment).data)
        (record_dir / 'model.dot').write_text(RenderService.emit_dot(model), encoding='utf-8')

        overall_f1 = None
        gold_path = record_dir / GOLD_FILE
        if gold_path.exists():
            report = DiffService.diff_models(
                model, ExtractionService.load_model_file(gold_path),
                tool_config.match_threshold if tool_config else None,
            )
            write_json(record_dir / 'diff.json', DiffReportSerializer(report).data)
            overall_f1 = report.overall_f1

        return {'outcome': record.outcome.value, 'level': assessment.level.code, 'overall_f1': overall_f1}

    # ========================================================================
    # REPORTS
    # ========================================================================

    @staticmethod
    def summary_table(records: List[ExperimentRecord]) -> pd.DataFrame:
        rows = [{
            'scenario': record.scenario_id,
            'strategy': record.strategy.value,
            'provider': record.provider_id,
            'outcome': record.outcome.value,
            'level': record.analysis.get('level') or '-',
            'overall_f1': record.analysis.get('overall_f1'),
        } for record in records]
        columns = ['scenario', 'strategy', 'provider', 'outcome', 'level', 'overall_f1']
        return pd.DataFrame(rows, columns=columns).sort_values(['scenario', 'strategy', 'provider'], ignore_index=True)

