"""
erpipe - the ER modeling pipeline from the command line

    python manage.py erpipe extract RAW_OR_DIR OUTPUT
    python manage.py erpipe lint MODEL [--checklist]
    python manage.py erpipe diff GENERATED GOLD
    python manage.py erpipe render MODEL OUTPUT [--format dot|png|svg]
    python manage.py erpipe run EXPERIMENT [--analyze]
    python manage.py erpipe history [--limit N]

run and history keep their index in the Django database; its tables are
created on first use, so no separate migrate step is needed.

Exit status: 0 success, 1 lint found Error findings, 2 input failure,
3 provider failure.
"""
import argparse
import json
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from diffing.serializers import DiffReportSerializer
from diffing.services.diff_service import DiffService
from er_modeling.toolconfig import ToolConfigError, load_tool_config
from ermodel.exceptions import ERModelError
from extraction.services.extraction_service import ExtractionService
from harness.domain import Outcome
from harness.exceptions import ConfigError, ProviderError
from harness.models import ExperimentRun
from harness.serializers import ExperimentRunSerializer
from harness.services.experiment_service import ExperimentService
from linting.domain import Severity
from linting.exceptions import LintError
from linting.serializers import ChecklistItemSerializer, FindingSerializer, LevelAssessmentSerializer
from linting.services.lint_service import LintService
from rendering.domain import OutputFormat, RecordStyle, RenderOptions
from rendering.exceptions import RenderError
from rendering.services.render_service import RenderService

logger = logging.getLogger(__name__)

EXIT_FINDINGS = 1
EXIT_INPUT = 2
EXIT_PROVIDER = 3


class Command(BaseCommand):
    help = 'Extract, lint, diff, render and run LLM experiments on entity-relationship models'

    def add_arguments(self, parser):
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('--config', help='INI file with a [settings] section')
        common.add_argument('--json', action='store_true', help='machine-readable output')
        common.add_argument('--quiet', action='store_true', help='print nothing but errors')

        subcommands = parser.add_subparsers(dest='subcommand', required=True)

        extract = subcommands.add_parser('extract', parents=[common], help='raw model output to a canonical document')
        extract.add_argument('input', help='raw output file, or a directory for batch mode')
        extract.add_argument('output', help='canonical document path, or a directory for batch mode')

        lint = subcommands.add_parser('lint', parents=[common], help='lint a model and assess its quality level')
        lint.add_argument('model')
        lint.add_argument('--checklist', action='store_true', help='also print the task checklist')

        diff = subcommands.add_parser('diff', parents=[common], help='compare a model against a gold model')
        diff.add_argument('generated')
        diff.add_argument('gold')

        render = subcommands.add_parser('render', parents=[common], help='draw a model as DOT, PNG or SVG')
        render.add_argument('model')
        render.add_argument('output')
        render.add_argument('--format', choices=OutputFormat.values, default=OutputFormat.DOT)
        render.add_argument('--plain', action='store_true', help='plain box nodes instead of attribute tables')
        render.add_argument('--no-title', action='store_true')

        run = subcommands.add_parser('run', parents=[common], help='run a prompting experiment')
        run.add_argument('experiment', help='experiment config (JSON)')
        run.add_argument('--analyze', action='store_true', help='lint, diff and render every record')

        history = subcommands.add_parser('history', parents=[common], help='list recent experiment runs')
        history.add_argument('--limit', type=int, default=10)

    def handle(self, *args, **options):
        try:
            self.tool_config = load_tool_config(options['config'])
        except (ToolConfigError, LintError) as e:
            raise CommandError(f"invalid config: {e}", returncode=EXIT_INPUT)

        logger.info(f"erpipe {options['subcommand']}")
        handler = getattr(self, f"handle_{options['subcommand']}")
        handler(options)

    def emit(self, options, human, data):
        if options['quiet']:
            return
        if options['json']:
            self.stdout.write(json.dumps(data, indent=2, ensure_ascii=False))
        elif human:
            self.stdout.write(human, ending='' if human.endswith('\n') else '\n')

    def load_model(self, path):
        try:
            return ExtractionService.load_model_file(path)
        except ERModelError as e:
            raise CommandError(f"{path}: {e}", returncode=EXIT_INPUT)

    # ========================================================================
    # SUBCOMMANDS
    # ========================================================================

    def handle_extract(self, options):
        source = Path(options['input'])
        if source.is_dir():
            items = ExtractionService.extract_batch(source, options['output'])
            ok = sum(1 for item in items if item.ok)
            lines = [
                f"ok     {item.name} -> {item.output}" if item.ok else f"failed {item.name}: {item.error}"
                for item in items
            ]
            lines.append(f"{ok} ok / {len(items) - ok} failed")
            self.emit(options, '\n'.join(lines), [{
                'name': item.name,
                'output': item.output,
                'error': item.error,
                'report': item.report.as_dict() if item.report else None,
            } for item in items])
            if ok != len(items):
                raise CommandError(f"{len(items) - ok} file(s) failed extraction", returncode=EXIT_INPUT)
            return

        try:
            raw = source.read_text(encoding='utf-8')
            model, report = ExtractionService.normalize_pipeline(raw)
        except (OSError, UnicodeDecodeError) as e:
            raise CommandError(f"cannot read {source}: {e}", returncode=EXIT_INPUT)
        except ERModelError as e:
            raise CommandError(f"{source}: {e.stage}: {e}", returncode=EXIT_INPUT)

        output = Path(options['output'])
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(ExtractionService.dump_model(model), encoding='utf-8')

        lines = [f"source: {report.source_kind.value} ({report.bytes_discarded} bytes discarded)"]
        lines += [f"warning: {warning}" for warning in report.warnings]
        lines.append(f"wrote {output}")
        self.emit(options, '\n'.join(lines), {'output': str(output), 'report': report.as_dict()})

    def handle_lint(self, options):
        model = self.load_model(options['model'])
        rule_config = self.tool_config.rule_config
        findings = LintService.lint_model(model, rule_config)
        assessment = LintService.assess_level(model, findings)

        human = LintService.format_report(findings, assessment)
        data = {
            'findings': FindingSerializer(findings, many=True).data,
            'level': LevelAssessmentSerializer(assessment).data,
        }
        if options['checklist']:
            items = LintService.checklist(model, findings, rule_config)
            human += LintService.format_checklist(items)
            data['checklist'] = ChecklistItemSerializer(items, many=True).data
        self.emit(options, human, data)

        errors = sum(1 for finding in findings if finding.severity == Severity.ERROR)
        if errors:
            raise CommandError(f"{errors} finding(s) at error severity", returncode=EXIT_FINDINGS)

    def handle_diff(self, options):
        generated = self.load_model(options['generated'])
        gold = self.load_model(options['gold'])
        report = DiffService.diff_models(generated, gold, self.tool_config.match_threshold)
        self.emit(options, DiffService.format_report(report), DiffReportSerializer(report).data)

    def handle_render(self, options):
        model = self.load_model(options['model'])
        render_options = RenderOptions(
            title_visible=not options['no_title'],
            record_style=RecordStyle.PLAIN_NODES if options['plain'] else RecordStyle.TABLE_LABELS,
        )
        try:
            content = RenderService.render_external(
                RenderService.emit_dot(model, render_options),
                options['format'],
                renderer_path=self.tool_config.renderer_path,
                timeout=settings.ER_RENDER_TIMEOUT_SECONDS,
            )
        except (RenderError, ERModelError) as e:
            raise CommandError(str(e), returncode=EXIT_INPUT)

        output = Path(options['output'])
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_bytes(content)
        self.emit(options, f"wrote {output} ({len(content)} bytes)", {
            'output': str(output), 'format': options['format'], 'bytes': len(content),
        })

    def handle_run(self, options):
        try:
            config = ExperimentService.load_config(options['experiment'])
        except ConfigError as e:
            raise CommandError(f"invalid experiment config: {e}", returncode=EXIT_INPUT)

        if not options['quiet'] and not options['json']:
            self.stdout.write(self.style.SUCCESS(
                f"Running {config.cell_count} cells into {config.output_root}"
            ))
        try:
            records = ExperimentService.run_experiment(config, analyze=options['analyze'], tool_config=self.tool_config)
        except ConfigError as e:
            raise CommandError(f"invalid experiment config: {e}", returncode=EXIT_INPUT)
        except ProviderError as e:
            raise CommandError(str(e), returncode=EXIT_PROVIDER)
        except DatabaseError as e:
            raise CommandError(f"run history database unavailable: {e}", returncode=EXIT_INPUT)

        table = ExperimentService.summary_table(records)
        self.emit(options, table.to_string(index=False), [
            {**record.as_dict(), 'record_dir': str(record.record_dir), 'analysis': record.analysis}
            for record in records
        ])

        failed = [record for record in records if record.outcome == Outcome.PROVIDER_ERROR]
        if failed:
            raise CommandError(f"{len(failed)} record(s) ended with a provider error", returncode=EXIT_PROVIDER)

    def handle_history(self, options):
        try:
            ExperimentService.ensure_history_tables()
            runs = list(ExperimentRun.objects.prefetch_related('records')[:max(options['limit'], 0)])
        except DatabaseError as e:
            raise CommandError(f"run history database unavailable: {e}", returncode=EXIT_INPUT)

        data = ExperimentRunSerializer(runs, many=True).data
        lines = [
            f"{run['started_at']}  {run['status']:<11}  {run['ok_records']}/{run['total_records']} ok  "
            f"{run['config_path'] or run['output_root']}"
            for run in data
        ]
        self.emit(options, '\n'.join(lines) or 'no runs recorded', data)
