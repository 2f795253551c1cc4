"""
Extraction Service - recover interchange documents from noisy model output

Attempts run in a fixed order and the first success wins:
    1. the whole input
    2. the first fenced code block
    3. the longest balanced {...} span
    4. unescape the input as a string literal, then retry 1-3
When every strict attempt fails but a candidate was located, one lenient
repair pass is applied to the first candidate.
"""
import json
import logging
import re
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import json_repair

from ermodel.domain import ERModel
from ermodel.exceptions import BadCardinalitySymbol, ERModelError, InvalidModel, MalformedRelation
from ermodel.services.model_service import ModelService
from extraction.domain import BatchItem, ExtractionReport, SourceKind
from extraction.exceptions import MalformedDocument, NoDocumentFound, SchemaViolation
from extraction.serializers import (
    BAD_CARDINALITY, MALFORMED_RELATION, ModelDocumentSerializer,
    flatten_errors, format_path, json_type_name, lookup,
)

logger = logging.getLogger(__name__)

FENCE_PATTERN = re.compile(r'```[\w-]*[ \t]*\r?\n(.*?)```', re.DOTALL)

MODEL_KEYS = ('entities', 'relationships')


def _byte_length(text: str) -> int:
    return len(text.encode('utf-8'))


def _load_object(text: str) -> Optional[dict]:
    try:
        value = json.loads(text)
    except ValueError:
        return None
    return value if isinstance(value, dict) else None


def balanced_spans(text: str) -> List[str]:
    """Top-level {...} spans, longest first; braces inside string literals are ignored"""
    spans = []
    depth = 0
    start = 0
    in_string = False
    escaped = False

    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == '\\':
                escaped = True
            elif ch == '"':
                in_string = False
            continue

        if ch == '{':
            if depth == 0:
                start = i
            depth += 1
        elif ch == '}' and depth:
            depth -= 1
            if depth == 0:
                spans.append(text[start:i + 1])
        elif ch == '"' and depth:
            in_string = True

    return sorted(spans, key=len, reverse=True)


class ExtractionService:
    """Service for turning raw model output into validated ER models"""

    # ========================================================================
    # EXTRACTION
    # ========================================================================

    @staticmethod
    def extract_document(raw: str) -> Tuple[str, ExtractionReport]:
        """
        Recover the document text from raw model output

        Returns:
            (document text, ExtractionReport)

        Raises:
            NoDocumentFound: nothing resembling a document in the input
            MalformedDocument: a candidate was found but could not be repaired
        """
        if not raw or not raw.strip():
            raise NoDocumentFound("input is empty")

        found = ExtractionService._strict_attempts(raw)
        if found:
            document, kind = found
            return document, ExtractionService._report(raw, document, kind)

        unescaped = ExtractionService._unescape(raw)
        if unescaped is not None:
            found = ExtractionService._strict_attempts(unescaped)
            if found:
                document, _ = found
                return document, ExtractionService._report(raw, document, SourceKind.ESCAPED_STRING)

        return ExtractionService._lenient_pass(raw, unescaped)

    @staticmethod
    def _strict_attempts(text: str) -> Optional[Tuple[str, SourceKind]]:
        if _load_object(text) is not None:
            return text, SourceKind.PURE_DOCUMENT

        fence = FENCE_PATTERN.search(text)
        if fence:
            payload = fence.group(1).strip()
            if _load_object(payload) is not None:
                return payload, SourceKind.FENCED_BLOCK

        for span in balanced_spans(text):
            if _load_object(span) is not None:
                return span, SourceKind.EMBEDDED_IN_PROSE

        return None

    @staticmethod
    def _unescape(raw: str) -> Optional[str]:
        """Decode the input as a JSON string literal, with or without its quotes"""
        text = raw.strip()
        for literal in (text, f'"{text}"'):
            try:
                value = json.loads(literal, strict=False)
            except ValueError:
                continue
            if isinstance(value, str):
                return value
        return None

    @staticmethod
    def _candidates(text: str, escaped: bool) -> List[Tuple[str, SourceKind]]:
        """Located-but-unparsed documents, in attempt order"""
        candidates = []
        if text.lstrip().startswith('{'):
            candidates.append((text, SourceKind.PURE_DOCUMENT))

        fence = FENCE_PATTERN.search(text)
        if fence and '{' in fence.group(1):
            candidates.append((fence.group(1).strip(), SourceKind.FENCED_BLOCK))

        spans = balanced_spans(text)
        if spans:
            candidates.append((spans[0], SourceKind.EMBEDDED_IN_PROSE))

        start = text.find('{')
        if start >= 0:
            # unterminated document running to the end of the text
            candidates.append((text[start:], SourceKind.EMBEDDED_IN_PROSE))

        if escaped:
            return [(candidate, SourceKind.ESCAPED_STRING) for candidate, _ in candidates]
        return candidates

    @staticmethod
    def _lenient_pass(raw: str, unescaped: Optional[str]) -> Tuple[str, ExtractionReport]:
        candidates = ExtractionService._candidates(raw, escaped=False)
        if unescaped is not None:
            candidates += ExtractionService._candidates(unescaped, escaped=True)
        if not candidates:
            raise NoDocumentFound()

        text, kind = candidates[0]
        try:
            repaired = json_repair.loads(text)
        except Exception as e:
            raise MalformedDocument(f"candidate document could not be repaired: {e}") from e

        if not isinstance(repaired, dict) or not any(key in repaired for key in MODEL_KEYS):
            raise MalformedDocument("candidate document could not be repaired into a model document")

        document = json.dumps(repaired, indent=2, ensure_ascii=False)
        warning = "document was not well-formed; applied one lenient repair pass"
        logger.warning(f"Lenient repair applied to {kind.label.lower()} candidate ({_byte_length(text)} bytes)")
        return document, ExtractionService._report(raw, document, kind).with_warning(warning)

    @staticmethod
    def _report(raw: str, document: str, kind: SourceKind) -> ExtractionReport:
        if kind == SourceKind.PURE_DOCUMENT:
            return ExtractionReport(kind)

        discarded = max(1, _byte_length(raw) - _byte_length(document))
        if kind == SourceKind.ESCAPED_STRING:
            warning = f"unescaped a string literal ({discarded} bytes discarded)"
        elif kind == SourceKind.FENCED_BLOCK:
            warning = f"discarded {discarded} bytes of prose around a fenced block"
        else:
            warning = f"discarded {discarded} bytes of prose around an embedded document"

        logger.info(f"Extracted document from {kind.label.lower()} ({discarded} bytes discarded)")
        return ExtractionReport(kind, discarded, (warning,))

    # ========================================================================
    # PARSING
    # ========================================================================

    @staticmethod
    def parse_model(document: str) -> ERModel:
        """
        Validate a well-formed document against the interchange schema

        Raises:
            SchemaViolation: shape errors, with path/expected/found
            BadCardinalitySymbol / MalformedRelation: bad relation strings
            InvalidModel: unresolved references, cycles, duplicates
        """
        try:
            data = json.loads(document)
        except ValueError as e:
            raise MalformedDocument(f"document is not well-formed: {e}", stage='parse') from e

        serializer = ModelDocumentSerializer(data=data)
        if not serializer.is_valid():
            raise ExtractionService._schema_error(serializer.errors, data)

        model = serializer.save()
        errors = ModelService.validate_model(model)
        if errors:
            raise InvalidModel.from_errors(errors).in_stage('parse')
        return model

    @staticmethod
    def _schema_error(errors, data) -> ERModelError:
        tokens, error = next(flatten_errors(errors))
        path = format_path(tokens)
        code = getattr(error, 'code', None)

        if code == BAD_CARDINALITY:
            return BadCardinalitySymbol(str(error), path).in_stage('parse')
        if code == MALFORMED_RELATION:
            return MalformedRelation(str(error), path).in_stage('parse')
        return SchemaViolation(path, str(error), json_type_name(lookup(data, tokens)))

    @staticmethod
    def dump_model(model: ERModel) -> str:
        """Interchange document text for a model (inverse of parse_model)"""
        return json.dumps(ModelDocumentSerializer(model).data, indent=2, ensure_ascii=False) + '\n'

    # ========================================================================
    # PIPELINE
    # ========================================================================

    @staticmethod
    def normalize_pipeline(raw: str) -> Tuple[ERModel, ExtractionReport]:
        """extract_document -> parse_model -> canonicalize; errors carry their stage"""
        document, report = ExtractionService._in_stage('extract', ExtractionService.extract_document, raw)
        model = ExtractionService._in_stage('parse', ExtractionService.parse_model, document)
        canonical = ExtractionService._in_stage('canonicalize', ModelService.canonicalize, model)
        return canonical, report

    @staticmethod
    def _in_stage(stage: str, func: Callable, *args):
        try:
            return func(*args)
        except ERModelError as e:
            if e.stage is None:
                e.in_stage(stage)
            logger.error(f"Normalization failed at stage {e.stage}: {e}")
            raise

    @staticmethod
    def load_model_file(path) -> ERModel:
        """Read an interchange document from disk into a canonical model"""
        try:
            document = Path(path).read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            raise MalformedDocument(f"cannot read {path}: {e}", stage='parse') from e
        model = ExtractionService._in_stage('parse', ExtractionService.parse_model, document)
        return ExtractionService._in_stage('canonicalize', ModelService.canonicalize, model)

    @staticmethod
    def extract_batch(input_dir, output_dir) -> List[BatchItem]:
        """Run normalize_pipeline over every file of a directory, writing <stem>.json"""
        source = Path(input_dir)
        target = Path(output_dir)
        target.mkdir(parents=True, exist_ok=True)

        items = []
        for path in sorted(p for p in source.iterdir() if p.is_file() and not p.name.startswith('.')):
            try:
                model, report = ExtractionService.normalize_pipeline(path.read_text(encoding='utf-8'))
            except (ERModelError, UnicodeDecodeError) as e:
                stage = getattr(e, 'stage', None) or 'extract'
                items.append(BatchItem(name=path.name, error=f"{stage}: {e}"))
                continue

            output = target / f"{path.stem}.json"
            output.write_text(ExtractionService.dump_model(model), encoding='utf-8')
            items.append(BatchItem(name=path.name, output=str(output), report=report))

        ok = sum(1 for item in items if item.ok)
        logger.info(f"Batch extraction of {source}: {ok} ok / {len(items) - ok} failed")
        return items
