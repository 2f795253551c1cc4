"""
Extraction Domain - where a document came from and what was thrown away
"""
from dataclasses import dataclass
from typing import Optional, Tuple

from django.db import models


class SourceKind(models.TextChoices):
    PURE_DOCUMENT = 'PureDocument', 'Pure document'
    FENCED_BLOCK = 'FencedBlock', 'Fenced code block'
    ESCAPED_STRING = 'EscapedString', 'Escaped string literal'
    EMBEDDED_IN_PROSE = 'EmbeddedInProse', 'Embedded in prose'


@dataclass(frozen=True)
class ExtractionReport:
    source_kind: SourceKind
    bytes_discarded: int = 0
    warnings: Tuple[str, ...] = ()

    def with_warning(self, warning: str) -> 'ExtractionReport':
        return ExtractionReport(self.source_kind, self.bytes_discarded, self.warnings + (warning,))

    def as_dict(self) -> dict:
        return {
            'source_kind': self.source_kind.value,
            'bytes_discarded': self.bytes_discarded,
            'warnings': list(self.warnings),
        }


@dataclass(frozen=True)
class BatchItem:
    """Outcome of one file in a batch extraction"""
    name: str
    output: Optional[str] = None
    report: Optional[ExtractionReport] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None
