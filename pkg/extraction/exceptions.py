"""
Extraction Exceptions
"""
from typing import Optional

from ermodel.exceptions import ERModelError


class ExtractionError(ERModelError):
    """Base for failures while recovering or reading an interchange document"""

    def __init__(self, message: str, path: Optional[str] = None, stage: Optional[str] = None):
        super().__init__(message, path)
        if stage:
            self.stage = stage


class NoDocumentFound(ExtractionError):
    """Nothing in the raw text looks like a document"""

    def __init__(self, message: str = "no data document found in input"):
        super().__init__(message, stage='extract')


class MalformedDocument(ExtractionError):
    """A candidate document was located but could not be parsed or repaired"""

    def __init__(self, message: str, stage: str = 'extract'):
        super().__init__(message, stage=stage)


class SchemaViolation(ExtractionError):
    """Document does not follow the interchange schema"""

    def __init__(self, path: str, expected: str, found: str):
        super().__init__(f"expected {expected}, found {found}", path, stage='parse')
        self.expected = expected
        self.found = found
