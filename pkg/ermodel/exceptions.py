"""
ER Model Exceptions
All domain errors are ValueErrors that may carry a location path.
"""
from typing import List, Optional

from ermodel.domain import StructuralErrorKind


class ERModelError(ValueError):
    """Base error for model parsing and validation"""

    # pipeline stage that raised it (extract / parse / canonicalize)
    stage: Optional[str] = None

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.path = path

    def at(self, path: str) -> 'ERModelError':
        """Pin the error to a document path and return it"""
        self.path = path
        return self

    def in_stage(self, stage: str) -> 'ERModelError':
        self.stage = stage
        return self

    def __str__(self):
        if self.path:
            return f"{self.path}: {self.message}"
        return self.message


class MalformedRelation(ERModelError):
    """Relation string does not match the grammar"""

    def __init__(self, fragment: str, path: Optional[str] = None):
        super().__init__(f"malformed relation string {fragment!r}", path)
        self.fragment = fragment


class BadCardinalitySymbol(ERModelError):
    """Cardinality mark outside {1, *, ?, +}"""

    def __init__(self, fragment: str, path: Optional[str] = None):
        super().__init__(f"unknown cardinality symbol {fragment!r}", path)
        self.fragment = fragment


class NotBinary(ERModelError):
    """Only 2-endpoint relationships have a relation-string form"""

    def __init__(self, arity: int, path: Optional[str] = None):
        super().__init__(f"relationship has {arity} endpoints; relation strings are binary", path)
        self.arity = arity


class InvalidModel(ERModelError):
    """Model failed structural validation"""

    def __init__(self, errors: List, path: Optional[str] = None):
        first = errors[0] if errors else None
        message = str(first) if first else "invalid model"
        if len(errors) > 1:
            message = f"{message} (and {len(errors) - 1} more)"
        super().__init__(message, path or (first.location if first else None))
        self.errors = list(errors)

    def __str__(self):
        return self.message

    @classmethod
    def from_errors(cls, errors: List) -> 'InvalidModel':
        """Pick the most specific subclass for the first structural error"""
        if errors and errors[0].kind == StructuralErrorKind.UNKNOWN_ENTITY:
            return UnknownEntityReference(errors)
        return cls(errors)


class UnknownEntityReference(InvalidModel):
    """An endpoint or parent names an entity that does not exist"""
