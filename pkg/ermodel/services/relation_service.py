"""
Relation Service - parse and serialize relation strings

Grammar (bit-exact public contract):
    relation := endpoint WS card "--" card WS endpoint
    endpoint := entity (":" attribute)?
    card     := "1" | "*" | "?" | "+"
"""
import re

from ermodel.domain import Cardinality, Endpoint, Relationship
from ermodel.exceptions import BadCardinalitySymbol, MalformedRelation, NotBinary

ENDPOINT_PATTERN = r'[^\s:]+(?::[^\s:]+)?'

RELATION_PATTERN = re.compile(
    rf'^\s*(?P<left>{ENDPOINT_PATTERN})\s+'
    r'(?P<left_card>[^\s-]+)--(?P<right_card>[^\s-]+)'
    rf'\s+(?P<right>{ENDPOINT_PATTERN})\s*$'
)


class RelationService:
    """Service for the relation-string grammar"""

    @staticmethod
    def parse_relation(text: str) -> Relationship:
        """
        Parse a relation string into a 2-endpoint relationship

        Args:
            text: e.g. "Hospital:hospital_id 1--* HospitalDepartment:hospital_id"

        Returns:
            Relationship preserving left/right order

        Raises:
            BadCardinalitySymbol: unknown mark, carries the mark
            MalformedRelation: grammar mismatch, carries the text
        """
        match = RELATION_PATTERN.match(text)
        if not match:
            raise MalformedRelation(text.strip())

        left_card = RelationService.parse_cardinality(match.group('left_card'))
        right_card = RelationService.parse_cardinality(match.group('right_card'))

        return Relationship(endpoints=(
            RelationService._parse_endpoint(match.group('left'), left_card),
            RelationService._parse_endpoint(match.group('right'), right_card),
        ))

    @staticmethod
    def parse_cardinality(symbol: str) -> Cardinality:
        try:
            return Cardinality(symbol)
        except ValueError:
            raise BadCardinalitySymbol(symbol) from None

    @staticmethod
    def _parse_endpoint(token: str, cardinality: Cardinality) -> Endpoint:
        entity, _, attribute = token.partition(':')
        return Endpoint(entity=entity, attribute=attribute or None, cardinality=cardinality)

    @staticmethod
    def serialize_relation(relationship: Relationship) -> str:
        """
        Serialize a binary relationship; inverse of parse_relation

        Raises:
            NotBinary: relationship does not have exactly 2 endpoints
        """
        if not relationship.is_binary:
            raise NotBinary(len(relationship.endpoints))

        left, right = relationship.endpoints
        return (
            f"{RelationService.endpoint_token(left)} "
            f"{left.cardinality.value}--{right.cardinality.value} "
            f"{RelationService.endpoint_token(right)}"
        )

    @staticmethod
    def endpoint_token(endpoint: Endpoint) -> str:
        if endpoint.attribute:
            return f"{endpoint.entity}:{endpoint.attribute}"
        return endpoint.entity

    @staticmethod
    def relationship_key(relationship: Relationship) -> str:
        """Stable sort key: the relation string, or a structured form for n-ary"""
        if relationship.is_binary:
            return RelationService.serialize_relation(relationship)
        return ' & '.join(
            f"{RelationService.endpoint_token(ep)} {ep.cardinality.value}"
            for ep in relationship.endpoints
        )
