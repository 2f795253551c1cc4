"""
Interchange Serializers
Validate interchange documents (format_version "1") into ER models and dump
models back to documents. Every error message names what the schema expected
at that position so violations can be reported as (path, expected, found).
"""
from typing import Any, Iterator, Sequence, Tuple

from rest_framework import serializers
from rest_framework.settings import api_settings

from ermodel.domain import Attribute, Cardinality, ERModel, Endpoint, Entity, Relationship
from ermodel.exceptions import BadCardinalitySymbol, MalformedRelation
from ermodel.services.relation_service import RelationService

FORMAT_VERSION = '1'

BAD_CARDINALITY = 'bad_cardinality'
MALFORMED_RELATION = 'malformed_relation'


def expected(description: str, **extra) -> dict:
    """error_messages reporting the expected shape for every generic failure code"""
    messages = {
        code: description
        for code in ('invalid', 'required', 'null', 'blank', 'not_a_list', 'empty')
    }
    messages.update(extra)
    return messages


class StrictCharField(serializers.CharField):
    """CharField that refuses numbers and booleans instead of coercing them"""

    def to_internal_value(self, data):
        if not isinstance(data, str):
            self.fail('invalid')
        return super().to_internal_value(data)


class StrictBooleanField(serializers.BooleanField):
    def to_internal_value(self, data):
        if not isinstance(data, bool):
            self.fail('invalid')
        return data


class CardinalityField(serializers.Field):
    def to_internal_value(self, data):
        if not isinstance(data, str):
            self.fail('invalid')
        try:
            return RelationService.parse_cardinality(data)
        except BadCardinalitySymbol as e:
            raise serializers.ValidationError(e.fragment, code=BAD_CARDINALITY)

    def to_representation(self, value):
        return Cardinality(value).value


# ============================================================================
# MODEL ELEMENTS
# ============================================================================

class AttributeSerializer(serializers.Serializer):
    name = StrictCharField(error_messages=expected('non-empty string'))
    type = StrictCharField(source='declared_type', default='', allow_blank=True,
                           error_messages=expected('string'))
    pk = StrictBooleanField(source='is_primary_key', default=False, error_messages=expected('boolean'))
    fk = StrictBooleanField(source='is_foreign_key', default=False, error_messages=expected('boolean'))
    not_null = StrictBooleanField(default=False, error_messages=expected('boolean'))
    unique = StrictBooleanField(default=False, error_messages=expected('boolean'))

    def to_internal_value(self, data):
        return Attribute(**super().to_internal_value(data))


class EntitySerializer(serializers.Serializer):
    name = StrictCharField(error_messages=expected('non-empty string'))
    attributes = serializers.ListField(
        child=AttributeSerializer(error_messages=expected('object')),
        default=list,
        error_messages=expected('list of attributes'),
    )
    parent = StrictCharField(default=None, allow_null=True, error_messages=expected('entity name'))

    def to_internal_value(self, data):
        values = super().to_internal_value(data)
        return Entity(name=values['name'], attributes=tuple(values['attributes']), parent=values['parent'])

    def to_representation(self, instance):
        data = super().to_representation(instance)
        if data.get('parent') is None:
            data.pop('parent', None)
        return data


class EndpointSerializer(serializers.Serializer):
    entity = StrictCharField(error_messages=expected('entity name'))
    attribute = StrictCharField(default=None, allow_null=True, error_messages=expected('attribute name'))
    cardinality = CardinalityField(error_messages=expected('cardinality mark'))

    def to_internal_value(self, data):
        return Endpoint(**super().to_internal_value(data))

    def to_representation(self, instance):
        data = super().to_representation(instance)
        if data.get('attribute') is None:
            data.pop('attribute', None)
        return data


class RelationshipSerializer(serializers.Serializer):
    """Structured relationship: {endpoints: [...], label?}"""
    endpoints = serializers.ListField(
        child=EndpointSerializer(error_messages=expected('object')),
        min_length=2,
        error_messages=expected('list of endpoints', min_length='list of at least 2 endpoints'),
    )
    label = StrictCharField(default=None, allow_null=True, allow_blank=True, error_messages=expected('string'))

    def to_internal_value(self, data):
        values = super().to_internal_value(data)
        return Relationship(endpoints=tuple(values['endpoints']), label=values['label'])

    def to_representation(self, instance):
        data = super().to_representation(instance)
        if data.get('label') is None:
            data.pop('label', None)
        return data


class RelationField(serializers.Field):
    """A relationship written as a relation string or as a structured endpoint list"""

    def to_internal_value(self, data):
        if isinstance(data, str):
            try:
                return RelationService.parse_relation(data)
            except BadCardinalitySymbol as e:
                raise serializers.ValidationError(e.fragment, code=BAD_CARDINALITY)
            except MalformedRelation as e:
                raise serializers.ValidationError(e.fragment, code=MALFORMED_RELATION)
        if isinstance(data, dict):
            return RelationshipSerializer().run_validation(data)
        self.fail('invalid')

    def to_representation(self, value):
        # unlabeled binary relationships keep the relation-string form
        if value.is_binary and value.label is None:
            return RelationService.serialize_relation(value)
        return dict(RelationshipSerializer(value).data)


class ModelDocumentSerializer(serializers.Serializer):
    """Interchange document; save() returns an ERModel"""
    default_error_messages = {'invalid': 'object'}

    format_version = StrictCharField(default=FORMAT_VERSION, error_messages=expected(f'format version "{FORMAT_VERSION}"'))
    title = StrictCharField(default=None, allow_null=True, allow_blank=True, error_messages=expected('string'))
    entities = serializers.ListField(
        child=EntitySerializer(error_messages=expected('object')),
        error_messages=expected('list of entities'),
    )
    relationships = serializers.ListField(
        child=RelationField(error_messages=expected('string or endpoint list')),
        default=list,
        error_messages=expected('list of relationships'),
    )

    def validate_format_version(self, value):
        if value != FORMAT_VERSION:
            raise serializers.ValidationError(f'format version "{FORMAT_VERSION}"', code='invalid')
        return value

    def create(self, validated_data):
        return ERModel(
            title=validated_data.get('title'),
            entities=tuple(validated_data['entities']),
            relationships=tuple(validated_data['relationships']),
        )

    def to_representation(self, instance):
        data = super().to_representation(instance)
        if data.get('title') is None:
            data.pop('title', None)
        return data


# ============================================================================
# ERROR PATHS
# ============================================================================

MISSING = object()


def flatten_errors(detail: Any, prefix: Tuple = ()) -> Iterator[Tuple[Tuple, Any]]:
    """Yield (path tokens, ErrorDetail) leaves of a nested ValidationError.detail"""
    if isinstance(detail, dict):
        for key, value in detail.items():
            tokens = prefix if key == api_settings.NON_FIELD_ERRORS_KEY else prefix + (key,)
            yield from flatten_errors(value, tokens)
    elif isinstance(detail, list):
        for index, value in enumerate(detail):
            if isinstance(value, (dict, list)):
                yield from flatten_errors(value, prefix + (index,))
            else:
                yield prefix, value
    else:
        yield prefix, detail


def format_path(tokens: Sequence) -> str:
    """('entities', 2, 'attributes', 1, 'name') -> entities[2].attributes[1].name"""
    path = ''
    for token in tokens:
        if isinstance(token, int):
            path += f"[{token}]"
        else:
            path += f".{token}" if path else str(token)
    return path or '$'


def lookup(document: Any, tokens: Sequence) -> Any:
    node = document
    for token in tokens:
        try:
            node = node[token]
        except (KeyError, IndexError, TypeError):
            return MISSING
    return node


def json_type_name(value: Any) -> str:
    if value is MISSING:
        return 'missing'
    if value is None:
        return 'null'
    if isinstance(value, bool):
        return 'boolean'
    if isinstance(value, (int, float)):
        return 'number'
    if isinstance(value, str):
        return 'string'
    if isinstance(value, list):
        return 'array'
    return 'object'
