"""
Random model factories for property-style tests
All generators take a seeded random.Random so failures replay exactly.
"""
import random
from typing import List, Optional

from ermodel.domain import Attribute, Cardinality, ERModel, Endpoint, Entity, Relationship

ENTITY_NAMES = [
    'Hospital', 'HospitalDepartment', 'Visitor', 'VisitorAccess', 'Employee',
    'Physician', 'Resident', 'Nurse', 'IdentificationCard', 'Shift',
    'Badge', 'AccessPoint', 'Patient', 'Ward',
]

ATTRIBUTE_NAMES = [
    'name', 'code', 'email', 'phone', 'status', 'issued_at', 'expires_at',
    'address', 'floor', 'specialty', 'registration', 'started_at', 'notes',
]

MARKS = [c for c in Cardinality]


def random_entity_names(rng: random.Random, count: int) -> List[str]:
    return rng.sample(ENTITY_NAMES, count)


def random_entity(rng: random.Random, name: str, parent: Optional[str] = None) -> Entity:
    attributes = [Attribute(name=f"{name.lower()}_id", is_primary_key=True, not_null=True)]
    for attr_name in rng.sample(ATTRIBUTE_NAMES, rng.randint(0, 4)):
        attributes.append(Attribute(
            name=attr_name,
            declared_type=rng.choice(['', 'text', 'int', 'date']),
            not_null=rng.random() < 0.3,
            unique=rng.random() < 0.1,
        ))
    return Entity(name=name, attributes=tuple(attributes), parent=parent)


def random_model(rng: random.Random, max_entities: int = 8, max_relationships: int = 12,
                 nary_probability: float = 0.0) -> ERModel:
    """A structurally valid model over distinct entity names"""
    names = random_entity_names(rng, rng.randint(1, max_entities))
    entities = {name: random_entity(rng, name) for name in names}

    relationships = []
    for _ in range(rng.randint(0, max_relationships)):
        arity = 3 if len(names) >= 3 and rng.random() < nary_probability else 2
        endpoints = []
        for name in rng.sample(names, arity) if arity > 2 else [rng.choice(names), rng.choice(names)]:
            attribute = entities[name].attributes[0].name if rng.random() < 0.7 else None
            endpoints.append(Endpoint(entity=name, attribute=attribute, cardinality=rng.choice(MARKS)))
        label = rng.choice([None, None, 'has', 'owns'])
        relationships.append(Relationship(endpoints=tuple(endpoints), label=label))

    return ERModel(
        title=rng.choice([None, 'Hospital access']),
        entities=tuple(entities[name] for name in names),
        relationships=tuple(relationships),
    )


def shuffled(rng: random.Random, model: ERModel) -> ERModel:
    entities = list(model.entities)
    relationships = list(model.relationships)
    rng.shuffle(entities)
    rng.shuffle(relationships)
    return ERModel(title=model.title, entities=tuple(entities), relationships=tuple(relationships))


def random_relation_string(rng: random.Random) -> str:
    """Relation string with random spacing around the cardinality pair"""
    def endpoint() -> str:
        entity = rng.choice(ENTITY_NAMES)
        if rng.random() < 0.6:
            return f"{entity}:{rng.choice(ATTRIBUTE_NAMES)}"
        return entity

    left_space = ' ' * rng.randint(1, 3)
    right_space = ' ' * rng.randint(1, 3)
    marks = f"{rng.choice(MARKS).value}--{rng.choice(MARKS).value}"
    return f"{endpoint()}{left_space}{marks}{right_space}{endpoint()}"
