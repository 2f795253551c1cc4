"""
Prompt templates for the three prompting strategies

Templates are this project's own wording; bump PROMPT_TEMPLATE_VERSION on
every change so records stay comparable.
"""
from typing import Optional

from harness.domain import STAGE_1_PLACEHOLDER, ChatMessage, PromptBundle, PromptStrategy
from harness.exceptions import EmptyRequirements

PROMPT_TEMPLATE_VERSION = '1'

STEP_BY_STEP_MARKER = 'Think step by step.'

DEFAULT_FORMAT_SPEC = """\
Answer with one JSON object:
{
  "format_version": "1",
  "title": "<short model title>",
  "entities": [
    {"name": "<EntityName>", "parent": "<optional parent entity>",
     "attributes": [
       {"name": "<attribute_name>", "type": "<type>", "pk": false, "fk": false,
        "not_null": false, "unique": false}
     ]}
  ],
  "relationships": [
    "<Entity>:<attribute> <card>--<card> <Entity>:<attribute>",
    {"endpoints": [{"entity": "<Entity>", "attribute": "<attribute>", "cardinality": "<card>"}, ...],
     "label": "<optional label>"}
  ]
}
<card> is one of 1 (exactly one), * (zero or more), ? (zero or one), + (one or more).
Binary relationships use the string form; relationships over three or more
entities use the endpoint list form. Names contain no spaces or colons."""

DESIGNER_SYSTEM = (
    "You are a database designer. You turn textual requirements into conceptual "
    "entity-relationship models."
)

REVIEWER_SYSTEM = (
    "You are a senior database designer reviewing a colleague's conceptual "
    "entity-relationship model. You are critical and precise."
)

BASELINE_TEMPLATE = """\
Design the conceptual entity-relationship model for the requirements below.
Reply with the model document only.

Output format:
{format_spec}

Requirements:
{requirements}"""

CHAIN_OF_THOUGHT_TEMPLATE = """\
Design the conceptual entity-relationship model for the requirements below.
{marker} Number each step:
1. list the entities the requirements describe;
2. give each entity its attributes, primary key and foreign keys;
3. list the relationships with the cardinality at each end;
4. check the model against every requirement and fix what is missing.
After the steps, give the final model document in a ```json fenced block.

Output format:
{format_spec}

Requirements:
{requirements}"""

VERIFIER_TEMPLATE = """\
Review the entity-relationship model below against the requirements.
Check that every entity and relationship the requirements need is present,
that no relationship is redundant, that cardinalities match the business
rules, and that keys and integrity constraints are declared.
Return the corrected model document in a ```json fenced block.

Output format:
{format_spec}

Requirements:
{requirements}

Model to review:
{stage_1}"""


def build_prompt(strategy: str, requirements: str, format_spec: Optional[str] = None) -> PromptBundle:
    """
    Raises:
        EmptyRequirements: requirements is blank
    """
    if not requirements or not requirements.strip():
        raise EmptyRequirements()
    strategy = PromptStrategy(strategy)
    format_spec = format_spec or DEFAULT_FORMAT_SPEC

    if strategy == PromptStrategy.BASELINE:
        user = BASELINE_TEMPLATE.format(format_spec=format_spec, requirements=requirements)
    else:
        user = CHAIN_OF_THOUGHT_TEMPLATE.format(
            marker=STEP_BY_STEP_MARKER, format_spec=format_spec, requirements=requirements,
        )
    stages = [(ChatMessage('system', DESIGNER_SYSTEM), ChatMessage('user', user))]

    if strategy == PromptStrategy.COT_VERIFIER:
        review = VERIFIER_TEMPLATE.format(
            format_spec=format_spec, requirements=requirements, stage_1=STAGE_1_PLACEHOLDER,
        )
        stages.append((ChatMessage('system', REVIEWER_SYSTEM), ChatMessage('user', review)))

    return PromptBundle(strategy=strategy, stages=tuple(stages), template_version=PROMPT_TEMPLATE_VERSION)
