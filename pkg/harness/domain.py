"""
Harness Domain - strategies, prompt bundles, provider specs and experiment records
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from django.db import models

from ermodel.domain import ERModel
from extraction.domain import ExtractionReport

STAGE_1_PLACEHOLDER = '<<STAGE_1_OUTPUT>>'


class PromptStrategy(models.TextChoices):
    BASELINE = 'baseline', 'One-shot baseline'
    CHAIN_OF_THOUGHT = 'cot', 'Chain-of-thought'
    COT_VERIFIER = 'cot_verifier', 'Chain-of-thought with verifier'


class Outcome(models.TextChoices):
    OK = 'ok', 'Ok'
    EXTRACTION_FAILED = 'extraction_failed', 'Extraction failed'
    PROVIDER_ERROR = 'provider_error', 'Provider error'


class ProviderKind(models.TextChoices):
    OPENAI = 'openai', 'OpenAI-compatible chat completions'
    REPLAY = 'replay', 'Replay of canned responses'


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def as_dict(self) -> Dict[str, str]:
        return {'role': self.role, 'content': self.content}


@dataclass(frozen=True)
class PromptBundle:
    """Ordered stages, each a list of chat messages"""
    strategy: PromptStrategy
    stages: Tuple[Tuple[ChatMessage, ...], ...]
    template_version: str

    def stage_messages(self, index: int, previous_output: Optional[str] = None) -> List[Dict[str, str]]:
        """Messages of one stage with the stage-1 output slot filled in"""
        messages = []
        for message in self.stages[index]:
            content = message.content
            if previous_output is not None:
                content = content.replace(STAGE_1_PLACEHOLDER, previous_output)
            messages.append({'role': message.role, 'content': content})
        return messages

    def as_dict(self) -> dict:
        return {
            'strategy': self.strategy.value,
            'template_version': self.template_version,
            'stages': [[message.as_dict() for message in stage] for stage in self.stages],
        }


@dataclass(frozen=True)
class ProviderSpec:
    provider_id: str
    kind: ProviderKind
    model: str = ''
    endpoint: Optional[str] = None
    credential_env: str = 'OPENAI_API_KEY'
    replay_dir: Optional[Path] = None
    temperature: float = 0.0
    max_retries: int = 2

    @property
    def decoding(self) -> dict:
        return {'model': self.model, 'temperature': self.temperature}


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    path: Path
    requirements: str
    gold: Optional[ERModel] = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: Tuple[Scenario, ...]
    strategies: Tuple[PromptStrategy, ...]
    providers: Tuple[ProviderSpec, ...]
    output_root: Path
    parallelism: int = 1
    format_spec: Optional[str] = None
    source: Optional[Path] = None

    @property
    def cell_count(self) -> int:
        return len(self.scenarios) * len(self.strategies) * len(self.providers)


@dataclass
class ExperimentRecord:
    """One scenario x strategy x provider cell; all artifacts live under record_dir"""
    scenario_id: str
    strategy: PromptStrategy
    provider_id: str
    record_dir: Path
    prompts: Optional[PromptBundle] = None
    raw_responses: List[str] = field(default_factory=list)
    extracted_model: Optional[ERModel] = None
    extraction_report: Optional[ExtractionReport] = None
    timestamps: List[dict] = field(default_factory=list)
    outcome: Outcome = Outcome.OK
    error: Optional[str] = None
    retries: int = 0
    warnings: List[str] = field(default_factory=list)
    decoding: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            'scenario_id': self.scenario_id,
            'strategy': self.strategy.value,
            'provider_id': self.provider_id,
            'template_version': self.prompts.template_version if self.prompts else None,
            'decoding': self.decoding,
            'outcome': self.outcome.value,
            'error': self.error,
            'retries': self.retries,
            'warnings': list(self.warnings),
            'stages': len(self.prompts.stages) if self.prompts else 0,
            'raw_responses': [f"raw_{i}.txt" for i in range(1, len(self.raw_responses) + 1)],
            'extraction': self.extraction_report.as_dict() if self.extraction_report else None,
            'timestamps': self.timestamps,
        }
