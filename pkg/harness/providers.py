"""
Chat providers - one contract, send(messages) -> text

ReplayProvider answers from canned files keyed by prompt hash so whole
experiments run offline; OpenAIChatProvider talks to any OpenAI-compatible
chat-completions endpoint.
"""
import hashlib
import json
import logging
import time
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List

import openai
from decouple import config
from django.conf import settings
from openai import OpenAI

from harness.domain import ProviderKind, ProviderSpec
from harness.exceptions import ProviderError

logger = logging.getLogger(__name__)

Messages = List[Dict[str, str]]

REPLAY_FALLBACK = 'fallback.txt'


def prompt_hash(messages: Messages) -> str:
    payload = json.dumps(messages, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


class ChatProvider(ABC):
    def __init__(self, spec: ProviderSpec):
        self.spec = spec

    @property
    def provider_id(self) -> str:
        return self.spec.provider_id

    @abstractmethod
    def send(self, messages: Messages) -> str:
        """
        Raises:
            ProviderError: transport or authentication failure
        """


class ReplayProvider(ChatProvider):
    """Reads <sha256 of messages>.txt from the replay directory, else fallback.txt"""

    def __init__(self, spec: ProviderSpec):
        super().__init__(spec)
        if spec.replay_dir is None or not Path(spec.replay_dir).is_dir():
            raise ProviderError(spec.provider_id, f"replay directory {spec.replay_dir} does not exist")
        self.replay_dir = Path(spec.replay_dir)

    def send(self, messages: Messages) -> str:
        key = prompt_hash(messages)
        path = self.replay_dir / f"{key}.txt"
        if not path.exists():
            path = self.replay_dir / REPLAY_FALLBACK
            if not path.exists():
                raise ProviderError(self.provider_id, f"no canned response for prompt {key}")
            logger.warning(f"Replay {self.provider_id}: no response for prompt {key[:12]}, using {REPLAY_FALLBACK}")
        try:
            return path.read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            raise ProviderError(self.provider_id, f"cannot read canned response {path.name}: {e}") from e


class OpenAIChatProvider(ChatProvider):
    def __init__(self, spec: ProviderSpec, client=None, retry_backoff: float = 2.0):
        super().__init__(spec)
        self.retry_backoff = retry_backoff
        if client is None:
            api_key = config(spec.credential_env, default=None)
            if not api_key:
                raise ProviderError(spec.provider_id, f"credential variable {spec.credential_env} is not set")
            client = OpenAI(
                api_key=api_key,
                base_url=spec.endpoint or None,
                timeout=settings.ER_PROVIDER_TIMEOUT_SECONDS,
                max_retries=0,
            )
        self.client = client

    def send(self, messages: Messages) -> str:
        attempt = 0
        while True:
            try:
                response = self.client.chat.completions.create(
                    model=self.spec.model,
                    messages=messages,
                    temperature=self.spec.temperature,
                )
                if not response.choices:
                    raise ProviderError(self.provider_id, "response carries no choices", retries=attempt)
                return response.choices[0].message.content or ''
            except openai.AuthenticationError as e:
                raise ProviderError(self.provider_id, f"authentication failed: {e}", retries=attempt) from e
            except openai.OpenAIError as e:
                if attempt >= self.spec.max_retries:
                    logger.error(f"Provider {self.provider_id} failed after {attempt} retries: {e}")
                    raise ProviderError(self.provider_id, str(e), retries=attempt) from e
                attempt += 1
                logger.warning(f"Provider {self.provider_id} attempt {attempt} failed: {e}; retrying")
                time.sleep(self.retry_backoff * attempt)


def build_provider(spec: ProviderSpec, client=None) -> ChatProvider:
    """
    Raises:
        ProviderError: missing credential or replay directory
    """
    if spec.kind == ProviderKind.REPLAY:
        return ReplayProvider(spec)
    return OpenAIChatProvider(spec, client=client)
