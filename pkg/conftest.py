"""
Shared pytest fixtures
"""
import json
from pathlib import Path

import pytest

TESTDATA_DIR = Path(__file__).resolve().parent / 'testdata'
SAMPLES_DIR = Path(__file__).resolve().parent / 'samples'


@pytest.fixture
def testdata_dir():
    return TESTDATA_DIR


@pytest.fixture
def samples_dir():
    return SAMPLES_DIR


@pytest.fixture
def load_model():
    """Parse and canonicalize a model document from testdata/"""
    from ermodel.services.model_service import ModelService
    from extraction.services.extraction_service import ExtractionService

    def _load(name):
        document = (TESTDATA_DIR / name).read_text(encoding='utf-8')
        return ModelService.canonicalize(ExtractionService.parse_model(document))

    return _load


@pytest.fixture
def expectations():
    return json.loads((TESTDATA_DIR / 'expectations.json').read_text(encoding='utf-8'))
