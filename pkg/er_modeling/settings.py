"""
Django settings for the ER modeling pipeline
"""
from pathlib import Path
from decouple import config

BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY
SECRET_KEY = config('SECRET_KEY', default="django-insecure-er-modeling-pipeline-local-only")
DEBUG = config('DEBUG', default=True, cast=bool)
ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='*').split(',')

# INSTALLED APPS
INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',

    # Third party
    'rest_framework',

    # Local apps
    'ermodel',
    'extraction',
    'linting',
    'diffing',
    'rendering',
    'harness',
    'cli',
]

# DATABASE (run history only; analysis never touches it)
DATABASES = {
    'default': {
        'ENGINE': config('DB_ENGINE', default='django.db.backends.sqlite3'),
        'NAME': config('DB_NAME', default=str(BASE_DIR / 'er_modeling.sqlite3')),
        'USER': config('DB_USER', default=''),
        'PASSWORD': config('DB_PASSWORD', default=''),
        'HOST': config('DB_HOST', default=''),
        'PORT': config('DB_PORT', default=''),
    }
}

# INTERNATIONALIZATION
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

# DEFAULT PRIMARY KEY
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST FRAMEWORK (serializers only, no API surface)
REST_FRAMEWORK = {
    'NON_FIELD_ERRORS_KEY': 'non_field_errors',
    'COERCE_DECIMAL_TO_STRING': False,
}

# ============================================================================
# PIPELINE SETTINGS
# ============================================================================

# Lint thresholds (checklist defaults: > 12 attributes, > 3 hierarchy levels)
ER_ATTRIBUTE_OVERLOAD_THRESHOLD = config('ER_ATTRIBUTE_OVERLOAD_THRESHOLD', default=12, cast=int)
ER_HIERARCHY_DEPTH_THRESHOLD = config('ER_HIERARCHY_DEPTH_THRESHOLD', default=3, cast=int)

# Model diff phase-2 matching threshold (attribute-name overlap)
ER_MATCH_THRESHOLD = config('ER_MATCH_THRESHOLD', default=0.5, cast=float)

# External DOT renderer
ER_RENDERER_PATH = config('ER_RENDERER_PATH', default='dot')
ER_RENDER_TIMEOUT_SECONDS = config('ER_RENDER_TIMEOUT_SECONDS', default=30, cast=int)

# LLM harness
ER_PROVIDER_TIMEOUT_SECONDS = config('ER_PROVIDER_TIMEOUT_SECONDS', default=120, cast=int)
ER_DEFAULT_PARALLELISM = config('ER_DEFAULT_PARALLELISM', default=1, cast=int)

# Ensure logs directory exists
LOGS_DIR = BASE_DIR / 'logs'
if not LOGS_DIR.exists():
    LOGS_DIR.mkdir(parents=True, exist_ok=True)

# LOGGING
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
            'level': config('ER_CONSOLE_LOG_LEVEL', default='WARNING'),
        },
        'file': {
            'class': 'logging.FileHandler',
            'filename': LOGS_DIR / 'er_modeling.log',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console', 'file'],
        'level': 'INFO',
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': False,
        },
        'harness': {
            'handlers': ['console', 'file'],
            'level': config('ER_HARNESS_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
    },
}
