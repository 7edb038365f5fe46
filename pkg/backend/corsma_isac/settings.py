import os
from pathlib import Path
from dotenv import load_dotenv
import dj_database_url

# Load environment variables
load_dotenv()

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-local-experiments-only')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = os.getenv('ALLOWED_HOSTS', 'localhost,127.0.0.1').split(',')

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Third-party apps
    'rest_framework',

    # Project apps
    'scenarios',
    'radio',
    'conic',
    'placement',
    'beamforming',
    'baselines',
    'experiments',
]

# ==========================================
# DATABASE CONFIGURATION
# ==========================================
DATABASES = {
    'default': dj_database_url.config(
        default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}",
        conn_max_age=0,
    )
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# ==========================================
# LOGGING
# ==========================================
LOG_LEVEL = os.getenv('CORSMA_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False}
        for app in ('scenarios', 'radio', 'conic', 'placement', 'beamforming', 'baselines', 'experiments')
    },
}

# ==========================================
# OPTIMIZER DEFAULTS
# ==========================================
CORSMA = {
    'SOLVER': os.getenv('CORSMA_SOLVER', 'CLARABEL'),
    'FALLBACK_SOLVER': os.getenv('CORSMA_FALLBACK_SOLVER', 'SCS'),
    'FEASIBILITY_TOL': 1e-7,
    'GAP_TOL': 1e-8,
    'WORKERS': int(os.getenv('CORSMA_WORKERS', '1')),
    'RESULTS_DIR': Path(os.getenv('CORSMA_RESULTS_DIR', BASE_DIR / 'results')),
    'DEFAULT_SCENARIO': BASE_DIR / 'configs' / 'scenario_default.json',
}

# Reported in result manifests
TOOL_VERSION = '0.3.0'
