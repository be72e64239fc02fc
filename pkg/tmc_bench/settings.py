from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_bool(name, default):
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ('1', 'true', 'yes', 'on')


# -------------------------------------------------------
# BASE SETTINGS
# -------------------------------------------------------
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-tmc-bench-local-key')
DEBUG = _env_bool('DJANGO_DEBUG', True)

ALLOWED_HOSTS = ['localhost', '127.0.0.1', 'testserver']

# -------------------------------------------------------
# INSTALLED APPS
# -------------------------------------------------------
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'mesh',
    'vem',
    'material',
    'solver',
    'bench',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.middleware.common.CommonMiddleware',
]

# -------------------------------------------------------
# URL + WSGI
# -------------------------------------------------------
ROOT_URLCONF = 'tmc_bench.urls'
WSGI_APPLICATION = 'tmc_bench.wsgi.application'

# -------------------------------------------------------
# DATABASE (unused by the solver, kept for manage.py)
# -------------------------------------------------------
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

# -------------------------------------------------------
# REST FRAMEWORK
# -------------------------------------------------------
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
}

TEMPLATES = []

# -------------------------------------------------------
# SOLVER DEFAULTS
# -------------------------------------------------------
TMC_BENCH = {
    'OUTPUT_DIR': os.getenv('TMC_OUTPUT_DIR', str(BASE_DIR / 'results')),
    'THREADS': int(os.getenv('TMC_THREADS', '1')),
    'QUADRATURE_EXTRA_DEGREE': int(os.getenv('TMC_QUADRATURE_EXTRA_DEGREE', '2')),
    'PROJECTOR_VOLUME_TERM': os.getenv('TMC_PROJECTOR_VOLUME_TERM', 'k'),
    'NEWTON_TOL_REL': float(os.getenv('TMC_NEWTON_TOL_REL', '1e-8')),
    'NEWTON_TOL_ABS_SCALE': float(os.getenv('TMC_NEWTON_TOL_ABS_SCALE', '1e-11')),
    'NEWTON_MAX_ITER': int(os.getenv('TMC_NEWTON_MAX_ITER', '25')),
    'LINE_SEARCH': _env_bool('TMC_LINE_SEARCH', False),
    'MIN_STEP_FACTOR': float(os.getenv('TMC_MIN_STEP_FACTOR', str(1 / 64))),
    'GROW_AFTER': int(os.getenv('TMC_GROW_AFTER', '3')),
    'WRITE_VTK': _env_bool('TMC_WRITE_VTK', True),
}

# -------------------------------------------------------
# LOGGING
# -------------------------------------------------------
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': os.getenv('TMC_LOG_LEVEL', 'INFO'),
    },
}

# -------------------------------------------------------
# INTERNATIONALIZATION
# -------------------------------------------------------
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
