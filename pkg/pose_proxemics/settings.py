"""
Django settings for pose_proxemics project.
"""

from pathlib import Path
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-change-this-in-production')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1', cast=Csv())


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',

    # Third-party apps
    'rest_framework',

    # Local apps
    'core',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.middleware.common.CommonMiddleware',
]

ROOT_URLCONF = 'pose_proxemics.urls'

WSGI_APPLICATION = 'pose_proxemics.wsgi.application'


# Database
# The pipeline is file based: datasets, weights and reports are JSON/CSV artifacts.

DATABASES = {}


# Cache (rate limiting counters)

CACHES = {
    'default': {
        'BACKEND': config('CACHE_BACKEND', default='django.core.cache.backends.locmem.LocMemCache'),
        'LOCATION': config('CACHE_LOCATION', default='pose-proxemics'),
    }
}

RATELIMIT_ENABLE = config('RATELIMIT_ENABLE', default=True, cast=bool)

# locmem is fine for the single-process CLI/dev server
SILENCED_SYSTEM_CHECKS = ['django_ratelimit.E003', 'django_ratelimit.W001']


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Django REST Framework
REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [
        'rest_framework.permissions.AllowAny',
    ],
    'UNAUTHENTICATED_USER': None,
}


# Logging
LOG_LEVEL = config('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'pipeline': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'pipeline',
        },
    },
    'loggers': {
        'core': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Pipeline defaults. Published values where the method states one.
POSE_PROXEMICS = {
    'WEIGHTS_PATH': config('WEIGHTS_PATH', default=str(BASE_DIR / 'artifacts' / 'weights.json')),
    'CALIBRATION_PATH': config('CALIBRATION_PATH', default=str(BASE_DIR / 'artifacts' / 'calibration.json')),
    'SCENES': {
        'IMAGE_WIDTH': config('SCENE_IMAGE_WIDTH', default=1242, cast=int),
        'IMAGE_HEIGHT': config('SCENE_IMAGE_HEIGHT', default=375, cast=int),
        'FOCAL': config('SCENE_FOCAL', default=720.0, cast=float),
        'CAMERA_HEIGHT': config('SCENE_CAMERA_HEIGHT', default=1.65, cast=float),
        'MAX_PEOPLE': config('SCENE_MAX_PEOPLE', default=4, cast=int),
        'GROUP_FRACTION': config('SCENE_GROUP_FRACTION', default=0.5, cast=float),
        'NOISE_PX': config('SCENE_NOISE_PX', default=0.0, cast=float),
        'HEIGHTS': config('SCENE_HEIGHTS', default='adults'),
    },
    'TRAINING': {
        'EPOCHS': config('TRAIN_EPOCHS', default=200, cast=int),
        'LEARNING_RATE': config('TRAIN_LEARNING_RATE', default=1e-3, cast=float),
        'BATCH_SIZE': config('TRAIN_BATCH_SIZE', default=512, cast=int),
        'P_DROP': config('TRAIN_P_DROP', default=0.2, cast=float),
        'HIDDEN_SIZE': config('TRAIN_HIDDEN_SIZE', default=1024, cast=int),
        'LOSS': config('TRAIN_LOSS', default='laplace'),
        'DROPOUT_REGULARIZER': config('TRAIN_DROPOUT_REGULARIZER', default=False, cast=bool),
        'VAL_FRACTION': config('TRAIN_VAL_FRACTION', default=0.0, cast=float),
    },
    'INFERENCE': {
        'MC_PASSES': config('MC_PASSES', default=50, cast=int),
        'MC_SAMPLES': config('MC_SAMPLES', default=100, cast=int),
    },
    'SOCIAL': {
        'D_MAX': config('SOCIAL_D_MAX', default=2.0, cast=float),
        'RADII': config('SOCIAL_RADII', default='0.3,0.5,1.0', cast=Csv(float)),
        'N_SAMPLES': config('SOCIAL_N_SAMPLES', default=100, cast=int),
        'THRESHOLD': config('SOCIAL_THRESHOLD', default=0.25, cast=float),
    },
    'EVALUATION': {
        'IOU_THRESHOLD': config('EVAL_IOU_THRESHOLD', default=0.3, cast=float),
        'ALA_THRESHOLDS': config('EVAL_ALA_THRESHOLDS', default='0.5,1,2', cast=Csv(float)),
        'BIN_EDGES': config('EVAL_BIN_EDGES', default='0,10,20,30', cast=Csv(float)),
    },
}
