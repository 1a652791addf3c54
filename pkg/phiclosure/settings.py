"""
Django settings for the phiclosure project.

The project has no web surface: Django provides the management-command CLI,
form validation of run configurations and the run-record database.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv("SECRET_KEY", "dev-secret-key-change-me")

DEBUG = os.getenv("DEBUG", "False").lower() == "true"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "closures",
]

MIDDLEWARE = []


# Database (SQLite, run records only)

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv("PHICLOSURE_DB_PATH", str(BASE_DIR / 'db.sqlite3')),
    }
}


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Numerical defaults (overridable from .env)
PHICLOSURE_OUTPUT_DIR = Path(os.getenv("PHICLOSURE_OUTPUT_DIR", str(BASE_DIR / "results")))
PHICLOSURE_DEFAULT_SEED = int(os.getenv("PHICLOSURE_DEFAULT_SEED", "20240101"))
PHICLOSURE_FIT_STARTS = int(os.getenv("PHICLOSURE_FIT_STARTS", "500"))
PHICLOSURE_FIT_MAX_ITER = int(os.getenv("PHICLOSURE_FIT_MAX_ITER", "200"))
PHICLOSURE_INVERT_TOL = float(os.getenv("PHICLOSURE_INVERT_TOL", "1e-9"))
PHICLOSURE_INVERT_MAX_ITER = int(os.getenv("PHICLOSURE_INVERT_MAX_ITER", "100"))
PHICLOSURE_WORKERS = int(os.getenv("PHICLOSURE_WORKERS", "4"))
PHICLOSURE_RECORD_RUNS = os.getenv("PHICLOSURE_RECORD_RUNS", "True").lower() == "true"
PHICLOSURE_LOG_LEVEL = os.getenv("PHICLOSURE_LOG_LEVEL", "INFO")


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "closures": {
            "handlers": ["console"],
            "level": PHICLOSURE_LOG_LEVEL,
            "propagate": False,
        },
    },
}
