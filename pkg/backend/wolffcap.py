#!/usr/bin/env python
"""Command-line entry point: wolffcap <experiment> --config <path> --seed <n> --out <dir> [--threads n]."""
import os
import sys


def main():
    """Run one experiment through the wolffcap management command."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    execute_from_command_line([sys.argv[0], 'wolffcap', *sys.argv[1:]])


if __name__ == '__main__':
    main()
