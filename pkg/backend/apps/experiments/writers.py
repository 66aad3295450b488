"""
CSV tables and the JSON run summary.

Floats are written in scientific notation with 17 significant digits so
that repeated runs compare byte for byte.
"""
import csv
import logging
import math
import platform
from enum import Enum
from importlib import metadata
from pathlib import Path

import numpy as np
from rest_framework.renderers import JSONRenderer

logger = logging.getLogger(__name__)

PACKAGES = ('Django', 'djangorestframework', 'python-decouple', 'numpy', 'scipy')


def format_cell(value):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.16e}"
    return str(value)


def write_table(path, table):
    with Path(path).open('w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([format_cell(value) for value in row])


def json_safe(value):
    """Plain JSON types; non-finite floats become the strings 'inf'/'-inf' or null."""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return sorted(json_safe(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return value


def library_versions():
    versions = {'python': platform.python_version()}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def build_summary(result, ctx):
    return {
        'experiment': result.experiment,
        'passed': result.passed,
        'seed': ctx.seed,
        'threads': ctx.threads,
        'inputs': ctx.config.echo,
        'versions': library_versions(),
        'wall_time': result.wall_time,
        'methods': result.methods,
        'digests': result.digests,
        'tables': {name: len(table.rows) for name, table in result.tables.items()},
        'failures': result.failures,
        'results': result.summary,
    }


def write_result(out_dir, result, ctx):
    """Write every table as <experiment>_<table>.csv plus <experiment>_summary.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, table in result.tables.items():
        path = out_dir / f'{result.experiment}_{name}.csv'
        write_table(path, table)
        paths.append(path)
    summary_path = out_dir / f'{result.experiment}_summary.json'
    payload = json_safe(build_summary(result, ctx))
    summary_path.write_bytes(JSONRenderer().render(payload, renderer_context={'indent': 2}))
    paths.append(summary_path)
    logger.info("wrote %d files to %s", len(paths), out_dir)
    return paths
