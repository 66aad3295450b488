"""
Experiment configuration files.

A configuration is ``.env``-style text: ``key = value`` lines and ``#``
comments. Dotted keys build nested records (``phi.family = power``) and the
list-valued keys take comma separated values. Values are read through
decouple's RepositoryEnv; line numbers are kept for diagnostics.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

from decouple import Csv, RepositoryEnv

from apps.core.exceptions import ConfigError

logger = logging.getLogger(__name__)

LIST_KEYS = frozenset({'families', 'sizes', 'dimensions', 'r_grid', 'criteria'})


class ExperimentFile:
    """Raw key/value content of a configuration file with the line of every key."""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_file():
            raise ConfigError(f"Configuration file '{self.path}' does not exist.")
        self.lines = {}
        self._scan()
        self.repository = RepositoryEnv(str(self.path))

    def _scan(self):
        text = self.path.read_text(encoding='utf-8')
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            if '=' not in line:
                raise ConfigError(f"expected 'key = value', got '{line}'", line=lineno)
            key = line.split('=', 1)[0].strip()
            if not key or any(not part for part in key.split('.')):
                raise ConfigError(f"malformed key '{key}'", line=lineno, field=key)
            if key in self.lines:
                raise ConfigError(f"duplicate key '{key}' (first set on line {self.lines[key]})",
                                  line=lineno, field=key)
            self.lines[key] = lineno

    def as_data(self):
        """Nested dict with list-valued keys split by decouple's Csv cast."""
        data = {}
        for key in self.lines:
            value = self.repository[key]
            if key in LIST_KEYS:
                value = Csv()(value)
            node = data
            parts = key.split('.')
            for part in parts[:-1]:
                child = node.setdefault(part, {})
                if not isinstance(child, dict):
                    raise ConfigError(f"'{part}' is both a value and a group", line=self.lines[key], field=key)
                node = child
            if isinstance(node.get(parts[-1]), dict):
                raise ConfigError(f"'{key}' is both a value and a group", line=self.lines[key], field=key)
            node[parts[-1]] = value
        return data

    def line_of(self, name):
        """Line on which ``name`` (dotted), a key below it or its parent was set."""
        while name:
            if name in self.lines:
                return self.lines[name]
            below = [line for key, line in self.lines.items() if key.startswith(name + '.')]
            if below:
                return min(below)
            name = name.rpartition('.')[0]
        return None


def flatten_errors(errors, prefix=''):
    """Turn a nested serializer error dict into (dotted field, message) pairs."""
    if isinstance(errors, dict):
        for key, value in errors.items():
            name = prefix if key == 'non_field_errors' else (f'{prefix}.{key}' if prefix else key)
            yield from flatten_errors(value, name)
    elif isinstance(errors, list):
        for value in errors:
            yield from flatten_errors(value, prefix)
    else:
        yield prefix, str(errors)


def load_experiment_config(path, serializer_class):
    """
    Read and validate a configuration file; every problem is reported with
    the field name and the line that set it.
    """
    source = ExperimentFile(path)
    serializer = serializer_class(data=source.as_data())
    if not serializer.is_valid():
        messages = []
        for name, message in flatten_errors(serializer.errors):
            line = source.line_of(name)
            location = f"line {line}, " if line else ""
            messages.append(f"{location}{name or 'config'}: {message}")
        raise ConfigError("; ".join(messages))
    logger.debug("loaded %s with %d keys", source.path, len(source.lines))
    return serializer.save()


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    phis: tuple
    generator: dict = None
    h: float = None
    instances: int = 20
    sizes: tuple = ()
    dimensions: tuple = (1, 2, 3)
    r_grid: tuple = ()
    samples: int = 10000
    n_atoms: int = 64
    grid: dict = field(default_factory=dict)
    psi: dict = field(default_factory=dict)
    criteria: tuple = ()
    seed: int = None
    echo: dict = field(default_factory=dict)

    @property
    def phi(self):
        """The first (often only) configured function."""
        return self.phis[0] if self.phis else None
