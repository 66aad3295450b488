"""
Plain-text storage for atomic measures.

Format: a header line ``d N`` followed by N rows of d coordinates and the
mass, whitespace separated. Floats are written with ``repr`` so that a
store/load cycle reproduces every bit.
"""
from .measures import AtomicMeasure


def dumps_measure(mu):
    lines = [f'{mu.dimension} {len(mu)}']
    for point, mass in zip(mu.points, mu.masses):
        lines.append(' '.join(repr(float(v)) for v in (*point, mass)))
    return '\n'.join(lines) + '\n'


def loads_measure(text):
    rows = [
        (lineno, line.split())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith('#')
    ]
    if not rows:
        raise ValueError("Measure file is empty.")
    try:
        d, n = (int(v) for v in rows[0][1])
    except ValueError:
        raise ValueError(f"Line {rows[0][0]}: expected header 'd N', got {' '.join(rows[0][1])!r}.")
    if len(rows) - 1 != n:
        raise ValueError(f"Header announces {n} atoms but {len(rows) - 1} rows follow.")
    points, masses = [], []
    for lineno, row in rows[1:]:
        if len(row) != d + 1:
            raise ValueError(f"Line {lineno}: expected {d + 1} numbers, got {len(row)}.")
        values = [float(v) for v in row]
        points.append(values[:d])
        masses.append(values[d])
    if n == 0:
        return AtomicMeasure.empty(d)
    return AtomicMeasure(points, masses)


def dump_measure(mu, path):
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(dumps_measure(mu))


def load_measure(path):
    with open(path, encoding='utf-8') as fh:
        return loads_measure(fh.read())
