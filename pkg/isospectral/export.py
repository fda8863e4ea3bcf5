"""
Flat-file output: CSV tables with '#' metadata lines and JSON reports.

Floats are written with 17 significant digits so every value re-parses
to the same double. CSV files carry no timestamp; JSON reports carry an
`emitted_at` field in their metadata.
"""
import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from django.utils import timezone

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def format_float(value: float) -> str:
    return '{:.17g}'.format(float(value))


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, 'value'):
        return value.value
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def atomic_write(path: PathLike, text: str) -> None:
    """Write text to path through a temporary file in the same directory and a rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(dir=target.parent, prefix=f'.{target.name}.', suffix='.tmp')
    try:
        with os.fdopen(handle, 'w', encoding='utf-8', newline='') as stream:
            stream.write(text)
        os.replace(temp_name, target)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise


def render_csv(columns: Dict[str, Sequence[float]], metadata: Dict[str, object]) -> str:
    """Metadata as '# key: json' lines, then a header row and one row per node."""
    lengths = {len(values) for values in columns.values()}
    if len(lengths) > 1:
        raise ValueError(f"CSV columns have different lengths: {sorted(lengths)}")
    buffer = io.StringIO()
    for key in sorted(metadata):
        buffer.write(f"# {key}: {json.dumps(metadata[key], sort_keys=True, default=_json_default)}\n")
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(list(columns))
    for row in zip(*columns.values()):
        writer.writerow([format_float(value) for value in row])
    return buffer.getvalue()


def write_csv(path: Optional[PathLike], columns: Dict[str, Sequence[float]], metadata: Dict[str, object]) -> str:
    """Render a table and write it when a path is given; returns the text."""
    text = render_csv(columns, metadata)
    if path:
        atomic_write(path, text)
        logger.info(f"Wrote {len(columns)} columns to {path}")
    return text


def read_csv(source: Union[PathLike, io.StringIO]) -> Tuple[Dict[str, object], Dict[str, List[float]]]:
    """Parse a file written by write_csv back into metadata and float columns."""
    if isinstance(source, io.StringIO):
        lines = source.getvalue().splitlines()
    else:
        lines = Path(source).read_text(encoding='utf-8').splitlines()
    metadata: Dict[str, object] = {}
    body = []
    for line in lines:
        if line.startswith('#'):
            key, _, value = line[1:].strip().partition(': ')
            metadata[key] = json.loads(value)
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    header, data = rows[0], rows[1:]
    columns = {name: [float(row[i]) for row in data] for i, name in enumerate(header)}
    return metadata, columns


def render_json(payload: Dict[str, object], metadata: Dict[str, object]) -> str:
    document = {'metadata': {**metadata, 'emitted_at': timezone.now().isoformat()}, **payload}
    return json.dumps(document, sort_keys=True, indent=2, default=_json_default) + '\n'


def write_json(path: Optional[PathLike], payload: Dict[str, object], metadata: Dict[str, object]) -> str:
    """Render a JSON document and write it when a path is given; returns the text."""
    text = render_json(payload, metadata)
    if path:
        atomic_write(path, text)
        logger.info(f"Wrote report to {path}")
    return text
