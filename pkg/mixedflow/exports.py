"""
Report and data files. Every file is written to a temporary sibling and
moved into place, so a run directory never holds half-written output.
"""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def _to_builtin(value):
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_builtin(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    return value


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', newline='') as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("Wrote %s", path)
    return path


def write_json(path, data, schema=None):
    payload = _to_builtin(data)
    if schema is not None:
        payload = {'schema': schema, **payload}
    return write_atomic(path, json.dumps(payload, sort_keys=True, indent=2) + '\n')


def write_csv(path, header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(header)
    for row in rows:
        writer.writerow([f'{v:.17g}' if isinstance(v, (float, np.floating)) else v for v in row])
    return write_atomic(path, buffer.getvalue())


def write_mesh(directory, mesh):
    directory = Path(directory)
    write_json(directory / 'mesh.json', mesh.to_json(), schema='mixedflow.mesh/1')
    write_atomic(directory / 'mesh.vtk', mesh.to_vtk())
    return directory


def write_vtk(path, mesh, point_data=None, title='mixedflow'):
    return write_atomic(path, mesh.to_vtk(point_data, title))
