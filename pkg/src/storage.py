import hashlib
import json
import logging
import os
import struct
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import config
from .app.models import FcAssets, MlpParams
from .errors import FcAssetError, WeightFileError

log = logging.getLogger('storage')

# Ficheros del solver: activos FC, pesos de la red, CSV de campos y manifiesto.
# Toda escritura pasa por un .tmp y os.replace.

FC_MAGIC = b'FCGRAM1'
WEIGHTS_HEADER = 'FCSDNN'
WEIGHTS_BIN_MAGIC = b'FCSDNNB'


def _atomic_write(path: str, payload, binary: bool = False) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    tmp = path + '.tmp'
    if binary:
        with open(tmp, 'wb') as f:
            f.write(payload)
    else:
        with open(tmp, 'w', encoding='utf8') as f:
            f.write(payload)
    os.replace(tmp, path)


def sha256_file(path: Optional[str]) -> Optional[str]:
    if not path or not os.path.exists(path):
        return None
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            h.update(chunk)
    return h.hexdigest()


# --- activos FC ------------------------------------------------------------

def fc_asset_path(d: int, C: int, asset_dir: Optional[str] = None) -> str:
    return os.path.join(asset_dir or config.ASSET_DIR, f'fcgram_d{d}_C{C}.bin')


def write_fc_assets(path: str, assets: FcAssets) -> None:
    parts = [FC_MAGIC, struct.pack('<II', assets.d, assets.C)]
    for mat in (assets.Q, assets.Q_neumann, assets.A_left, assets.A_right):
        parts.append(np.ascontiguousarray(mat, dtype='<f8').tobytes())
    _atomic_write(path, b''.join(parts), binary=True)
    log.info(f'activos FC escritos en {path}')


def read_fc_assets(path: str) -> FcAssets:
    with open(path, 'rb') as f:
        raw = f.read()
    if not raw.startswith(FC_MAGIC):
        raise FcAssetError(f'{path}: cabecera desconocida')
    pos = len(FC_MAGIC)
    if len(raw) < pos + 8:
        raise FcAssetError(f'{path}: fichero truncado')
    d, C = struct.unpack_from('<II', raw, pos)
    pos += 8
    expected = pos + 8 * (2 * d * d + 2 * C * d)
    if len(raw) != expected:
        raise FcAssetError(f'{path}: tamaño {len(raw)} != {expected} (d={d}, C={C})')
    mats = []
    for shape in ((d, d), (d, d), (C, d), (C, d)):
        n = shape[0] * shape[1]
        mats.append(np.frombuffer(raw, dtype='<f8', count=n, offset=pos).reshape(shape).astype(float))
        pos += 8 * n
    Q, Qn, Al, Ar = mats
    return FcAssets(d=d, C=C, Q=Q, Q_neumann=Qn, A_left=Al, A_right=Ar)


# --- pesos de la red -------------------------------------------------------

def _layer_dims(params: MlpParams) -> List[int]:
    return [params.W1.shape[1]] + [W.shape[0] for W, _ in params.layers()]


def write_weights(path: str, params: MlpParams) -> None:
    """Formato de texto: cabecera con dimensiones y un valor %.17g por línea."""
    dims = _layer_dims(params)
    lines = [' '.join([WEIGHTS_HEADER] + [str(n) for n in dims])]
    lines.extend('%.17g' % v for v in params.flat())
    _atomic_write(path, '\n'.join(lines) + '\n')


def write_weights_binary(path: str, params: MlpParams) -> None:
    dims = _layer_dims(params)
    payload = WEIGHTS_BIN_MAGIC + struct.pack('<I', len(dims)) + struct.pack(f'<{len(dims)}I', *dims)
    payload += np.ascontiguousarray(params.flat(), dtype='<f8').tobytes()
    _atomic_write(path, payload, binary=True)


def _params_from(dims: Sequence[int], values: np.ndarray, path: str) -> MlpParams:
    if tuple(dims) != tuple(config.MLP_LAYERS):
        raise WeightFileError(f'{path}: arquitectura {dims} no soportada')
    template = MlpParams.zeros(tuple(dims))
    if values.size != template.flat().size:
        raise WeightFileError(f'{path}: {values.size} valores, se esperaban {template.flat().size}')
    params = template.with_flat(values)
    if not params.all_finite():
        raise WeightFileError(f'{path}: valores no finitos')
    return params


def read_weights(path: str) -> MlpParams:
    with open(path, 'rb') as f:
        raw = f.read()
    if raw.startswith(WEIGHTS_BIN_MAGIC):
        pos = len(WEIGHTS_BIN_MAGIC)
        try:
            (n_dims,) = struct.unpack_from('<I', raw, pos)
            pos += 4
            dims = struct.unpack_from(f'<{n_dims}I', raw, pos)
            pos += 4 * n_dims
            values = np.frombuffer(raw, dtype='<f8', offset=pos).astype(float)
        except (struct.error, ValueError) as e:
            raise WeightFileError(f'{path}: binario corrupto ({e})') from e
        return _params_from(dims, values, path)
    try:
        text = raw.decode('utf8').split()
    except UnicodeDecodeError as e:
        raise WeightFileError(f'{path}: no es un fichero de pesos') from e
    if not text or text[0] != WEIGHTS_HEADER:
        raise WeightFileError(f'{path}: cabecera de pesos desconocida')
    n_dims = len(config.MLP_LAYERS)
    try:
        dims = [int(t) for t in text[1:1 + n_dims]]
        values = np.array([float(t) for t in text[1 + n_dims:]])
    except ValueError as e:
        raise WeightFileError(f'{path}: {e}') from e
    return _params_from(dims, values, path)


# --- campos y manifiesto ---------------------------------------------------

def write_field_csv(path: str, columns: Dict[str, np.ndarray]) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float).ravel() for n in names])
    rows = [','.join(names)]
    rows.extend(','.join('%.17g' % v for v in row) for row in data)
    _atomic_write(path, '\n'.join(rows) + '\n')


def read_field_csv(path: str) -> Dict[str, np.ndarray]:
    with open(path, 'r', encoding='utf8') as f:
        header = f.readline().strip().split(',')
        rows = [line.strip().split(',') for line in f if line.strip()]
    data = np.array([[float(v) for v in row] for row in rows]).reshape(len(rows), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def write_rows_csv(path: str, rows: List[Dict[str, Any]]) -> None:
    if not rows:
        _atomic_write(path, '')
        return
    names = list(rows[0])
    fmt = lambda v: '%.17g' % v if isinstance(v, (float, np.floating)) else str(v)
    lines = [','.join(names)] + [','.join(fmt(r[n]) for n in names) for r in rows]
    _atomic_write(path, '\n'.join(lines) + '\n')


def snapshot_name(field: str, t: float, prefix: str = '') -> str:
    return f'{prefix}{field}_t{t:.6g}.csv'


def write_manifest(path: str, manifest: Dict[str, Any]) -> None:
    _atomic_write(path, json.dumps(manifest, ensure_ascii=False, indent=2, default=json_default))


def read_manifest(path: str) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf8') as f:
        return json.load(f)


def json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f'{type(obj).__name__} no serializable')
