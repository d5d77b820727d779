"""Clasificador de suavidad (SDNN).

Cada punto j de la malla se describe con un estencil de 7 valores de la serie
FC evaluada en nodos desplazados; el estencil se normaliza y una red
7 -> 16 -> 16 -> 16 -> 4 (ELU + softmax) asigna la clase:

    1 = discontinuo, 2 = C0 no C1, 3 = C1 no C2, 4 = C2.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from . import config, storage
from .app.models import FcAssets, MlpParams, StencilBatch, StencilDataset
from .errors import TrainingDivergedError
from .fc_core import fc_shifted_eval, map_sections

log = logging.getLogger('sdnn')

HALF = 3
OFFSETS = np.arange(-HALF, HALF + 1)


# ---------------------------------------------------------------------------
# Preprocesado de estenciles
# ---------------------------------------------------------------------------

def preprocess_stencils(values: np.ndarray, assets: Optional[FcAssets],
                        delta_fraction: float = config.CLASSIFY_DELTA_FRACTION,
                        periodic: bool = False, epsilon: float = config.SDNN_EPSILON) -> StencilBatch:
    v = np.asarray(values, dtype=float)
    N = v.shape[-1]
    if N < len(OFFSETS):
        raise ValueError(f'se necesitan al menos 7 puntos (N={N})')
    shifted = fc_shifted_eval(v, assets, delta_fraction, periodic=periodic)
    n = shifted.shape[-1]
    idx = (np.arange(N)[:, None] + OFFSETS) % n
    st = shifted[..., idx]                                   # (..., N, 7)
    # recta por los extremos del estencil
    ramp = (OFFSETS + HALF) / (2.0 * HALF)
    st = st - (st[..., :1] + (st[..., -1:] - st[..., :1]) * ramp)
    hi = st.max(axis=-1, keepdims=True)
    lo = st.min(axis=-1, keepdims=True)
    spread = hi - lo
    degenerate = spread[..., 0] <= epsilon
    safe = np.where(spread > 0, spread, 1.0)
    normed = 2.0 * (st - lo) / safe - 1.0
    return StencilBatch(values=normed, degenerate=degenerate)


# ---------------------------------------------------------------------------
# Red neuronal
# ---------------------------------------------------------------------------

def elu(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(params: MlpParams, X: np.ndarray):
    cache = []
    a = X
    for k, (W, b) in enumerate(params.layers()):
        z = a @ W.T + b
        cache.append((a, z))
        a = softmax(z) if k == 3 else elu(z)
    return a, cache


def mlp_forward(params: MlpParams, stencil: np.ndarray) -> np.ndarray:
    """Probabilidades de las 4 clases para un estencil (7,) o un bloque (n, 7)."""
    X = np.asarray(stencil, dtype=float)
    probs, _ = _forward(params, np.atleast_2d(X))
    return probs[0] if X.ndim == 1 else probs


def cross_entropy(probs: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    """Pérdida por muestra."""
    return -np.sum(onehot * np.log(np.clip(probs, 1e-300, None)), axis=-1)


def loss_and_grad(params: MlpParams, X: np.ndarray, onehot: np.ndarray) -> Tuple[float, MlpParams]:
    """Suma de la pérdida sobre el bloque y su gradiente exacto por retropropagación."""
    probs, cache = _forward(params, X)
    loss = float(np.sum(cross_entropy(probs, onehot)))
    grads = {}
    delta = probs - onehot
    layers = params.layers()
    for k in range(3, -1, -1):
        a_in, _ = cache[k]
        grads[f'W{k + 1}'] = delta.T @ a_in
        grads[f'b{k + 1}'] = delta.sum(axis=0)
        if k > 0:
            _, z_prev = cache[k - 1]
            delta = (delta @ layers[k][0]) * _elu_grad(z_prev)
    return loss, MlpParams(**grads)


def glorot_init(seed: int, layers=config.MLP_LAYERS) -> MlpParams:
    rng = np.random.default_rng(seed)
    out = {}
    for k, (n_in, n_out) in enumerate(zip(layers[:-1], layers[1:]), start=1):
        limit = np.sqrt(6.0 / (n_in + n_out))
        out[f'W{k}'] = rng.uniform(-limit, limit, size=(n_out, n_in))
        out[f'b{k}'] = np.zeros(n_out)
    return MlpParams(**out)


def predict_classes(params: MlpParams, X: np.ndarray) -> np.ndarray:
    # argmax devuelve el primer máximo: en empate gana la clase más baja
    return np.argmax(mlp_forward(params, X), axis=-1) + 1


# ---------------------------------------------------------------------------
# Conjunto de datos sintético
# ---------------------------------------------------------------------------

DATASET_POINTS = 401
SHIFTS = tuple(k / 10.0 for k in range(1, 11))
FAMILIES = ('f1', 'f2', 'f3', 'f4', 'f5')


def _piecewise_params(constraint: Callable[[float, float], bool]):
    grid = []
    for a1 in range(-10, 10):
        for a2 in range(-10, 10):
            if not constraint(a1, a2):
                continue
            for a3 in np.arange(1, 11) * 0.25:
                grid.append((float(a1), float(a2), float(a3)))
    return np.array(grid)


def family_samples(name: str, x: np.ndarray):
    """Muestras (m, N) de una familia, sus dominios de restricción (lo, hi) y la clase."""
    r = np.abs(x - np.pi)[None, :]
    if name == 'f1':
        a = np.arange(-40, 40) * 0.5
        F = np.sin(2.0 * a[:, None] * x[None, :])
        return F, np.zeros(len(a)), np.full(len(a), 2 * np.pi), 4
    if name == 'f2':
        a = np.arange(-10, 11, dtype=float)
        F = a[:, None] * r
        return F, np.full(len(a), 3.53), np.full(len(a), 5.89), 4
    if name == 'f3':
        P = _piecewise_params(lambda a1, a2: a1 != a2)
        a1, a2, a3 = (P[:, k:k + 1] for k in range(3))
        F = np.where(r <= a3, a1, a2) * np.ones_like(r)
        tau = 1
    elif name == 'f4':
        P = _piecewise_params(lambda a1, a2: a1 > 2 * a2 or a1 < 0.5 * a2)
        a1, a2, a3 = (P[:, k:k + 1] for k in range(3))
        F = np.where(r <= a3, a1 * r - a1 * a3, a2 * r - a2 * a3)
        tau = 2
    elif name == 'f5':
        P = _piecewise_params(lambda a1, a2: a1 > 5 * a2 or a1 < 0.2 * a2)
        a1, a2, a3 = (P[:, k:k + 1] for k in range(3))
        F = np.where(r <= a3, 0.5 * a1 * r ** 2 - a1 * a3, a2 * r ** 2 - a2 - 0.5 * a3 ** 2 * (a1 - a2))
        tau = 3
    else:
        raise ValueError(f'familia desconocida: {name}')
    a3 = P[:, 2]
    return F, np.pi + a3 - 0.05, np.pi + a3 + 0.05, tau


def build_family_stencils(name: str, assets: FcAssets, chunk: int = 512) -> StencilDataset:
    x = np.linspace(0.0, 2.0 * np.pi, DATASET_POINTS)
    F, lo, hi, tau = family_samples(name, x)
    X_parts: List[np.ndarray] = []
    for start in range(0, F.shape[0], chunk):
        block = F[start:start + chunk]
        inside = (x[None, :] >= lo[start:start + chunk, None]) & (x[None, :] <= hi[start:start + chunk, None])
        for frac in SHIFTS:
            batch = preprocess_stencils(block, assets, frac)
            keep = inside & ~batch.degenerate
            X_parts.append(batch.values[keep])
    X = np.concatenate(X_parts) if X_parts else np.zeros((0, 7))
    return StencilDataset(X=X, tau=np.full(X.shape[0], tau, dtype=np.int8))


def generate_dataset(seed: int = 0, assets: Optional[FcAssets] = None, subsample: Optional[float] = None,
                     families: Iterable[str] = FAMILIES) -> Tuple[StencilDataset, StencilDataset]:
    if assets is None:
        from .fc_core import load_assets
        assets = load_assets(5)
    parts = []
    for name in families:
        part = build_family_stencils(name, assets)
        log.info(f'familia {name}: {len(part)} estenciles')
        parts.append(part)
    full = StencilDataset(X=np.concatenate([p.X for p in parts]), tau=np.concatenate([p.tau for p in parts]))
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(full))
    if subsample is not None and 0 < subsample < 1:
        idx = idx[:max(1, int(round(subsample * len(idx))))]
    n_train = int(round(0.8 * len(idx)))
    return full.subset(idx[:n_train]), full.subset(idx[n_train:])


# ---------------------------------------------------------------------------
# Entrenamiento
# ---------------------------------------------------------------------------

@dataclass
class TrainingResult:
    params: MlpParams
    history: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0


def accuracy(params: MlpParams, data: StencilDataset, batch: int = 65536) -> float:
    if len(data) == 0:
        return float('nan')
    hits = 0
    for s in range(0, len(data), batch):
        hits += int(np.sum(predict_classes(params, data.X[s:s + batch]) == data.tau[s:s + batch]))
    return hits / len(data)


def train(train_set: StencilDataset, validation_set: Optional[StencilDataset] = None,
          epochs: int = config.TRAIN_EPOCHS, seed: int = 0, lr: float = config.TRAIN_LR,
          batch_size: int = config.TRAIN_BATCH,
          on_epoch: Optional[Callable[[Dict[str, float]], None]] = None) -> TrainingResult:
    """SGD sin momento; gradiente de la pérdida sumada sobre cada mini-lote."""
    if len(train_set) == 0:
        raise ValueError('conjunto de entrenamiento vacío')
    rng = np.random.default_rng(seed)
    params = glorot_init(seed)
    onehot = train_set.one_hot()
    result = TrainingResult(params=params.copy(), best_val_acc=-1.0)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(train_set))
        total = 0.0
        for s in range(0, len(order), batch_size):
            sel = order[s:s + batch_size]
            loss, grads = loss_and_grad(params, train_set.X[sel], onehot[sel])
            if not np.isfinite(loss):
                raise TrainingDivergedError('pérdida no finita durante el entrenamiento', step=epoch,
                                            field=f'batch@{s}')
            total += loss
            for name in MlpParams.NAMES:
                getattr(params, name)[...] -= lr * getattr(grads, name)
        train_acc = accuracy(params, train_set)
        if validation_set is not None and len(validation_set):
            val_acc = accuracy(params, validation_set)
        else:
            val_acc = train_acc
        row = {'epoch': epoch, 'loss': total / len(train_set), 'train_acc': train_acc, 'val_acc': val_acc}
        result.history.append(row)
        if on_epoch:
            on_epoch(row)
        if val_acc > result.best_val_acc:
            result.params, result.best_epoch, result.best_val_acc = params.copy(), epoch, val_acc
    return result


def weights_info_path(path: str) -> str:
    return os.path.splitext(path)[0] + '.json'


def ensure_weights(path: str, assets: Optional[FcAssets] = None, seed: int = config.DEFAULT_WEIGHTS_SEED,
                   subsample: Optional[float] = config.DEFAULT_WEIGHTS_SUBSAMPLE,
                   epochs: int = config.TRAIN_EPOCHS) -> MlpParams:
    """Lee los pesos de `path`; si no existen entrena la red con semilla fija y los guarda.

    Junto a los pesos se escribe `<nombre>.json` con la semilla, la fracción
    del conjunto, la mejor época y la precisión de validación.
    """
    if os.path.exists(path):
        return storage.read_weights(path)
    log.warning(f'no hay pesos en {path}: entrenando la red (seed={seed}, subsample={subsample})')
    train_set, val_set = generate_dataset(seed=seed, assets=assets, subsample=subsample)
    result = train(train_set, val_set, epochs=epochs, seed=seed)
    if result.best_val_acc < config.MIN_VAL_ACC:
        log.warning(f'precisión de validación {result.best_val_acc:.4f} por debajo de {config.MIN_VAL_ACC}')
    storage.write_weights(path, result.params)
    storage.write_manifest(weights_info_path(path), {
        'seed': seed, 'subsample': subsample, 'epochs': epochs, 'best_epoch': result.best_epoch,
        'val_acc': result.best_val_acc, 'train_size': len(train_set), 'val_size': len(val_set),
        'sha256': storage.sha256_file(path)})
    log.info(f'pesos guardados en {path} (val_acc={result.best_val_acc:.4f}, época {result.best_epoch})')
    return result.params


# ---------------------------------------------------------------------------
# Clasificación
# ---------------------------------------------------------------------------

def classify_1d(values: np.ndarray, assets: Optional[FcAssets], params: MlpParams,
                periodic: bool = False, delta_fraction: float = config.CLASSIFY_DELTA_FRACTION) -> np.ndarray:
    batch = preprocess_stencils(values, assets, delta_fraction, periodic=periodic)
    tau = predict_classes(params, batch.values.reshape(-1, len(OFFSETS))).reshape(batch.degenerate.shape)
    tau[batch.degenerate] = 4
    return tau.astype(np.int8)


def classify_2d(values: np.ndarray, assets: FcAssets, params: MlpParams,
                mask: Optional[np.ndarray] = None) -> np.ndarray:
    fn = lambda blk: classify_1d(blk, assets, params)
    tau_x = map_sections(values, mask, 0, fn, min_len=len(OFFSETS))
    tau_y = map_sections(values, mask, 1, fn, min_len=len(OFFSETS))
    tau = np.minimum(tau_x, tau_y).astype(np.int8)
    if mask is not None:
        tau[~mask] = 4
    return tau
