"""Continuación de Fourier FC-Gram y operaciones espectrales sobre mallas uniformes.

Convenciones:
- Los valores se procesan siempre sobre el último eje, de modo que un bloque
  (..., N) representa varias líneas de malla a la vez.
- El vector extendido tiene N + C puntos y es exactamente un periodo,
  beta = (N + C) * h.
- `periodic=True` omite la continuación y trabaja con la FFT de los N valores
  (x_N identificado con x_0).
"""
import functools
import logging
import os
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft
from scipy import linalg

from . import config
from .app.models import FcAssets, SpectralCoeffs, WindowSpec
from .errors import FcAssetError

log = logging.getLogger('fc_core')


# ---------------------------------------------------------------------------
# Generación de activos
# ---------------------------------------------------------------------------

def _gram_basis(d: int) -> Tuple[np.ndarray, np.ndarray]:
    s = np.arange(d, dtype=float)
    V = np.vander(s / (d - 1), d, increasing=True)
    Q, R = np.linalg.qr(V)
    sign = np.sign(np.diag(R))
    sign[sign == 0] = 1.0
    return Q * sign, R * sign[:, None]


def _gram_eval(t: np.ndarray, R: np.ndarray, deriv: bool = False) -> np.ndarray:
    """Polinomios de Gram (o su derivada en unidades de malla) evaluados en t."""
    d = R.shape[0]
    z = np.atleast_1d(np.asarray(t, dtype=float)) / (d - 1)
    k = np.arange(d)
    if deriv:
        V = np.where(k > 0, k * z[:, None] ** np.maximum(k - 1, 0), 0.0) / (d - 1)
    else:
        V = z[:, None] ** k
    # V @ inv(R)
    return linalg.solve_triangular(R, V.T, trans='T', lower=False).T


def _blend_to_zero(targets: Callable[[np.ndarray], np.ndarray], d: int, C: int,
                   period: int, oversample: int) -> Tuple[Callable[[np.ndarray], np.ndarray], float, float]:
    """Ajuste trigonométrico por mínimos cuadrados truncado por SVD.

    Reproduce `targets` en [0, d-1] y se anula en [d+C, 2d+C-1]; el tramo
    intermedio es la zona de continuación.
    """
    n_fit = (d - 1) * oversample + 1
    t_poly = np.linspace(0.0, d - 1.0, n_fit)
    t_zero = np.linspace(d + C, 2.0 * d + C - 1, n_fit)
    kmax = period // 4
    k = np.arange(kmax + 1)

    def basis(t):
        w = 2.0 * np.pi * np.outer(t, k) / period
        return np.hstack([np.cos(w), np.sin(w[:, 1:])])

    A = np.vstack([basis(t_poly), basis(t_zero)])
    B = np.vstack([targets(t_poly), np.zeros((n_fit, d))])
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    keep = sv > config.SVD_CUTOFF * sv[0]
    coef = Vt[keep].T @ ((U[:, keep].T @ B) / sv[keep, None])
    resid = float(np.max(np.abs(A @ coef - B)))
    cond = float(sv[0] / sv[keep][-1])
    return (lambda t: basis(np.asarray(t, dtype=float)) @ coef), resid, cond


def generate_fc_assets(d: int, C: int = config.DEFAULT_C, oversample: int = config.DEFAULT_OVERSAMPLE,
                       extension_margin: Optional[int] = None) -> FcAssets:
    if d < 2:
        raise FcAssetError(f'd debe ser >= 2 (d={d})')
    if C < 2 * d:
        raise FcAssetError(f'C debe ser >= 2d (C={C}, d={d})')
    if oversample < 20:
        raise FcAssetError(f'oversample debe ser >= 20 ({oversample})')
    margin = C if extension_margin is None else int(extension_margin)
    if margin < 0:
        raise FcAssetError(f'extension_margin negativo ({margin})')
    period = 2 * d + C + margin

    Q, R = _gram_basis(d)
    right, res_r, cond_r = _blend_to_zero(lambda t: _gram_eval(t, R), d, C, period, oversample)
    left, res_l, cond_l = _blend_to_zero(lambda u: _gram_eval((d - 1) - u, R), d, C, period, oversample)
    resid, cond = max(res_r, res_l), max(cond_r, cond_l)
    if not np.isfinite(resid) or resid > config.FIT_TOLERANCE:
        raise FcAssetError(f'ajuste mal condicionado: residuo={resid:.3e} cond~{cond:.3e} (d={d}, C={C})')
    log.info(f'activos FC d={d} C={C}: residuo={resid:.2e} cond~{cond:.2e}')

    e = np.arange(C)
    A_right = right(d + e)
    A_left = left(d + C - 1 - e)

    # Neumann: d-1 valores + derivada (por unidad de malla) en el extremo
    M = np.vstack([Q[:d - 1], _gram_eval([d - 1.0], R, deriv=True)])
    Q_neumann = np.linalg.inv(M).T
    return FcAssets(d=d, C=C, Q=Q, Q_neumann=Q_neumann, A_left=A_left, A_right=A_right)


@functools.lru_cache(maxsize=8)
def _cached_assets(d: int, C: int, asset_dir: str) -> FcAssets:
    from . import storage
    path = storage.fc_asset_path(d, C, asset_dir)
    if os.path.exists(path):
        return storage.read_fc_assets(path)
    log.info(f'no existe {path}; generando activos')
    assets = generate_fc_assets(d, C)
    try:
        storage.write_fc_assets(path, assets)
    except OSError:
        log.warning(f'no se pudo cachear {path}')
    return assets


def load_assets(d: int, C: int = config.DEFAULT_C, asset_dir: Optional[str] = None) -> FcAssets:
    """Carga los activos del disco (o los genera y cachea si faltan)."""
    return _cached_assets(int(d), int(C), asset_dir or config.ASSET_DIR)


# ---------------------------------------------------------------------------
# Continuación y operaciones espectrales
# ---------------------------------------------------------------------------

def continuation(values: np.ndarray, assets: FcAssets) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    N, d = v.shape[-1], assets.d
    if N < 2 * d:
        raise ValueError(f'continuación requiere N >= 2d (N={N}, d={d})')
    ext = v[..., :d] @ assets.left_map.T + v[..., N - d:] @ assets.right_map.T
    return np.concatenate([v, ext], axis=-1)


def neumann_boundary_value(values: np.ndarray, derivative, h: float, assets: FcAssets,
                           side: str = 'right') -> np.ndarray:
    """Valor de frontera compatible con una derivada prescrita.

    Usa los d-1 valores interiores junto al extremo; `values` es la línea
    completa (..., N) y `derivative` la derivada física en el extremo.
    """
    Qn = assets.Q_neumann
    if Qn is None or Qn.size == 0:
        raise FcAssetError('faltan activos Neumann')
    v = np.asarray(values, dtype=float)
    d = assets.d
    dh = np.asarray(derivative, dtype=float) * h
    if side == 'right':
        interior = v[..., v.shape[-1] - d:-1]
    elif side == 'left':
        interior = v[..., d - 1:0:-1]
        dh = -dh
    else:
        raise ValueError(f'lado desconocido: {side}')
    rhs = np.concatenate([interior, np.broadcast_to(dh, interior.shape[:-1])[..., None]], axis=-1)
    return (rhs @ Qn) @ assets.Q[d - 1]


def continuation_neumann(values: np.ndarray, end_derivative, assets: FcAssets, h: float,
                         side: str = 'right') -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if side == 'right':
        full = np.concatenate([v, np.zeros(v.shape[:-1] + (1,))], axis=-1)
        full[..., -1] = neumann_boundary_value(full, end_derivative, h, assets, 'right')
    else:
        full = np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)
        full[..., 0] = neumann_boundary_value(full, end_derivative, h, assets, 'left')
    return continuation(full, assets)


def _extend(values: np.ndarray, assets: Optional[FcAssets], periodic: bool) -> np.ndarray:
    if periodic:
        return np.asarray(values, dtype=float)
    return continuation(values, assets)


def fc_coefficients(values: np.ndarray, assets: FcAssets, interval_length: float) -> SpectralCoeffs:
    """Coeficientes k = -M..M de la serie FC de una línea."""
    ext = continuation(values, assets)
    n = ext.shape[-1]
    h = interval_length / (np.asarray(values).shape[-1] - 1)
    full = np.fft.fftshift(sfft.fft(ext, axis=-1) / n, axes=-1)
    M = (n - 1) // 2 if n % 2 else n // 2 - 1
    centre = n // 2
    return SpectralCoeffs(coeffs=full[..., centre - M:centre + M + 1], beta=n * h, M=M)


def fc_derivative(values: np.ndarray, assets: Optional[FcAssets], interval_length: float,
                  periodic: bool = False) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    N = v.shape[-1]
    h = interval_length / N if periodic else interval_length / (N - 1)
    ext = _extend(v, assets, periodic)
    n = ext.shape[-1]
    coeffs = sfft.rfft(ext, axis=-1)
    mult = 2j * np.pi * np.arange(coeffs.shape[-1]) / (n * h)
    if n % 2 == 0:
        # coeficiente de Nyquist sin pareja: se descarta
        mult[-1] = 0.0
    return sfft.irfft(coeffs * mult, n, axis=-1)[..., :N]


def fc_shifted_eval(values: np.ndarray, assets: Optional[FcAssets], delta_fraction: float,
                    periodic: bool = False) -> np.ndarray:
    """Serie FC evaluada en los N+C nodos extendidos desplazados delta_fraction*h."""
    if not 0.0 <= delta_fraction <= 1.0:
        raise ValueError(f'delta_fraction fuera de [0, 1]: {delta_fraction}')
    ext = _extend(values, assets, periodic)
    if delta_fraction == 0.0:
        return ext.copy()
    n = ext.shape[-1]
    coeffs = sfft.rfft(ext, axis=-1)
    phase = np.exp(2j * np.pi * np.arange(coeffs.shape[-1]) * delta_fraction / n)
    if n % 2 == 0:
        phase[-1] = 0.0
    return sfft.irfft(coeffs * phase, n, axis=-1)


def filter_factors(n: int, alpha_f: float, p_f: int) -> np.ndarray:
    """sigma(2k/n) = exp(-alpha (2k/n)^p) para k = 0..n//2."""
    eta = 2.0 * np.arange(n // 2 + 1) / n
    return np.exp(-alpha_f * eta ** p_f)


def global_filter(values: np.ndarray, assets: Optional[FcAssets], alpha_f: float = config.FILTER_ALPHA,
                  p_f: int = config.FILTER_ORDER, periodic: bool = False) -> np.ndarray:
    if alpha_f <= 0 or p_f <= 0 or p_f % 2:
        raise ValueError(f'parámetros de filtro inválidos: alpha={alpha_f} p={p_f}')
    v = np.asarray(values, dtype=float)
    N = v.shape[-1]
    ext = _extend(v, assets, periodic)
    n = ext.shape[-1]
    sigma = filter_factors(n, alpha_f, p_f)
    if n % 2 == 0:
        sigma[-1] = 0.0
    coeffs = sfft.rfft(ext, axis=-1) * sigma
    return sfft.irfft(coeffs, n, axis=-1)[..., :N]


def smear_window(x: np.ndarray, discontinuities: Iterable[float], spec: WindowSpec, h: float) -> np.ndarray:
    """Ventana combinada alrededor de las discontinuidades (grupos solapados fusionados)."""
    from .viscosity import window_q

    x = np.asarray(x, dtype=float)
    zs = sorted(float(z) for z in discontinuities)
    W = np.zeros_like(x)
    if not zs:
        return W
    reach = 2.0 * spec.support_radius(h)
    groups = [[zs[0], zs[0]]]
    for z in zs[1:]:
        if z - groups[-1][1] < reach:
            groups[-1][1] = z
        else:
            groups.append([z, z])
    for za, zb in groups:
        g = np.where(x < za, window_q(x - za, spec, h), np.where(x > zb, window_q(x - zb, spec, h), 1.0))
        W = np.maximum(W, g)
    return W


def localized_smear(values: np.ndarray, x: np.ndarray, discontinuities: Sequence[float],
                    assets: Optional[FcAssets], c: int = config.SMEAR_C, r: int = config.SMEAR_R,
                    alpha_f: float = config.SMEAR_ALPHA, p_f: int = config.SMEAR_ORDER,
                    periodic: bool = False) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float)
    if v.shape[-1] == 0 or x.size == 0:
        raise ValueError('dominio vacío')
    if len(discontinuities) == 0:
        return v.copy()
    lo, hi = x[0], x[-1]
    for z in discontinuities:
        if not lo <= z <= hi:
            raise ValueError(f'discontinuidad fuera del dominio: {z}')
    h = x[1] - x[0]
    W = smear_window(x, discontinuities, WindowSpec(c, r), h)
    smooth = global_filter(v, assets, alpha_f, p_f, periodic=periodic)
    return np.where(W > 0, W * smooth + (1.0 - W) * v, v)


# ---------------------------------------------------------------------------
# Tramos de línea en mallas 2D (dominios con máscara)
# ---------------------------------------------------------------------------

def line_sections(mask: np.ndarray, axis: int) -> Dict[Tuple[int, int], np.ndarray]:
    """Agrupa los tramos contiguos activos a lo largo de `axis` por (inicio, fin)."""
    m = np.asarray(mask, dtype=bool)
    m = m if axis == 0 else m.T
    groups: Dict[Tuple[int, int], list] = {}
    for line in range(m.shape[1]):
        col = np.concatenate([[0], m[:, line].astype(np.int8), [0]])
        jumps = np.diff(col)
        for a, b in zip(np.flatnonzero(jumps == 1), np.flatnonzero(jumps == -1)):
            groups.setdefault((int(a), int(b)), []).append(line)
    return {k: np.asarray(v) for k, v in groups.items()}


def map_sections(field: np.ndarray, mask: Optional[np.ndarray], axis: int,
                 fn: Callable[[np.ndarray], np.ndarray], min_len: int = 1) -> np.ndarray:
    """Aplica `fn` (sobre el último eje) a cada tramo de línea de un campo (..., N1, N2)."""
    f = np.asarray(field, dtype=float)
    if mask is None:
        mask = np.ones(f.shape[-2:], dtype=bool)
    out = np.zeros_like(f)
    src = np.moveaxis(f, f.ndim - 2 + axis, -1)
    dst = np.moveaxis(out, out.ndim - 2 + axis, -1)
    for (a, b), lines in line_sections(mask, axis).items():
        if b - a < min_len:
            raise ValueError(f'tramo de {b - a} puntos (< {min_len}) en el eje {axis}')
        dst[..., lines, a:b] = fn(src[..., lines, a:b])
    return out


def fc_derivative_2d(field: np.ndarray, h: float, axis: int, assets: FcAssets,
                     mask: Optional[np.ndarray] = None) -> np.ndarray:
    return map_sections(field, mask, axis,
                        lambda blk: fc_derivative(blk, assets, (blk.shape[-1] - 1) * h),
                        min_len=2 * assets.d)


def global_filter_2d(field: np.ndarray, assets: FcAssets, alpha_f: float, p_f: int,
                     mask: Optional[np.ndarray] = None) -> np.ndarray:
    out = map_sections(field, mask, 0, lambda blk: global_filter(blk, assets, alpha_f, p_f), 2 * assets.d)
    out = map_sections(out, mask, 1, lambda blk: global_filter(blk, assets, alpha_f, p_f), 2 * assets.d)
    if mask is None:
        return out
    # los nodos inactivos conservan su valor
    return np.where(mask, out, field)
