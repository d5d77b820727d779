"""Viscosidad artificial: ventana q_{c,r}, operador de localización Lambda,
mapas de pesos R, cotas de velocidad de onda (MWSB), viscosidad SDNN y la
viscosidad de entropía (EV) de referencia.
"""
import logging
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from . import config
from .app.models import EquationSpec, EvParams, FlowState, WindowSpec
from .equations import Differentiator, entropy_pair, primitive_quantities
from .fc_core import map_sections

log = logging.getLogger('viscosity')

WEIGHTS_1D = {1: 2.0, 2: 1.0, 3: 0.0, 4: 0.0}
WEIGHTS_2D = {1: 1.5, 2: 1.0, 3: 0.5, 4: 0.0}
STENCIL = 7


def window_q(x, spec: WindowSpec, h: float):
    if h <= 0:
        raise ValueError(f'h debe ser positivo ({h})')
    ax = np.abs(np.asarray(x, dtype=float))
    flat = spec.c * h / 2.0
    edge = spec.support_radius(h)
    rise = np.cos(np.pi * (ax - flat) / (2.0 * spec.r * h)) ** 2
    out = np.where(ax < flat, 1.0, np.where(ax < edge, rise, 0.0))
    return out[()] if out.ndim == 0 else out


def window_weights(spec: WindowSpec) -> np.ndarray:
    R = int(np.ceil(spec.radius_cells()))
    return window_q(np.arange(-R, R + 1, dtype=float), spec, 1.0)


def lambda_1d(b: np.ndarray, spec: WindowSpec = WindowSpec(), periodic: bool = False) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    N = b.shape[-1]
    if N <= 2 * spec.radius_cells():
        raise ValueError(f'malla demasiado pequeña para la ventana (N={N}, radio={spec.radius_cells()})')
    w = window_weights(spec)
    if periodic:
        return ndimage.convolve1d(b / w.sum(), w, axis=-1, mode='wrap')
    # cada columna de la ventana normalizada suma 1 dentro del dominio
    norm = ndimage.convolve1d(np.ones(N), w, mode='constant', cval=0.0)
    return ndimage.convolve1d(b / norm, w, axis=-1, mode='constant', cval=0.0)


def lambda_2d(b: np.ndarray, spec: WindowSpec = WindowSpec(), mask: Optional[np.ndarray] = None) -> np.ndarray:
    out = map_sections(b, mask, 0, lambda blk: lambda_1d(blk, spec))
    return map_sections(out, mask, 1, lambda blk: lambda_1d(blk, spec))


def stencil_max_1d(S: np.ndarray, periodic: bool = False) -> np.ndarray:
    """Máximo sobre el estencil de 7 puntos L^i (recortado hacia dentro en los extremos)."""
    S = np.asarray(S, dtype=float)
    if periodic:
        return ndimage.maximum_filter1d(S, size=STENCIL, axis=-1, mode='wrap')
    N = S.shape[-1]
    if N < STENCIL:
        raise ValueError(f'se necesitan al menos {STENCIL} puntos (N={N})')
    win = sliding_window_view(S, STENCIL, axis=-1).max(axis=-1)
    start = np.clip(np.arange(N) - STENCIL // 2, 0, N - STENCIL)
    return win[..., start]


def stencil_max_2d(S: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
    out = map_sections(S, mask, 0, stencil_max_1d, min_len=STENCIL)
    return map_sections(out, mask, 1, stencil_max_1d, min_len=STENCIL)


def weight_map(tau: np.ndarray, dim: int) -> np.ndarray:
    table = WEIGHTS_1D if dim == 1 else WEIGHTS_2D
    tau = np.asarray(tau)
    if np.any((tau < 1) | (tau > 4)):
        raise ValueError('clase de suavidad fuera de {1,2,3,4}')
    lut = np.array([np.nan] + [table[k] for k in (1, 2, 3, 4)])
    return lut[tau.astype(int)]


def mwsb(state: FlowState, equation: EquationSpec, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Cota de la máxima velocidad característica en cada punto."""
    c = state.conserved
    if equation.kind == 'advection':
        return np.full(c.shape[1:], abs(equation.a))
    if equation.kind in ('burgers1d', 'burgers2d'):
        return np.abs(c[0])
    prim = primitive_quantities(state, equation, mask)
    if equation.kind == 'euler1d':
        return np.abs(prim.u) + prim.a
    return np.abs(prim.u) + np.abs(prim.v) + prim.a


def sdnn_viscosity(tau: np.ndarray, state: FlowState, equation: EquationSpec, h: float,
                   periodic: bool = False, mask: Optional[np.ndarray] = None,
                   spec: WindowSpec = WindowSpec(config.VISC_WINDOW_C, config.VISC_WINDOW_R),
                   speed: Optional[np.ndarray] = None) -> np.ndarray:
    S = mwsb(state, equation, mask) if speed is None else speed
    b = weight_map(tau, equation.dim)
    if equation.dim == 1:
        mu = lambda_1d(b, spec, periodic) * stencil_max_1d(S, periodic) * h
    else:
        mu = lambda_2d(b, spec, mask) * stencil_max_2d(S, mask) * h
        if mask is not None:
            mu[~mask] = 0.0
    return mu


def ev_viscosity(state_now: FlowState, state_prev: Optional[FlowState], dt: float, params: EvParams,
                 h: float, equation: EquationSpec, diff: Differentiator) -> np.ndarray:
    mask = diff.mask
    eta, nus, C = entropy_pair(state_now, equation, mask)
    region = np.ones(eta.shape, dtype=bool) if mask is None else mask
    mu_max = params.c_max * h * float(np.max(np.abs(C[region])))
    if state_prev is None or dt <= 0:
        # sin paso previo no hay residuo: viscosidad máxima
        mu = np.full(eta.shape, mu_max)
    else:
        eta_prev, _, _ = entropy_pair(state_prev, equation, mask)
        residual = (eta - eta_prev) / dt + diff.divergence(nus)
        if equation.is_euler:
            norm = np.ones_like(eta)
        else:
            norm = np.abs(eta - float(np.mean(eta[region])))
        ok = norm >= config.EV_NORM_FLOOR
        mu_e = np.full(eta.shape, mu_max)
        np.divide(params.c_E * h ** 2 * np.abs(residual), norm, out=mu_e, where=ok)
        mu = np.minimum(mu_max, mu_e)
    if mask is not None:
        mu[~mask] = 0.0
    return mu
