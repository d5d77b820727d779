"""Métricas de error, informes comparativos y la referencia de diferencias finitas de orden 6."""
import logging
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import storage
from .app.models import FcAssets, MlpParams, ProblemSpec, RunConfig, Snapshot
from .errors import ConfigError, GridMismatchError
from .timestepper import Solver, ssprk4_step

log = logging.getLogger('reports')

FD6_DT = 0.0034


def quadrature_weights(grid) -> np.ndarray:
    if grid is None:
        return None
    if hasattr(grid, 'N1'):
        wx = np.full(grid.N1, grid.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(grid.N2, grid.hy)
        wy[[0, -1]] *= 0.5
        return np.outer(wx, wy) * grid.active
    w = np.full(grid.N, grid.h)
    if not grid.periodic:
        w[[0, -1]] *= 0.5
    return w


def total_variation(values: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        return float(np.sum(np.abs(np.diff(v))))
    m = np.ones(v.shape, dtype=bool) if mask is None else mask
    dx = np.abs(np.diff(v, axis=0))[m[1:] & m[:-1]]
    dy = np.abs(np.diff(v, axis=1))[m[:, 1:] & m[:, :-1]]
    return float(dx.sum() + dy.sum())


def error_metrics(numeric: np.ndarray, oracle: np.ndarray, grid=None) -> Dict[str, float]:
    """Normas L1, L2, Linf ponderadas por la malla y variación total del campo numérico."""
    a = np.asarray(numeric, dtype=float)
    b = np.asarray(oracle, dtype=float)
    if a.shape != b.shape:
        raise GridMismatchError(f'formas incompatibles: {a.shape} != {b.shape}')
    err = np.abs(a - b)
    w = quadrature_weights(grid)
    mask = getattr(grid, 'mask', None)
    if w is None:
        w = np.full(a.shape, 1.0 / a.size)
    if w.shape != a.shape:
        raise GridMismatchError(f'la malla {w.shape} no coincide con el campo {a.shape}')
    active = w > 0
    measure = float(np.sum(w))
    L1 = float(np.sum(w * err))
    return {
        'L1': L1,
        'L1_mean': L1 / measure if measure else 0.0,
        'L2': float(np.sqrt(np.sum(w * err ** 2))),
        'Linf': float(np.max(err[active])) if active.any() else 0.0,
        'TV': total_variation(a, mask),
    }


def snapshot_oracle(snapshots: Sequence[Snapshot]) -> Callable:
    """Oráculo a partir de las instantáneas de otra ejecución sobre la misma malla."""
    table = {round(s.t, 12): s.fields for s in snapshots}

    def oracle(grid, t):
        key = round(t, 12)
        if key not in table:
            raise GridMismatchError(f'no hay instantánea de referencia en t={t:.6g}')
        return table[key]
    return oracle


def compare_report(runs: Dict[str, Sequence[Snapshot]], oracle: Callable, grid,
                   fields: Optional[Sequence[str]] = None, path: Optional[str] = None) -> List[Dict[str, object]]:
    """Tabla tiempo x método x campo con L1/L2/Linf/TV."""
    if not runs:
        raise ConfigError('no hay ejecuciones que comparar')
    times = None
    for method, snaps in runs.items():
        ts = [round(s.t, 12) for s in snaps]
        if times is None:
            times = ts
        elif ts != times:
            raise GridMismatchError(f'{method}: tiempos {ts} distintos de {times}')
    rows = []
    for k, t in enumerate(times):
        ref = oracle(grid, t)
        for method, snaps in runs.items():
            snap = snaps[k]
            for name in fields or [f for f in snap.fields if f in ref]:
                m = error_metrics(snap.fields[name], ref[name], grid)
                rows.append({'time': float(t), 'method': method, 'field': name,
                             'L1': m['L1'], 'L2': m['L2'], 'Linf': m['Linf'], 'TV': m['TV']})
    if path:
        storage.write_rows_csv(path, rows)
        log.info(f'informe con {len(rows)} filas en {path}')
    return rows


# --- referencia FD6 --------------------------------------------------------

def fd6_derivative(u: np.ndarray, h: float) -> np.ndarray:
    """Diferencias centradas de orden 6 sobre una malla periódica."""
    r = lambda k: np.roll(u, -k, axis=-1)
    return (-r(-3) + 9 * r(-2) - 45 * r(-1) + 45 * r(1) - 9 * r(2) + r(3)) / (60.0 * h)


def fd6_baseline(problem: ProblemSpec, n: int, t_end: float, dt: float = FD6_DT) -> Snapshot:
    if problem.id != 'advection-periodic':
        raise ConfigError(f'fd6-baseline sólo admite advection-periodic (recibido {problem.id})')
    if dt <= 0 or t_end <= 0:
        raise ConfigError('dt y t_end deben ser positivos')
    grid = problem.build_grid(n, None)
    a = problem.equation.a
    u = problem.initial_state(grid).conserved[0].copy()
    rhs = lambda v, t: -a * fd6_derivative(v, grid.h)
    t, steps = 0.0, 0
    while t < t_end:
        step = min(dt, t_end - t)
        u = ssprk4_step(u, t, step, rhs, step=steps)
        t = t_end if step < dt else t + step
        steps += 1
    log.info(f'fd6: {steps} pasos con dt={dt} hasta t={t:.6g}')
    return Snapshot(t=t, fields={'u': u})


# --- referencia fina autogenerada ---------------------------------------------

def self_reference(problem: ProblemSpec, cfg: RunConfig, assets: FcAssets, mlp: Optional[MlpParams],
                   n_ref: int = 10000) -> Callable:
    """Oráculo 1D: misma ejecución en una malla fina, interpolada linealmente."""
    if problem.equation.dim != 1:
        raise ConfigError('la referencia fina sólo está disponible en 1D')
    fine_cfg = replace(cfg, n=n_ref, dump_viscosity=False, dump_oracle=False, out_dir=None)
    solver = Solver(problem, fine_cfg, assets, mlp)
    snaps = solver.run().snapshots
    table = {round(s.t, 12): s.fields for s in snaps}
    x_ref = solver.grid.x

    def oracle(grid, t):
        key = round(t, 12)
        if key not in table:
            raise GridMismatchError(f'la referencia no tiene t={t:.6g}')
        return {name: np.interp(grid.x, x_ref, vals) for name, vals in table[key].items()}
    return oracle
