"""Avance temporal del solver.

- `adaptive_dt`: paso CFL a partir de la cota de velocidad de onda y de mu.
- `ssprk4_step`: SSPRK(5,4) en forma Shu-Osher, con las condiciones de
  contorno impuestas en cada etapa antes de evaluar L.
- `BoundaryEnforcer`: asigna una condición a cada extremo de tramo de línea y
  la impone sobrescribiendo los valores de frontera.
- `Solver`: bucle completo (clasificar, viscosidad, suavizado/filtro, dt, paso).
"""
import logging
import os
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from . import config
from . import storage
from .app.models import (BoundaryCondition, EquationSpec, EvParams, FcAssets, FlowState, MlpParams,
                         ProblemSpec, RunConfig, RunResult, Snapshot, WindowSpec)
from .equations import Differentiator, pressure, primitive_quantities, proxy_variable, spatial_operator
from .errors import ConfigError, NumericalFailure, StateValidityError
from .fc_core import (fc_derivative_2d, global_filter, global_filter_2d, line_sections, localized_smear,
                      neumann_boundary_value)
from .sdnn import classify_1d, classify_2d
from .viscosity import ev_viscosity, mwsb, sdnn_viscosity

log = logging.getLogger('timestepper')


# ---------------------------------------------------------------------------
# Paso de tiempo
# ---------------------------------------------------------------------------

def adaptive_dt(S, mu, cfl: float, h: float, mask: Optional[np.ndarray] = None) -> float:
    """dt = CFL / (pi * (max S / h + max mu / h^2))."""
    if h <= 0:
        raise ValueError(f'h debe ser positivo ({h})')
    if cfl <= 0:
        raise ValueError(f'cfl debe ser positivo ({cfl})')
    S = np.abs(np.asarray(S, dtype=float))
    mu = np.zeros(1) if mu is None else np.asarray(mu, dtype=float)
    if mask is not None:
        S = S[mask] if S.shape == mask.shape else S
        mu = mu[mask] if mu.shape == mask.shape else mu
    s_max = float(np.max(S)) if S.size else 0.0
    mu_max = float(np.max(mu)) if mu.size else 0.0
    denom = np.pi * (s_max / h + mu_max / h ** 2)
    if not np.isfinite(denom):
        raise NumericalFailure('velocidad de onda o viscosidad no finita', field='dt')
    if denom <= 0.0:
        raise NumericalFailure('estado trivial estacionario: max S = max mu = 0', field='dt')
    return cfl / denom


# SSPRK(5,4): u_k = sum a_kj u_j + sum b_kj dt L(u_j)
SSP_STAGES = (
    ((1.0,), (0.391752226571890,)),
    ((0.444370493651235, 0.555629506348765), (0.0, 0.368410593050371)),
    ((0.620101851488403, 0.0, 0.379898148511597), (0.0, 0.0, 0.251891774271694)),
    ((0.178079954393132, 0.0, 0.0, 0.821920045606868), (0.0, 0.0, 0.0, 0.544974750228521)),
    ((0.0, 0.0, 0.517231671970585, 0.096059710526147, 0.386708617503269),
     (0.0, 0.0, 0.0, 0.063692468666290, 0.226007483236906)),
)


def ssprk4_step(u: np.ndarray, t: float, dt: float, rhs: Callable[[np.ndarray, float], np.ndarray],
                enforce: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
                step: Optional[int] = None) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f'dt debe ser positivo ({dt})')
    states, times, slopes = [np.asarray(u, dtype=float)], [float(t)], []
    for a, b in SSP_STAGES:
        k = len(states) - 1
        cur = states[k] if enforce is None else enforce(states[k], times[k])
        states[k] = cur
        L = rhs(cur, times[k])
        if not np.all(np.isfinite(L)):
            raise NumericalFailure('NaN/Inf en la evaluación de una etapa', step=step, time=times[k])
        slopes.append(L)
        nxt = sum(aj * sj for aj, sj in zip(a, states) if aj) + dt * sum(bj * Lj for bj, Lj in zip(b, slopes) if bj)
        states.append(nxt)
        times.append(sum(aj * tj for aj, tj in zip(a, times)) + dt * sum(b))
    out = states[-1] if enforce is None else enforce(states[-1], t + dt)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure('NaN/Inf en el estado tras el paso', step=step, time=t + dt)
    return out


# ---------------------------------------------------------------------------
# Condiciones de contorno
# ---------------------------------------------------------------------------

SIDE_AXIS = {'left': 0, 'right': 0, 'bottom': 1, 'top': 1}
# orden de aplicación: en las esquinas prevalecen las condiciones de izquierda/derecha
SIDE_ORDER = ('bottom', 'top', 'left', 'right')


@dataclass
class BoundarySegment:
    bc: BoundaryCondition
    side: str
    axis: int
    a: int
    b: int
    lines: Optional[np.ndarray] = None

    @property
    def node(self) -> int:
        return self.a if self.side in ('left', 'bottom') else self.b - 1

    @property
    def index(self):
        if self.lines is None:
            return (slice(None), self.node)
        if self.axis == 0:
            return (slice(None), self.node, self.lines)
        return (slice(None), self.lines, self.node)


class BoundaryEnforcer:
    """Impone las condiciones de contorno sobrescribiendo los nodos extremos de cada tramo."""

    def __init__(self, bcs: List[BoundaryCondition], grid, equation: EquationSpec,
                 assets: Optional[FcAssets], initial: np.ndarray):
        self.grid = grid
        self.equation = equation
        self.assets = assets
        self.initial = np.array(initial, dtype=float)
        self.gamma = equation.gamma
        self.mask = getattr(grid, 'mask', None)
        self.segments: List[BoundarySegment] = []
        if getattr(grid, 'periodic', False):
            if bcs:
                raise ConfigError('una malla periódica no admite condiciones de contorno')
            return
        for bc in bcs:
            if bc.kind not in BoundaryCondition.KINDS:
                raise ConfigError(f'tipo de condición desconocido: {bc.kind}')
            if bc.side not in SIDE_AXIS:
                raise ConfigError(f'lado desconocido: {bc.side}')
        if hasattr(grid, 'N1'):
            self._assign_2d(bcs)
        else:
            self._assign_1d(bcs)
        self.segments.sort(key=lambda s: SIDE_ORDER.index(s.side))

    def _pick(self, bcs, side, x, y) -> List[np.ndarray]:
        cands = [bc for bc in bcs if bc.side == side]
        picks = []
        for bc in cands:
            sel = np.ones(np.broadcast(x, y).shape, dtype=bool) if bc.where is None else \
                np.broadcast_to(np.asarray(bc.where(x, y), dtype=bool), np.broadcast(x, y).shape)
            picks.append(sel)
        count = np.sum(picks, axis=0) if picks else np.zeros(np.broadcast(x, y).shape, dtype=int)
        if np.any(count != 1):
            bad = np.flatnonzero(np.atleast_1d(count) != 1)[0]
            raise ConfigError(f'lado {side}: el nodo #{bad} tiene {int(np.atleast_1d(count)[bad])} condiciones (se requiere 1)')
        return list(zip(cands, picks))

    def _assign_1d(self, bcs):
        g = self.grid
        x = g.x
        for side, idx in (('left', 0), ('right', g.N - 1)):
            for bc, sel in self._pick(bcs, side, x[idx], 0.0):
                if bool(sel):
                    self.segments.append(BoundarySegment(bc, side, 0, 0, g.N))

    def _assign_2d(self, bcs):
        g = self.grid
        for side in SIDE_ORDER:
            axis = SIDE_AXIS[side]
            for (a, b), lines in line_sections(g.active, axis).items():
                node = a if side in ('left', 'bottom') else b - 1
                if axis == 0:
                    x, y = g.x0 + g.hx * node, g.y[lines]
                else:
                    x, y = g.x[lines], g.y0 + g.hy * node
                for bc, sel in self._pick(bcs, side, x, y):
                    sel = np.broadcast_to(sel, lines.shape)
                    if sel.any():
                        self.segments.append(BoundarySegment(bc, side, axis, a, b, lines[sel]))

    # --- imposición ---------------------------------------------------------

    def _kinetic(self, node: np.ndarray) -> np.ndarray:
        return 0.5 * np.sum(node[1:-1] ** 2, axis=0) / node[0]

    def _line_block(self, c: np.ndarray, seg: BoundarySegment) -> np.ndarray:
        if seg.lines is None:
            return c
        if seg.axis == 0:
            return np.moveaxis(c[:, seg.a:seg.b, seg.lines], 1, -1)
        return c[:, seg.lines, seg.a:seg.b]

    def _step_h(self, axis: int) -> float:
        g = self.grid
        if not hasattr(g, 'N1'):
            return g.h
        return g.hx if axis == 0 else g.hy

    def _neumann(self, c: np.ndarray, seg: BoundarySegment, derivative) -> np.ndarray:
        block = self._line_block(c, seg)
        g = np.asarray(derivative, dtype=float)
        if g.ndim == 1 and g.shape[0] == c.shape[0] and block.ndim > 2:
            g = g.reshape((-1,) + (1,) * (block.ndim - 2))
        fc_side = 'left' if seg.side in ('left', 'bottom') else 'right'
        return neumann_boundary_value(block, g, self._step_h(seg.axis), self.assets, fc_side)

    def apply(self, conserved: np.ndarray, t: float) -> np.ndarray:
        out = np.array(conserved, dtype=float)
        gm1 = self.gamma - 1.0
        tangential = None
        for seg in self.segments:
            kind, ix = seg.bc.kind, seg.index
            if kind == 'evolve':
                continue
            if kind == 'dirichlet':
                val = np.asarray(seg.bc.data(t), dtype=float)
                node = out[ix]
                if val.ndim == 1 and node.ndim == 2:
                    val = val[:, None]
                out[ix] = np.broadcast_to(val, node.shape)
            elif kind == 'neumann':
                deriv = seg.bc.data(t) if seg.bc.data is not None else 0.0
                out[ix] = self._neumann(out, seg, deriv)
            elif kind == 'oblique_neumann':
                if seg.axis != 1:
                    raise ConfigError('la condición oblicua sólo está definida en los lados inferior y superior')
                if tangential is None:
                    tangential = fc_derivative_2d(out, self.grid.hx, 0, self.assets, self.mask)
                theta = seg.bc.angle
                # s = (cos, sin): s.grad(e) = 0  =>  d_y e = -(cos/sin) d_x e
                normal = -(np.cos(theta) / np.sin(theta)) * tangential[:, seg.lines, seg.node]
                out[ix] = self._neumann(out, seg, normal)
            elif kind == 'inflow':
                node, init = out[ix], self.initial[ix]
                p = gm1 * (node[-1] - self._kinetic(node))
                node[0] = init[0]
                node[1:-1] = init[1:-1]
                node[-1] = p / gm1 + self._kinetic(node)
                out[ix] = node
            elif kind == 'outflow':
                node, init = out[ix], self.initial[ix]
                p0 = gm1 * (init[-1] - self._kinetic(init))
                node[-1] = p0 / gm1 + self._kinetic(node)
                out[ix] = node
            elif kind == 'reflecting':
                node = out[ix]
                comp = 1 + seg.axis
                if self.equation.is_euler:
                    p = gm1 * (node[-1] - self._kinetic(node))
                    node[comp] = 0.0
                    node[-1] = p / gm1 + self._kinetic(node)
                else:
                    node[:] = 0.0
                out[ix] = node
        return out

    __call__ = apply


def enforce_bc(conserved: np.ndarray, enforcer: BoundaryEnforcer, t_stage: float) -> np.ndarray:
    return enforcer.apply(conserved, t_stage)


# ---------------------------------------------------------------------------
# Bucle del solver
# ---------------------------------------------------------------------------

class Solver:
    def __init__(self, problem: ProblemSpec, cfg: RunConfig, assets: FcAssets, mlp: Optional[MlpParams] = None):
        if cfg.method not in ('sdnn', 'ev', 'none'):
            raise ConfigError(f'método desconocido: {cfg.method}')
        if cfg.method == 'sdnn' and mlp is None:
            raise ConfigError('el método sdnn requiere pesos de la red')
        if cfg.cfl <= 0 or cfg.t_end <= 0:
            raise ConfigError(f'cfl y t_end deben ser positivos (cfl={cfg.cfl}, t_end={cfg.t_end})')
        self.problem = problem
        self.cfg = cfg
        self.assets = assets
        self.mlp = mlp
        self.equation = problem.equation
        self.grid = problem.build_grid(cfg.n, cfg.n2)
        self.periodic = bool(problem.periodic)
        self.mask = getattr(self.grid, 'mask', None)
        self.h = self.grid.h
        self.diff = Differentiator(self.grid, assets, self.periodic)
        self.window = WindowSpec(config.VISC_WINDOW_C, config.VISC_WINDOW_R)
        self.ev = EvParams(cfg.ev_c_max, cfg.ev_c_E)
        if problem.custom_init is not None:
            state = problem.custom_init(self.grid, assets, mlp, cfg)
        else:
            state = problem.initial_state(self.grid)
        self.state = FlowState(np.array(state.conserved, dtype=float), self.equation.gamma)
        self.bc = BoundaryEnforcer(problem.bcs, self.grid, self.equation, assets, self.state.conserved)
        self.t = 0.0
        self.steps = 0
        self.prev: Optional[FlowState] = None
        self.prev_dt = 0.0
        self.mu = np.zeros(self.grid.shape)
        self.tau: Optional[np.ndarray] = None
        self.metrics: Dict[str, Dict[str, float]] = {}
        self.out_dir: Optional[str] = None

    # --- piezas del algoritmo ----------------------------------------------

    def classify(self, state: FlowState) -> np.ndarray:
        phi = proxy_variable(state, self.equation, self.mask)
        if self.equation.dim == 1:
            tau = classify_1d(phi, self.assets, self.mlp, periodic=self.periodic)
        else:
            tau = classify_2d(phi, self.assets, self.mlp, self.mask)
        k = self.problem.forced_tau_points
        if k and self.equation.dim == 1:
            tau[:k] = 1
            tau[-k:] = 1
        return tau

    def viscosity(self, state: FlowState):
        S = mwsb(state, self.equation, self.mask)
        method = self.cfg.method
        if method == 'sdnn':
            self.tau = self.classify(state)
            mu = sdnn_viscosity(self.tau, state, self.equation, self.h, self.periodic, self.mask,
                                self.window, speed=S)
        elif method == 'ev':
            mu = ev_viscosity(state, self.prev, self.prev_dt, self.ev, self.h, self.equation, self.diff)
        else:
            mu = np.zeros(self.grid.shape)
        return S, mu

    def smear(self, c: np.ndarray) -> np.ndarray:
        discs = self.problem.discontinuities
        if not discs:
            return c
        cfg = self.cfg
        kw = dict(c=cfg.smear_c, r=cfg.smear_r, alpha_f=cfg.smear_alpha, p_f=cfg.smear_order)
        if self.equation.dim == 1:
            return localized_smear(c, self.grid.x, list(discs), self.assets, periodic=self.periodic, **kw)
        out = c.copy()
        g = self.grid
        for axis, key in ((0, 'x'), (1, 'y')):
            jumps = discs.get(key)
            if jumps is None:
                continue
            coord, other = (g.x, g.y) if axis == 0 else (g.y, g.x)
            for (a, b), lines in line_sections(g.active, axis).items():
                seg = coord[a:b]
                groups: Dict[tuple, list] = {}
                for ln in lines:
                    zs = tuple(float(z) for z in jumps(other[ln]) if seg[0] <= z <= seg[-1])
                    if zs:
                        groups.setdefault(zs, []).append(ln)
                for zs, lns in groups.items():
                    lns = np.asarray(lns)
                    if axis == 0:
                        block = np.moveaxis(out[:, a:b, lns], 1, -1)
                        out[:, a:b, lns] = np.moveaxis(localized_smear(block, seg, zs, self.assets, **kw), -1, 1)
                    else:
                        out[:, lns, a:b] = localized_smear(out[:, lns, a:b], seg, zs, self.assets, **kw)
        return out

    def filter(self, c: np.ndarray) -> np.ndarray:
        a, p = self.cfg.filter_alpha, self.cfg.filter_order
        if self.equation.dim == 1:
            return global_filter(c, self.assets, a, p, periodic=self.periodic)
        return global_filter_2d(c, self.assets, a, p, self.mask)

    def _rhs(self, mu: np.ndarray):
        eq, method, diff = self.equation, self.cfg.method, self.diff
        return lambda u, t: spatial_operator(FlowState(u, eq.gamma), mu, eq, method, diff)

    def step(self, t_target: Optional[float] = None) -> float:
        """Un paso completo; si el dt alcanza t_target se recorta para aterrizar en él."""
        state = self.state
        try:
            S, mu = self.viscosity(state)
            c = state.conserved
            if self.steps == 0:
                c = self.smear(c)
            elif self.cfg.filter_enabled:
                c = self.filter(c)
            dt = adaptive_dt(S, mu, self.cfg.cfl, self.h, self.mask)
            landed = False
            if t_target is not None and dt >= t_target - self.t:
                dt, landed = t_target - self.t, True
            new = ssprk4_step(c, self.t, dt, self._rhs(mu), self.bc.apply, step=self.steps)
            if self.equation.is_euler:
                primitive_quantities(FlowState(new, self.equation.gamma), self.equation, self.mask)
        except NumericalFailure as e:
            if e.step is None:
                e.step = self.steps
            if e.time is None:
                e.time = self.t
            if isinstance(e, StateValidityError):
                self._dump_failure(e)
            raise
        self.mu = mu
        self.prev, self.prev_dt = state, dt
        self.state = FlowState(new, self.equation.gamma)
        self.t = t_target if landed else self.t + dt
        self.steps += 1
        if self.steps % max(1, self.cfg.log_every) == 0:
            log.info(f'[paso] n={self.steps} t={self.t:.6g} dt={dt:.4e} max_mu={float(np.max(mu)):.4e}')
        else:
            log.debug(f'[paso] n={self.steps} t={self.t:.6g} dt={dt:.4e}')
        return dt

    # --- instantáneas -------------------------------------------------------

    def dump_schedule(self) -> List[float]:
        T = self.cfg.t_end
        times = {float(t) for t in self.problem.dump_times if 0 < t < T}
        every = self.cfg.dump_every
        if every:
            k = 1
            while k * every < T - 1e-12:
                times.add(round(k * every, 12))
                k += 1
        times.add(float(T))
        return sorted(times)

    def fields(self, state: Optional[FlowState] = None) -> Dict[str, np.ndarray]:
        state = state or self.state
        if not self.equation.is_euler:
            return {'u': state.conserved[0].copy()}
        prim = primitive_quantities(state, self.equation, self.mask, check=False)
        out = {'rho': prim.rho.copy(), 'u': prim.u.copy()}
        if prim.v is not None:
            out['v'] = prim.v.copy()
        out['p'] = prim.p.copy()
        return out

    def snapshot(self) -> Snapshot:
        return Snapshot(t=self.t, fields=self.fields(),
                        mu=self.mu.copy() if self.cfg.dump_viscosity else None,
                        tau=None if self.tau is None else self.tau.copy())

    def _columns(self, values: np.ndarray) -> Dict[str, np.ndarray]:
        g = self.grid
        if not hasattr(g, 'N1'):
            return {'x': g.x, 'value': values}
        X, Y = g.mesh
        act = g.active
        return {'x': X[act], 'y': Y[act], 'value': values[act]}

    def write_snapshot(self, snap: Snapshot, out_dir: str) -> List[str]:
        files = []
        items = list(snap.fields.items())
        if snap.mu is not None:
            items.append(('mu', snap.mu))
            if snap.tau is not None:
                items.append(('tau', snap.tau.astype(float)))
        for name, values in items:
            path = os.path.join(out_dir, storage.snapshot_name(name, snap.t))
            storage.write_field_csv(path, self._columns(values))
            files.append(path)
        if self.cfg.dump_oracle and self.problem.oracle is not None and snap.t > 0:
            from .reports import error_metrics
            oracle = self.problem.oracle(self.grid, snap.t)
            for name, values in oracle.items():
                path = os.path.join(out_dir, storage.snapshot_name(name, snap.t, prefix='oracle_'))
                storage.write_field_csv(path, self._columns(values))
                files.append(path)
                if name in snap.fields:
                    m = error_metrics(snap.fields[name], values, self.grid)
                    self.metrics[f'{name}@{snap.t:.6g}'] = m
                    log.info(f'{name} t={snap.t:.6g}: L1={m["L1"]:.4e} Linf={m["Linf"]:.4e}')
        return files

    def _dump_failure(self, err: StateValidityError) -> None:
        if not self.out_dir or not err.field:
            return
        c = self.state.conserved
        values = c[0] if err.field == 'rho' else pressure(self.state)
        path = os.path.join(self.out_dir, f'failure_{err.field}.csv')
        try:
            storage.write_field_csv(path, self._columns(values))
            log.error(f'campo {err.field} volcado en {path}')
        except OSError:
            log.exception('no se pudo volcar el campo inválido')

    def run(self, out_dir: Optional[str] = None,
            on_snapshot: Optional[Callable[[Snapshot], None]] = None) -> RunResult:
        self.out_dir = out_dir
        started = time.time()
        snapshots: List[Snapshot] = []
        files: List[str] = []
        stopped = False
        for target in self.dump_schedule():
            while self.t < target:
                if self.cfg.max_steps is not None and self.steps >= self.cfg.max_steps:
                    log.warning(f'límite de {self.cfg.max_steps} pasos alcanzado en t={self.t:.6g}')
                    stopped = True
                    break
                self.step(target)
            snap = self.snapshot()
            snapshots.append(snap)
            if out_dir:
                files.extend(self.write_snapshot(snap, out_dir))
            if on_snapshot:
                on_snapshot(snap)
            if stopped:
                break
        log.info(f'{self.problem.id}: {self.steps} pasos hasta t={self.t:.6g} en {time.time() - started:.1f}s')
        return RunResult(snapshots=snapshots, steps=self.steps, final_state=self.state, grid=self.grid, files=files)


def run(cfg: RunConfig, problem: ProblemSpec, assets: FcAssets, mlp: Optional[MlpParams] = None,
        out_dir: Optional[str] = None) -> RunResult:
    return Solver(problem, cfg, assets, mlp).run(out_dir)
