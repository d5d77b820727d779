"""Registro de problemas de prueba y soluciones de referencia.

Cada problema se describe con un `ProblemSpec`: malla, condición inicial,
condiciones de contorno, CFL/T/d por defecto y la lista de discontinuidades
iniciales que usa el suavizado localizado. Los oráculos devuelven un dict
campo -> array sobre la misma malla.
"""
import logging
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .app.models import (BoundaryCondition, EquationSpec, FlowState, Grid1D, Grid2D, ProblemSpec,
                         RiemannSolution, WindowSpec)
from .equations import conserved_from_primitive
from .errors import ConfigError, VacuumError

log = logging.getLogger('problems')


# ---------------------------------------------------------------------------
# Funciones auxiliares
# ---------------------------------------------------------------------------

def bump(x, q1: float, q2: float) -> np.ndarray:
    """Función de corte omega(x, q1, q2), C-infinito en |x| = q1 y |x| = q2."""
    if q1 == q2:
        raise ValueError('q1 y q2 deben ser distintos')
    ax = np.abs(np.asarray(x, dtype=float))
    xi = (ax - q1) / (q2 - q1)
    inner = (xi > 0.0) & (xi < 1.0)
    xs = np.where(inner, xi, 0.5)
    with np.errstate(over='ignore', under='ignore'):
        ramp = np.exp(2.0 * np.exp(-1.0 / xs) / (xs - 1.0))
    out = np.where(xi <= 0.0, 1.0, np.where(xi >= 1.0, 0.0, ramp))
    return out[()] if out.ndim == 0 else out


def scan_discontinuities(values: np.ndarray, x: np.ndarray, threshold: float = config.SDNN_EPSILON,
                         dominance: float = 4.0) -> List[float]:
    """Saltos de un campo 1D: diferencias mayores que `threshold` que dominan a sus vecinas."""
    v = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float)
    jumps = np.abs(np.diff(v))
    if jumps.size == 0:
        return []
    neigh = np.maximum(np.concatenate([[0.0], jumps[:-1]]), np.concatenate([jumps[1:], [0.0]]))
    hit = (jumps > threshold) & (jumps > dominance * neigh)
    return [float(0.5 * (x[i] + x[i + 1])) for i in np.flatnonzero(hit)]


# ---------------------------------------------------------------------------
# Solver exacto de Riemann (Euler 1D)
# ---------------------------------------------------------------------------

def _pressure_fn(p: float, rho: float, pk: float, a: float, gamma: float) -> Tuple[float, float]:
    if p > pk:
        A = 2.0 / ((gamma + 1.0) * rho)
        B = (gamma - 1.0) / (gamma + 1.0) * pk
        root = np.sqrt(A / (p + B))
        return (p - pk) * root, root * (1.0 - 0.5 * (p - pk) / (B + p))
    ratio = p / pk
    f = 2.0 * a / (gamma - 1.0) * (ratio ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)
    df = ratio ** (-(gamma + 1.0) / (2.0 * gamma)) / (rho * a)
    return f, df


def solve_riemann(left: Sequence[float], right: Sequence[float], gamma: float = config.GAMMA,
                  tol: float = 1e-12, max_iter: int = 100) -> RiemannSolution:
    """Región estrella por Newton sobre la función de presión, partiendo de la estimación PVRS."""
    rl, ul, pl = (float(v) for v in left)
    rr, ur, pr = (float(v) for v in right)
    if min(rl, rr, pl, pr) <= 0:
        raise ValueError('densidades y presiones deben ser positivas')
    al, ar = np.sqrt(gamma * pl / rl), np.sqrt(gamma * pr / rr)
    if 2.0 / (gamma - 1.0) * (al + ar) <= ur - ul:
        raise VacuumError('los estados generan vacío')
    p = 0.5 * (pl + pr) - 0.125 * (ur - ul) * (rl + rr) * (al + ar)
    p = max(p, tol)
    for _ in range(max_iter):
        fl, dfl = _pressure_fn(p, rl, pl, al, gamma)
        fr, dfr = _pressure_fn(p, rr, pr, ar, gamma)
        p_new = p - (fl + fr + ur - ul) / (dfl + dfr)
        if p_new < 0:
            p_new = tol
        change = 2.0 * abs(p_new - p) / (p_new + p)
        p = p_new
        if change < tol:
            break
    else:
        log.warning(f'Newton sin converger en {max_iter} iteraciones')
    fl, _ = _pressure_fn(p, rl, pl, al, gamma)
    fr, _ = _pressure_fn(p, rr, pr, ar, gamma)
    u = 0.5 * (ul + ur) + 0.5 * (fr - fl)
    g = (gamma - 1.0) / (gamma + 1.0)
    e = (gamma - 1.0) / (2.0 * gamma)
    if p > pl:
        rho_l = rl * (p / pl + g) / (g * p / pl + 1.0)
        s = ul - al * np.sqrt((gamma + 1.0) / (2.0 * gamma) * p / pl + e)
        lw, ls = 'shock', (s, s)
    else:
        rho_l = rl * (p / pl) ** (1.0 / gamma)
        lw, ls = 'rarefaction', (ul - al, u - al * (p / pl) ** e)
    if p > pr:
        rho_r = rr * (p / pr + g) / (g * p / pr + 1.0)
        s = ur + ar * np.sqrt((gamma + 1.0) / (2.0 * gamma) * p / pr + e)
        rw, rs = 'shock', (s, s)
    else:
        rho_r = rr * (p / pr) ** (1.0 / gamma)
        rw, rs = 'rarefaction', (ur + ar, u + ar * (p / pr) ** e)
    return RiemannSolution(p_star=float(p), u_star=float(u), rho_star_left=float(rho_l),
                           rho_star_right=float(rho_r), left_wave=lw, right_wave=rw,
                           left_speeds=tuple(float(v) for v in ls), right_speeds=tuple(float(v) for v in rs),
                           left=(rl, ul, pl), right=(rr, ur, pr), gamma=gamma)


def sample_riemann(sol: RiemannSolution, xi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rho, u, p) de la solución autosemejante en x/t = xi."""
    xi = np.asarray(xi, dtype=float)
    gamma = sol.gamma
    rl, ul, pl = sol.left
    rr, ur, pr = sol.right
    al, ar = np.sqrt(gamma * pl / rl), np.sqrt(gamma * pr / rr)
    gp, gm = gamma + 1.0, gamma - 1.0
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)

    left_side = xi <= sol.u_star
    # lado izquierdo
    if sol.left_wave == 'shock':
        outer = left_side & (xi < sol.left_speeds[0])
        star = left_side & ~outer
        fan = np.zeros_like(left_side)
    else:
        head, tail = sol.left_speeds
        outer = left_side & (xi < head)
        star = left_side & (xi > tail)
        fan = left_side & ~outer & ~star
    rho[outer], u[outer], p[outer] = rl, ul, pl
    rho[star], u[star], p[star] = sol.rho_star_left, sol.u_star, sol.p_star
    if fan.any():
        w = 2.0 / gp + gm / (gp * al) * (ul - xi[fan])
        rho[fan] = rl * w ** (2.0 / gm)
        u[fan] = 2.0 / gp * (al + 0.5 * gm * ul + xi[fan])
        p[fan] = pl * w ** (2.0 * gamma / gm)
    # lado derecho
    right_side = ~left_side
    if sol.right_wave == 'shock':
        outer = right_side & (xi > sol.right_speeds[0])
        star = right_side & ~outer
        fan = np.zeros_like(right_side)
    else:
        head, tail = sol.right_speeds
        outer = right_side & (xi > head)
        star = right_side & (xi < tail)
        fan = right_side & ~outer & ~star
    rho[outer], u[outer], p[outer] = rr, ur, pr
    rho[star], u[star], p[star] = sol.rho_star_right, sol.u_star, sol.p_star
    if fan.any():
        w = 2.0 / gp - gm / (gp * ar) * (ur - xi[fan])
        rho[fan] = rr * w ** (2.0 / gm)
        u[fan] = 2.0 / gp * (-ar + 0.5 * gm * ur + xi[fan])
        p[fan] = pr * w ** (2.0 * gamma / gm)
    return rho, u, p


def exact_riemann_euler(left, right, gamma: float, x_over_t) -> Dict[str, np.ndarray]:
    sol = solve_riemann(left, right, gamma)
    rho, u, p = sample_riemann(sol, x_over_t)
    return {'rho': rho, 'u': u, 'p': p}


def _riemann_oracle(split: float, left, right, gamma: float):
    def oracle(grid, t: float) -> Dict[str, np.ndarray]:
        x = grid.x
        if t <= 0:
            L = x < split
            return {k: np.where(L, left[i], right[i]) for i, k in enumerate(('rho', 'u', 'p'))}
        return exact_riemann_euler(left, right, gamma, (x - split) / t)
    return oracle


# ---------------------------------------------------------------------------
# Burgers 2D: solución exacta
# ---------------------------------------------------------------------------

def burgers2d_initial(x, y) -> np.ndarray:
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    top = y >= 0.5
    east = x >= 0.5
    return np.select([top & east, top & ~east, ~top & ~east], [-1.0, -0.2, 0.5], 0.8)


def exact_burgers2d(x, y, t: float = 0.25) -> np.ndarray:
    """Tres choques y un abanico de rarefacción construidos por características."""
    if t <= 0:
        return burgers2d_initial(x, y)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    conds = [x <= 0.5 - 3 * t / 5, x <= 0.5 - t / 4, x <= 0.5 + t / 2, x <= 0.5 + 4 * t / 5]
    vals = [
        np.where(y > 0.5 + 3 * t / 20, -0.2, 0.5),
        np.where(y > -8 * x / 7 + 15 / 14 - 15 * t / 28, -1.0, 0.5),
        np.where(y > x / 6 + 5 / 12 - 5 * t / 24, -1.0, 0.5),
        np.where(y > x - 5 / (18 * t) * (x + t - 0.5) ** 2, -1.0, (2 * x - 1) / (2 * t)),
    ]
    return np.select(conds, vals, np.where(y > 0.5 - t / 10, -1.0, 0.8))


# ---------------------------------------------------------------------------
# Constructores de problemas
# ---------------------------------------------------------------------------

def _grid_1d(a: float, b: float, periodic: bool = False):
    return lambda n, n2=None: Grid1D.on_interval(a, b, n, periodic)


def _grid_2d(xa: float, xb: float, ya: float, yb: float):
    return lambda n, n2=None: Grid2D.on_box(xa, xb, ya, yb, n, n2)


def _scalar(values) -> FlowState:
    return FlowState(np.asarray(values, dtype=float)[None, ...])


def advection_inflow(t: float) -> float:
    if 0.0 < t < 0.2:
        return 100.0 * t * (t - 0.2)
    if 0.2 < t < 0.4:
        return 1.0
    if 0.8 < t < 0.9:
        return 10.0 * (t - 0.8)
    if 0.9 < t < 1.0:
        return 1.0 - 10.0 * (t - 0.9)
    return 0.0


def _advection_bc(gamma: float) -> ProblemSpec:
    a = 1.0

    def oracle(grid, t):
        g = np.vectorize(advection_inflow, otypes=[float])
        return {'u': g(t - grid.x / a)}

    return ProblemSpec(
        id='advection-bc', equation=EquationSpec('advection', a=a, gamma=gamma), domain=(0.0, 1.4),
        default_n=500, build_grid=_grid_1d(0.0, 1.4),
        initial_state=lambda grid: _scalar(np.zeros(grid.N)),
        bcs=[BoundaryCondition('left', 'dirichlet', data=advection_inflow), BoundaryCondition('right', 'evolve')],
        cfl=2.0, t_end=2.3, d=5, discontinuities=[], dump_times=(0.5, 1.3), oracle=oracle,
        description='Advección lineal con ondas entrantes por la izquierda')


def _advection_periodic(gamma: float) -> ProblemSpec:
    a = 1.0

    def oracle(grid, t):
        return {'u': bump(np.mod(grid.x - a * t, 1.0) - 0.5, 0.0, 0.2)}

    return ProblemSpec(
        id='advection-periodic', equation=EquationSpec('advection', a=a, gamma=gamma), domain=(0.0, 1.0),
        default_n=90, build_grid=_grid_1d(0.0, 1.0, periodic=True),
        initial_state=lambda grid: _scalar(bump(grid.x - 0.5, 0.0, 0.2)),
        cfl=2.0, t_end=500.0, d=5, periodic=True, discontinuities=[], oracle=oracle,
        description='Advección periódica de una función meseta (dispersión)')


def advection_profile_initial(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    conds = [(x > 0.2) & (x <= 0.3), (x > 0.3) & (x <= 0.4), (x > 0.6) & (x <= 0.8), (x > 1.0) & (x <= 1.2)]
    vals = [10 * (x - 0.2), 10 * (0.4 - x), np.ones_like(x), 100 * (x - 1.0) * (1.2 - x)]
    return np.select(conds, vals, 0.0)


def _advection_profile(gamma: float) -> ProblemSpec:
    return ProblemSpec(
        id='advection-profile', equation=EquationSpec('advection', a=1.0, gamma=gamma), domain=(0.0, 1.4),
        default_n=500, build_grid=_grid_1d(0.0, 1.4),
        initial_state=lambda grid: _scalar(advection_profile_initial(grid.x)),
        bcs=[BoundaryCondition('left', 'dirichlet', data=lambda t: 0.0), BoundaryCondition('right', 'evolve')],
        cfl=2.0, t_end=0.1, d=5, discontinuities=[0.6, 0.8],
        description='Perfil con distintos grados de suavidad para inspeccionar la viscosidad')


def _burgers_periodic(gamma: float) -> ProblemSpec:
    return ProblemSpec(
        id='burgers-periodic', equation=EquationSpec('burgers1d', gamma=gamma), domain=(0.0, 1.0),
        default_n=200, build_grid=_grid_1d(0.0, 1.0, periodic=True),
        initial_state=lambda grid: _scalar(0.5 + np.sin(2 * np.pi * grid.x)),
        cfl=2.0, t_end=0.3, d=5, periodic=True, discontinuities=[],
        description='Burgers periódico (conservación)')


def burgers1d_initial(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    th = np.tanh(10 * x - 3)
    return 1.0 / (np.exp(x - 3.0 / 20.0) * (th + 1.0) - th + 1.0)


def _burgers1d(gamma: float) -> ProblemSpec:
    inflow = float(burgers1d_initial(0.0))
    return ProblemSpec(
        id='burgers1d', equation=EquationSpec('burgers1d', gamma=gamma), domain=(0.0, 2 * np.pi),
        default_n=500, build_grid=_grid_1d(0.0, 2 * np.pi),
        initial_state=lambda grid: _scalar(burgers1d_initial(grid.x)),
        bcs=[BoundaryCondition('left', 'dirichlet', data=lambda t: inflow), BoundaryCondition('right', 'evolve')],
        cfl=2.0, t_end=8 * np.pi, d=2, discontinuities=[], dump_times=(2 * np.pi, 5 * np.pi),
        description='Burgers 1D: formación de un choque a partir de un dato abrupto')


def _burgers2d(gamma: float) -> ProblemSpec:
    return ProblemSpec(
        id='burgers2d', equation=EquationSpec('burgers2d', gamma=gamma), domain=(0.0, 1.0, 0.0, 1.0),
        default_n=200, build_grid=_grid_2d(0.0, 1.0, 0.0, 1.0),
        initial_state=lambda grid: _scalar(burgers2d_initial(*grid.mesh)),
        bcs=[BoundaryCondition(side, 'neumann') for side in ('left', 'right', 'bottom', 'top')],
        cfl=2.0, t_end=0.25, d=5, discontinuities={'x': lambda y: [0.5], 'y': lambda x: [0.5]},
        oracle=lambda grid, t: {'u': exact_burgers2d(*grid.mesh, t)},
        description='Burgers 2D con cuatro cuadrantes')


def _euler1d(pid: str, domain, split: float, left, right, t_end: float, gamma: float, default_n: int = 500,
             forced: int = 0, description: str = '', exact: bool = True) -> ProblemSpec:
    def init(grid):
        x = grid.x
        L = x < split
        rho, u, p = (np.where(L, left[i], right[i]) for i in range(3))
        return FlowState(conserved_from_primitive(rho, u, p, gamma), gamma)

    return ProblemSpec(
        id=pid, equation=EquationSpec('euler1d', gamma=gamma), domain=domain, default_n=default_n,
        build_grid=_grid_1d(*domain), initial_state=init,
        bcs=[BoundaryCondition('left', 'inflow'), BoundaryCondition('right', 'outflow')],
        cfl=2.0, t_end=t_end, d=5, discontinuities=[split], forced_tau_points=forced,
        oracle=_riemann_oracle(split, left, right, gamma) if exact else None, description=description)


def _shu_osher(gamma: float) -> ProblemSpec:
    def init(grid):
        x = grid.x
        L = x < -4.0
        rho = np.where(L, 3.857143, 1.0 + 0.2 * np.sin(5.0 * x))
        u = np.where(L, 2.6929369, 0.0)
        p = np.where(L, 10.33333, 1.0)
        return FlowState(conserved_from_primitive(rho, u, p, gamma), gamma)

    return ProblemSpec(
        id='shu-osher', equation=EquationSpec('euler1d', gamma=gamma), domain=(-5.0, 5.0), default_n=500,
        build_grid=_grid_1d(-5.0, 5.0), initial_state=init,
        bcs=[BoundaryCondition('left', 'inflow'), BoundaryCondition('right', 'outflow')],
        cfl=2.0, t_end=1.8, d=5, discontinuities=[-4.0],
        description='Choque que alcanza un tren de ondas de entropía')


def _quadrants(split_x: float, split_y: float, states: Dict[str, Tuple[float, float, float, float]], gamma: float):
    def init(grid):
        X, Y = grid.mesh
        top, east = Y >= split_y, X >= split_x
        masks = {'NE': top & east, 'NW': top & ~east, 'SW': ~top & ~east, 'SE': ~top & east}
        prim = [np.zeros(grid.shape) for _ in range(4)]
        for key, m in masks.items():
            for k in range(4):
                prim[k][m] = states[key][k]
        rho, u, v, p = prim
        return FlowState(conserved_from_primitive(rho, u, p, gamma, v=v), gamma)
    return init


def _riemann2d(gamma: float) -> ProblemSpec:
    states = {'NE': (1.1, 0.0, 0.0, 1.1), 'NW': (0.5065, 0.8939, 0.0, 0.35),
              'SW': (1.1, 0.8939, 0.0, 0.35), 'SE': (0.5065, 0.0, 0.8939, 0.35)}
    return ProblemSpec(
        id='riemann2d', equation=EquationSpec('euler2d', gamma=gamma), domain=(0.0, 1.2, 0.0, 1.2),
        default_n=200, build_grid=_grid_2d(0.0, 1.2, 0.0, 1.2), initial_state=_quadrants(0.6, 0.6, states, gamma),
        bcs=[BoundaryCondition(side, 'neumann') for side in ('left', 'right', 'bottom', 'top')],
        cfl=2.0, t_end=0.25, d=2, discontinuities={'x': lambda y: [0.6], 'y': lambda x: [0.6]},
        description='Riemann 2D, cuatro choques que interactúan')


def shock_vortex_right_state(gamma: float, p_r: float = 1.3) -> Tuple[float, float, float, float]:
    rho = ((gamma + 1) * p_r + gamma - 1) / ((gamma - 1) * p_r + gamma + 1)
    u = np.sqrt(gamma) + np.sqrt(2.0) * (1 - p_r) / np.sqrt(gamma - 1 + p_r * (gamma + 1))
    return float(rho), float(u), 0.0, p_r


def _shock_vortex(gamma: float) -> ProblemSpec:
    xc, yc, rc, zeta, eps = 0.25, 0.5, 0.05, 0.204, 0.3
    right = shock_vortex_right_state(gamma)

    def init(grid):
        X, Y = grid.mesh
        r2 = ((X - xc) ** 2 + (Y - yc) ** 2) / rc ** 2
        phi = eps * np.exp(zeta * (1.0 - r2))
        temp = 1.0 - (gamma - 1.0) / (4.0 * zeta * gamma) * phi ** 2
        rho_l = temp ** (1.0 / (gamma - 1.0))
        u_l = np.sqrt(gamma) + (Y - yc) / rc * phi
        v_l = -(X - xc) / rc * phi
        p_l = rho_l ** gamma
        L = X < 0.5
        rho = np.where(L, rho_l, right[0])
        u = np.where(L, u_l, right[1])
        v = np.where(L, v_l, right[2])
        p = np.where(L, p_l, right[3])
        return FlowState(conserved_from_primitive(rho, u, p, gamma, v=v), gamma)

    return ProblemSpec(
        id='shock-vortex', equation=EquationSpec('euler2d', gamma=gamma), domain=(0.0, 1.0, 0.0, 1.0),
        default_n=200, build_grid=_grid_2d(0.0, 1.0, 0.0, 1.0), initial_state=init,
        bcs=[BoundaryCondition(side, 'neumann') for side in ('left', 'right', 'bottom', 'top')],
        cfl=2.0, t_end=0.35, d=2, discontinuities={'x': lambda y: [0.5]},
        description='Interacción choque-vórtice isentrópico')


STEP_X, STEP_Y = 0.6, 0.2


def _mach3_grid(n: int, n2: Optional[int] = None) -> Grid2D:
    g = Grid2D.on_box(0.0, 3.0, 0.0, 1.0, n, n2)
    X, Y = g.mesh
    tol = 1e-9
    g.mask = (X <= STEP_X + tol * g.hx) | (Y >= STEP_Y - tol * g.hy)
    return g


def _mach3step(gamma: float) -> ProblemSpec:
    def init(grid):
        X, Y = grid.mesh
        u = np.full(grid.shape, 3.0)
        # cara del escalón: nodos activos más a la derecha de las filas bajas
        face = grid.active & (Y <= STEP_Y + 1e-9 * grid.hy) & (X > STEP_X - grid.hx + 1e-9 * grid.hx)
        u[face] = 0.0
        ones = np.ones(grid.shape)
        return FlowState(conserved_from_primitive(1.4 * ones, u, ones, gamma, v=0.0 * ones), gamma)

    return ProblemSpec(
        id='mach3step', equation=EquationSpec('euler2d', gamma=gamma), domain=(0.0, 3.0, 0.0, 1.0),
        default_n=601, build_grid=_mach3_grid, initial_state=init,
        bcs=[BoundaryCondition('left', 'inflow'),
             BoundaryCondition('right', 'reflecting', where=lambda x, y: x < 1.0),
             BoundaryCondition('right', 'evolve', where=lambda x, y: x >= 1.0),
             BoundaryCondition('bottom', 'reflecting'), BoundaryCondition('top', 'reflecting')],
        cfl=1.0, t_end=4.0, d=2, discontinuities={},
        description='Túnel de viento Mach 3 con escalón')


# --- doble reflexión de Mach -------------------------------------------------

DM_XR = 1.0 / 6.0
DM_THETA = np.pi / 3.0
DM_SHOCK_SPEED = 10.0
DM_POST = (8.0, 57.1597, -33.0012, 563.544)
DM_PRE = (1.4, 0.0, 0.0, 2.5)
DM_STRIP = (125, 25, 50)


def dm_shock_position(y, t: float):
    return DM_XR + DM_SHOCK_SPEED / np.sin(DM_THETA) * t + np.asarray(y, dtype=float) / np.tan(DM_THETA)


def dm_sharp_state(grid: Grid2D) -> FlowState:
    X, Y = grid.mesh
    behind = X <= dm_shock_position(Y, 0.0)
    c = np.stack([np.where(behind, a, b) for a, b in zip(DM_POST, DM_PRE)])
    return FlowState(c, 1.4)


def _dm_bcs(ramp: bool) -> List[BoundaryCondition]:
    bcs = [BoundaryCondition('left', 'inflow'), BoundaryCondition('right', 'outflow'),
           BoundaryCondition('top', 'oblique_neumann', angle=DM_THETA)]
    if ramp:
        bcs += [BoundaryCondition('bottom', 'oblique_neumann', angle=DM_THETA, where=lambda x, y: x < DM_XR),
                BoundaryCondition('bottom', 'reflecting', where=lambda x, y: x >= DM_XR)]
    else:
        bcs.append(BoundaryCondition('bottom', 'oblique_neumann', angle=DM_THETA))
    return bcs


def incident_shock_init_dm(grid: Grid2D, assets, mlp, cfg, N_d: Optional[int] = None, c: Optional[int] = None,
                           r: Optional[int] = None, t_pre: float = 0.2) -> FlowState:
    """Choque incidente viscoso: pre-simulación del choque plano sin rampa y mezcla en una franja."""
    from .fc_core import fc_shifted_eval
    from .timestepper import Solver
    from .viscosity import window_q

    scale = grid.N1 / 3200.0
    N_d = int(round(DM_STRIP[0] * scale)) if N_d is None else N_d
    c = int(round(DM_STRIP[1] * scale)) if c is None else c
    r = int(round(DM_STRIP[2] * scale)) if r is None else r
    spec = WindowSpec(c, r)
    half = max(spec.radius_cells(), (N_d - 1) / 2.0) * grid.hx

    X, Y = grid.mesh
    xs0 = dm_shock_position(Y, 0.0)
    shift = DM_SHOCK_SPEED * t_pre / np.sin(DM_THETA)
    x_max = grid.x0 + grid.hx * (grid.N1 - 1)
    if np.min(xs0) - half < grid.x0 or np.max(xs0) + half + shift > x_max:
        raise ConfigError('la franja del choque incidente se sale del dominio')

    flat = ProblemSpec(id='double-mach-flat', equation=EquationSpec('euler2d', gamma=1.4),
                       domain=(0.0, 4.0, 0.0, 1.0), default_n=grid.N1,
                       build_grid=lambda n, n2=None: Grid2D.on_box(0.0, 4.0, 0.0, 1.0, grid.N1, grid.N2),
                       initial_state=dm_sharp_state, bcs=_dm_bcs(ramp=False), cfl=cfg.cfl, t_end=t_pre, d=assets.d,
                       discontinuities={'x': lambda y: [float(dm_shock_position(y, 0.0))]})
    pre_cfg = replace(cfg, t_end=t_pre, dump_every=None, dump_viscosity=False, dump_oracle=False, max_steps=None)
    log.info(f'pre-simulación del choque plano hasta t={t_pre} ({grid.N1}x{grid.N2})')
    pre = Solver(flat, pre_cfg, assets, mlp).run().final_state.conserved

    # e_hat(x + shift): desplazamiento entero de índices más fracción vía serie FC
    steps = shift / grid.hx
    m = int(np.floor(steps))
    frac = steps - m
    rows = np.moveaxis(pre, 1, -1)                     # (r, N2, N1)
    ext = fc_shifted_eval(rows, assets, frac)
    idx = np.arange(grid.N1) + m
    valid = idx < grid.N1
    moved = np.zeros_like(rows)
    moved[..., valid] = ext[..., idx[valid]]
    moved = np.moveaxis(moved, -1, 1)

    W = window_q(xs0 - X, spec, grid.hx)
    base = dm_sharp_state(grid).conserved
    blended = W * moved + (1.0 - W) * base
    return FlowState(np.where(W > 0, blended, base), 1.4)


def _double_mach(gamma: float) -> ProblemSpec:
    return ProblemSpec(
        id='double-mach', equation=EquationSpec('euler2d', gamma=1.4), domain=(0.0, 4.0, 0.0, 1.0),
        default_n=800, build_grid=_grid_2d(0.0, 4.0, 0.0, 1.0), initial_state=dm_sharp_state,
        bcs=_dm_bcs(ramp=True), cfl=2.0, t_end=0.2, d=2, discontinuities={},
        custom_init=incident_shock_init_dm,
        description='Doble reflexión de Mach (choque incidente suavizado)')


REGISTRY: Dict[str, Callable[[float], ProblemSpec]] = {
    'advection-bc': _advection_bc,
    'advection-periodic': _advection_periodic,
    'advection-profile': _advection_profile,
    'burgers-periodic': _burgers_periodic,
    'burgers1d': _burgers1d,
    'burgers2d': _burgers2d,
    'sod': lambda g: _euler1d('sod', (-4.0, 5.0), 0.5, (1.0, 0.0, 1.0), (0.125, 0.0, 0.1), 0.2, g,
                              description='Tubo de choque de Sod'),
    'lax': lambda g: _euler1d('lax', (-5.0, 5.0), 0.0, (0.445, 0.698, 3.528), (0.5, 0.0, 0.571), 1.3, g,
                              description='Problema de Lax'),
    'shu-osher': _shu_osher,
    'blast': lambda g: _euler1d('blast', (0.0, 1.0), 0.5, (1.0, 0.0, 1000.0), (1.0, 0.0, 0.01), 0.012, g,
                                default_n=1000, forced=9, description='Onda explosiva'),
    'riemann2d': _riemann2d,
    'shock-vortex': _shock_vortex,
    'mach3step': _mach3step,
    'double-mach': _double_mach,
}


def build_problem(problem_id: str, gamma: float = config.GAMMA) -> ProblemSpec:
    builder = REGISTRY.get(problem_id)
    if builder is None:
        raise ConfigError(f'problema desconocido: {problem_id} (disponibles: {", ".join(REGISTRY)})')
    return builder(gamma)


def list_problems() -> List[Dict[str, object]]:
    out = []
    for pid in REGISTRY:
        p = build_problem(pid)
        out.append({'id': pid, 'equation': p.equation.kind, 'domain': list(p.domain), 'n': p.default_n,
                    'd': p.d, 'cfl': p.cfl, 't_end': p.t_end, 'oracle': p.oracle is not None,
                    'description': p.description})
    return out
