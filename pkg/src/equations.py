"""Ecuaciones: variables conservadas, flujos convectivos y viscosos, variable proxy
y operador espacial L[e] = -div f(e) + div f_visc[e].

Los campos conservados tienen forma (r, N) en 1D y (r, N1, N2) en 2D.
"""
from typing import List, Optional

import numpy as np

from . import fc_core
from .app.models import EquationSpec, FlowState, Primitives
from .errors import StateValidityError


def _first_bad(bad: np.ndarray):
    idx = np.argwhere(bad)
    return tuple(int(i) for i in idx[0]) if idx.size else None


def conserved_from_primitive(rho, u, p, gamma: float, v=None) -> np.ndarray:
    rho, u, p = (np.asarray(a, dtype=float) for a in (rho, u, p))
    if v is None:
        E = p / (gamma - 1.0) + 0.5 * rho * u ** 2
        return np.stack(np.broadcast_arrays(rho, rho * u, E))
    v = np.asarray(v, dtype=float)
    E = p / (gamma - 1.0) + 0.5 * rho * (u ** 2 + v ** 2)
    return np.stack(np.broadcast_arrays(rho, rho * u, rho * v, E))


def pressure(state: FlowState) -> np.ndarray:
    c = state.conserved
    rho = c[0]
    kinetic = 0.5 * np.sum(c[1:-1] ** 2, axis=0) / rho
    return (state.gamma - 1.0) * (c[-1] - kinetic)


def primitive_quantities(state: FlowState, spec: Optional[EquationSpec] = None,
                         mask: Optional[np.ndarray] = None, check: bool = True) -> Primitives:
    c = state.conserved
    if spec is not None and not spec.is_euler or c.shape[0] == 1:
        return Primitives(rho=None, u=c[0], v=None, p=None, a=None, mach=None)
    rho = c[0]
    region = np.ones(rho.shape, dtype=bool) if mask is None else mask
    if check and np.any((rho <= 0) & region):
        raise StateValidityError('densidad no positiva', index=_first_bad((rho <= 0) & region), field='rho')
    u = c[1] / rho
    v = c[2] / rho if c.shape[0] == 4 else None
    p = pressure(state)
    if check and np.any((p <= 0) & region):
        raise StateValidityError('presión no positiva', index=_first_bad((p <= 0) & region), field='p')
    a = np.sqrt(state.gamma * np.abs(p) / rho)
    speed = np.abs(u) if v is None else np.hypot(u, v)
    return Primitives(rho=rho, u=u, v=v, p=p, a=a, mach=speed / a)


def proxy_variable(state: FlowState, spec: EquationSpec, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Phi(e): u para las ecuaciones escalares, número de Mach para Euler."""
    if not spec.is_euler:
        return state.conserved[0]
    return primitive_quantities(state, spec, mask).mach


def convective_flux(state: FlowState, spec: EquationSpec, mask: Optional[np.ndarray] = None) -> List[np.ndarray]:
    c = state.conserved
    if spec.kind == 'advection':
        return [spec.a * c]
    if spec.kind == 'burgers1d':
        return [0.5 * c ** 2]
    if spec.kind == 'burgers2d':
        f = 0.5 * c ** 2
        return [f, f.copy()]
    prim = primitive_quantities(state, spec, mask)
    rho, u, p, E = prim.rho, prim.u, prim.p, c[-1]
    if spec.kind == 'euler1d':
        return [np.stack([rho * u, rho * u ** 2 + p, u * (E + p)])]
    v = prim.v
    fx = np.stack([rho * u, rho * u ** 2 + p, rho * u * v, u * (E + p)])
    fy = np.stack([rho * v, rho * u * v, rho * v ** 2 + p, v * (E + p)])
    return [fx, fy]


class Differentiator:
    """Derivadas FC por línea sobre la malla de un problema."""

    def __init__(self, grid, assets, periodic: bool = False):
        self.grid = grid
        self.assets = assets
        self.periodic = periodic
        self.mask = getattr(grid, 'mask', None)

    def d(self, field: np.ndarray, axis: int = 0) -> np.ndarray:
        g = self.grid
        if hasattr(g, 'N1'):
            h = g.hx if axis == 0 else g.hy
            return fc_core.fc_derivative_2d(field, h, axis, self.assets, self.mask)
        return fc_core.fc_derivative(field, self.assets, g.length, periodic=self.periodic)

    def divergence(self, fluxes: List[np.ndarray]) -> np.ndarray:
        out = self.d(fluxes[0], 0)
        for axis, f in enumerate(fluxes[1:], start=1):
            out = out + self.d(f, axis)
        return out


def viscous_flux(state: FlowState, mu: np.ndarray, spec: EquationSpec, method: str,
                 diff: Differentiator) -> List[np.ndarray]:
    c = state.conserved
    dim = spec.dim
    if method != 'ev' or not spec.is_euler:
        # D[e] = grad(e) componente a componente
        return [mu * diff.d(c, axis) for axis in range(dim)]
    prim = primitive_quantities(state, spec, diff.mask)
    kappa = mu / (state.gamma - 1.0)
    theta = prim.p / prim.rho
    zero = np.zeros_like(mu)
    if dim == 1:
        ux = diff.d(prim.u, 0)
        return [np.stack([zero, mu * ux, mu * ux * prim.u + kappa * diff.d(theta, 0)])]
    u, v = prim.u, prim.v
    ux, uy = diff.d(u, 0), diff.d(u, 1)
    vx, vy = diff.d(v, 0), diff.d(v, 1)
    sxy = 0.5 * (uy + vx)
    fx = np.stack([zero, mu * ux, mu * sxy, mu * (ux * u + sxy * v) + kappa * diff.d(theta, 0)])
    fy = np.stack([zero, mu * sxy, mu * vy, mu * (sxy * u + vy * v) + kappa * diff.d(theta, 1)])
    return [fx, fy]


def spatial_operator(state: FlowState, mu: np.ndarray, spec: EquationSpec, method: str,
                     diff: Differentiator) -> np.ndarray:
    fluxes = convective_flux(state, spec, diff.mask)
    if method != 'none' and np.any(mu):
        visc = viscous_flux(state, mu, spec, method, diff)
        fluxes = [f - fv for f, fv in zip(fluxes, visc)]
    out = -diff.divergence(fluxes)
    if diff.mask is not None:
        out[..., ~diff.mask] = 0.0
    return out


# --- pares de entropía para la viscosidad EV --------------------------------

def entropy_pair(state: FlowState, spec: EquationSpec, mask: Optional[np.ndarray] = None):
    """Devuelve (eta, [nu por dirección], C) del par de entropía de cada ecuación."""
    c = state.conserved
    if spec.kind == 'advection':
        u = c[0]
        return 0.5 * u ** 2, [0.5 * spec.a * u ** 2], np.full_like(u, abs(spec.a))
    if spec.kind in ('burgers1d', 'burgers2d'):
        u = c[0]
        nu = u ** 3 / 3.0
        return 0.5 * u ** 2, [nu] * spec.dim, np.abs(u)
    prim = primitive_quantities(state, spec, mask)
    eta = prim.rho / (state.gamma - 1.0) * np.log(prim.p / prim.rho ** state.gamma)
    nus = [prim.u * eta] if spec.dim == 1 else [prim.u * eta, prim.v * eta]
    speed = np.abs(prim.u) if prim.v is None else np.hypot(prim.u, prim.v)
    return eta, nus, speed + prim.a
