#!/usr/bin/env python3
"""Pruebas del avance temporal: dt CFL, SSPRK(5,4), condiciones de contorno y bucle del solver."""
import os

import numpy as np
import pytest

from src.app.models import BoundaryCondition, EquationSpec, FlowState, Grid1D, Grid2D, RunConfig
from src.equations import Differentiator, conserved_from_primitive, pressure, spatial_operator
from src.errors import ConfigError, NumericalFailure, StateValidityError
from src.problems import advection_inflow, build_problem, bump
from src.reports import error_metrics
from src.timestepper import BoundaryEnforcer, Solver, adaptive_dt, enforce_bc, ssprk4_step

EULER1 = EquationSpec('euler1d')
EULER2 = EquationSpec('euler2d')


# --- paso de tiempo ---------------------------------------------------------

def test_adaptive_dt_formula():
    dt = adaptive_dt(np.ones(10), np.zeros(10), 2.0, 0.01)
    assert dt == pytest.approx(2.0 / (np.pi * 100.0))
    assert adaptive_dt(np.ones(10), np.full(10, 1e-3), 2.0, 0.01) < dt


def test_adaptive_dt_stationary_state():
    with pytest.raises(NumericalFailure):
        adaptive_dt(np.zeros(10), np.zeros(10), 2.0, 0.01)
    with pytest.raises(NumericalFailure):
        adaptive_dt(np.array([1.0, np.nan]), None, 2.0, 0.01)
    with pytest.raises(ValueError):
        adaptive_dt(np.ones(3), None, -1.0, 0.01)


def test_adaptive_dt_ignores_masked_nodes():
    S = np.ones((4, 4))
    S[0, 0] = 100.0
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 0] = False
    assert adaptive_dt(S, np.zeros((4, 4)), 1.0, 0.1, mask) == pytest.approx(1.0 / (np.pi * 10.0))


# --- SSPRK(5,4) -------------------------------------------------------------

def _decay_error(dt: float) -> float:
    y, t = np.array([1.0]), 0.0
    for _ in range(int(round(1.0 / dt))):
        y = ssprk4_step(y, t, dt, lambda v, s: -v)
        t += dt
    return abs(y[0] - np.exp(-1.0))


def test_ssprk_fourth_order():
    errors = [_decay_error(dt) for dt in (0.1, 0.05, 0.025, 0.0125)]
    orders = [np.log2(a / b) for a, b in zip(errors, errors[1:])]
    for order in orders:
        assert 3.9 <= order <= 4.1


def test_ssprk_stage_times_follow_the_step():
    seen = []
    ssprk4_step(np.zeros(1), 1.0, 0.5, lambda v, t: seen.append(t) or np.ones(1))
    assert seen[0] == 1.0
    assert all(1.0 <= t <= 1.5 + 1e-12 for t in seen)
    out = ssprk4_step(np.zeros(1), 0.0, 0.5, lambda v, t: np.ones(1))
    assert out[0] == pytest.approx(0.5)


def test_ssprk_zero_rhs_keeps_state(rng):
    u = rng.standard_normal(20)
    assert np.allclose(ssprk4_step(u, 0.0, 0.1, lambda v, t: np.zeros_like(v)), u, atol=1e-14)


def test_ssprk_detects_nan():
    with pytest.raises(NumericalFailure) as info:
        ssprk4_step(np.ones(3), 0.0, 0.1, lambda v, t: np.full(3, np.nan), step=7)
    assert info.value.step == 7
    with pytest.raises(ValueError):
        ssprk4_step(np.ones(3), 0.0, 0.0, lambda v, t: v)


def test_ssprk_enforces_boundary_each_stage():
    calls = []

    def enforce(u, t):
        calls.append(t)
        out = u.copy()
        out[0] = 2.0
        return out

    out = ssprk4_step(np.zeros(4), 0.0, 0.1, lambda v, t: np.ones_like(v), enforce)
    assert len(calls) == 6
    assert out[0] == 2.0


# --- condiciones de contorno ------------------------------------------------

def test_dirichlet_inflow():
    grid = Grid1D.on_interval(0.0, 1.4, 50)
    enf = BoundaryEnforcer([BoundaryCondition('left', 'dirichlet', data=advection_inflow),
                            BoundaryCondition('right', 'evolve')], grid, EquationSpec('advection'), None,
                           np.zeros((1, 50)))
    out = enforce_bc(np.zeros((1, 50)), enf, 0.3)
    assert out[0, 0] == 1.0
    assert out[0, -1] == 0.0


def test_missing_boundary_condition():
    grid = Grid1D.on_interval(0.0, 1.0, 30)
    with pytest.raises(ConfigError):
        BoundaryEnforcer([BoundaryCondition('left', 'dirichlet', data=lambda t: 0.0)], grid,
                         EquationSpec('advection'), None, np.zeros((1, 30)))


def test_overlapping_predicates_are_rejected():
    grid = Grid2D.on_box(0.0, 1.0, 0.0, 1.0, 20, 20)
    bcs = [BoundaryCondition(s, 'reflecting') for s in ('left', 'right', 'top')]
    bcs += [BoundaryCondition('bottom', 'reflecting', where=lambda x, y: x < 0.6),
            BoundaryCondition('bottom', 'evolve', where=lambda x, y: x > 0.4)]
    with pytest.raises(ConfigError):
        BoundaryEnforcer(bcs, grid, EULER2, None, np.ones((4, 20, 20)))


def test_periodic_grid_rejects_conditions():
    grid = Grid1D.on_interval(0.0, 1.0, 30, periodic=True)
    with pytest.raises(ConfigError):
        BoundaryEnforcer([BoundaryCondition('left', 'evolve')], grid, EquationSpec('advection'), None,
                         np.zeros((1, 30)))


def test_reflecting_walls_zero_normal_velocity():
    grid = Grid2D.on_box(0.0, 1.0, 0.0, 1.0, 40, 40)
    ones = np.ones(grid.shape)
    c = conserved_from_primitive(ones, 0.3 * ones, ones, 1.4, v=0.3 * ones)
    bcs = [BoundaryCondition(s, 'reflecting') for s in ('left', 'right', 'bottom', 'top')]
    out = BoundaryEnforcer(bcs, grid, EULER2, None, c)(c, 0.0)
    assert np.all(out[2][:, 0] == 0.0) and np.all(out[2][:, -1] == 0.0)
    assert np.all(out[1][0, :] == 0.0) and np.all(out[1][-1, :] == 0.0)
    assert np.allclose(pressure(FlowState(out)), 1.0)
    assert np.array_equal(out[:, 5:-5, 5:-5], c[:, 5:-5, 5:-5])


def test_inflow_and_outflow():
    grid = Grid1D.on_interval(0.0, 1.0, 30)
    init = conserved_from_primitive(np.ones(30), 0.5 * np.ones(30), np.ones(30), 1.4)
    enf = BoundaryEnforcer([BoundaryCondition('left', 'inflow'), BoundaryCondition('right', 'outflow')],
                           grid, EULER1, None, init)
    now = conserved_from_primitive(np.full(30, 2.0), np.zeros(30), np.full(30, 3.0), 1.4)
    out = enf(now, 0.1)
    p = pressure(FlowState(out))
    # entrada: rho y u del dato inicial, presión extrapolada; salida: presión del dato inicial
    assert out[0, 0] == 1.0 and out[1, 0] == 0.5
    assert p[0] == pytest.approx(3.0)
    assert out[0, -1] == 2.0
    assert p[-1] == pytest.approx(1.0)


def test_neumann_boundary_zero_derivative(assets5):
    grid = Grid1D.on_interval(0.0, 1.0, 40)
    enf = BoundaryEnforcer([BoundaryCondition('left', 'neumann'), BoundaryCondition('right', 'neumann')],
                           grid, EquationSpec('burgers1d'), assets5, np.zeros((1, 40)))
    u = np.cos(np.pi * grid.x)[None]
    out = enf(u, 0.0)
    assert out[0, 0] == pytest.approx(1.0, abs=1e-3)
    assert out[0, -1] == pytest.approx(-1.0, abs=1e-3)


def test_mach3_boundary_routing():
    problem = build_problem('mach3step')
    grid = problem.build_grid(61, None)
    enf = BoundaryEnforcer(problem.bcs, grid, problem.equation, None, problem.initial_state(grid).conserved)
    step_i = int(round(0.6 / grid.hx))
    step_j = int(round(0.2 / grid.hy))
    for seg in enf.segments:
        if seg.axis == 0:
            assert all((seg.node, int(j)) != (step_i, step_j) for j in seg.lines)
        else:
            assert all((int(i), seg.node) != (step_i, step_j) for i in seg.lines)
    right = {seg.bc.kind: seg for seg in enf.segments if seg.side == 'right'}
    assert right['reflecting'].node == step_i
    assert right['evolve'].node == grid.N1 - 1
    assert sorted(right['reflecting'].lines) == list(range(step_j))
    assert [s.side for s in enf.segments] == sorted((s.side for s in enf.segments),
                                                   key=('bottom', 'top', 'left', 'right').index)


# --- solver -----------------------------------------------------------------

def _cfg(problem: str, **kw) -> RunConfig:
    return RunConfig(problem=problem, **kw)


def test_uniform_state_stays_uniform(assets5):
    grid = Grid1D.on_interval(0.0, 1.0, 60)
    c = conserved_from_primitive(np.ones(60), 0.2 * np.ones(60), np.ones(60), 1.4)
    enf = BoundaryEnforcer([BoundaryCondition('left', 'inflow'), BoundaryCondition('right', 'outflow')],
                           grid, EULER1, assets5, c)
    diff = Differentiator(grid, assets5)
    rhs = lambda u, t: spatial_operator(FlowState(u), np.zeros(60), EULER1, 'none', diff)
    out = ssprk4_step(c, 0.0, 1e-3, rhs, enf)
    assert np.allclose(out, c, atol=1e-8)


def test_periodic_advection_step_is_exact_shift(assets5):
    problem = build_problem('advection-periodic')
    solver = Solver(problem, _cfg('advection-periodic', n=90, cfl=0.1, method='none', t_end=1.0), assets5)
    dt = solver.step()
    x = solver.grid.x
    exact = bump(np.mod(x - dt, 1.0) - 0.5, 0.0, 0.2)
    assert solver.t == pytest.approx(dt)
    assert np.max(np.abs(solver.state.conserved[0] - exact)) < 1e-6


def test_periodic_burgers_conserves_mass(assets5, mlp_class):
    problem = build_problem('burgers-periodic')
    cfg = _cfg('burgers-periodic', n=200, method='sdnn', filter_enabled=False, t_end=0.3)
    solver = Solver(problem, cfg, assets5, mlp_class(1))
    u0 = solver.state.conserved[0].copy()
    for _ in range(5):
        solver.step()
        drift = abs(np.sum(solver.state.conserved[0]) - np.sum(u0))
        assert drift <= 1e-8 * np.sum(np.abs(u0))
    assert set(np.unique(solver.tau)) <= {1, 4}
    assert np.max(solver.mu) > 0


def test_step_lands_on_target(assets5):
    problem = build_problem('advection-periodic')
    solver = Solver(problem, _cfg('advection-periodic', n=90, method='none', t_end=1.0), assets5)
    solver.step(1e-4)
    assert solver.t == 1e-4


def test_sdnn_requires_weights(assets5):
    with pytest.raises(ConfigError):
        Solver(build_problem('sod'), _cfg('sod', n=200, method='sdnn'), assets5, None)
    with pytest.raises(ConfigError):
        Solver(build_problem('sod'), _cfg('sod', n=200, method='weno'), assets5, None)


def test_dump_schedule(assets5):
    problem = build_problem('advection-bc')
    solver = Solver(problem, _cfg('advection-bc', n=100, method='ev', t_end=1.0, dump_every=0.4), assets5)
    assert solver.dump_schedule() == [0.4, 0.5, 0.8, 1.0]


def test_failure_dump(tmp_path, assets5):
    solver = Solver(build_problem('sod'), _cfg('sod', n=100, method='ev', t_end=0.2), assets5)
    solver.out_dir = str(tmp_path)
    solver._dump_failure(StateValidityError('presión no positiva', field='p'))
    assert os.path.exists(tmp_path / 'failure_p.csv')


def test_sod_with_entropy_viscosity(assets5):
    problem = build_problem('sod')
    solver = Solver(problem, _cfg('sod', n=200, method='ev', t_end=0.2), assets5)
    result = solver.run()
    snap = result.snapshots[-1]
    assert snap.t == pytest.approx(0.2)
    assert np.all(snap.fields['rho'] > 0) and np.all(snap.fields['p'] > 0)
    oracle = problem.oracle(solver.grid, snap.t)
    m = error_metrics(snap.fields['rho'], oracle['rho'], solver.grid)
    assert m["L1"] < 0.15


@pytest.mark.slow
def test_sod_with_sdnn_weights(assets5, sdnn_weights):
    problem = build_problem('sod')
    solver = Solver(problem, _cfg('sod', n=500, method='sdnn', t_end=0.2), assets5, sdnn_weights)
    snap = solver.run().snapshots[-1]
    m = error_metrics(snap.fields['rho'], problem.oracle(solver.grid, 0.2)['rho'], solver.grid)
    assert m['L1_mean'] <= 0.02
    assert snap.fields['rho'].max() <= 1.01 and snap.fields['rho'].min() >= 0.125 * 0.99


if __name__ == '__main__':
    print("=" * 60)
    print("TEST: avance temporal y solver")
    print("=" * 60)
    code = pytest.main([__file__, '-q'])
    print("\n✅ Todas las pruebas pasaron" if code == 0 else "\n❌ Hay pruebas fallidas")
