"""Script de conveniencia para ejecutar unos pocos pasos de un problema y mostrar antes/después.
Usar desde la raíz del repo con `python scripts/run_step.py [problema] [pasos] [método]`.
"""
import os, sys

# asegurar que la raíz del repo está en sys.path para importar el paquete src
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from src import config, storage
from src.app.models import RunConfig
from src.fc_core import load_assets
from src.problems import build_problem
from src.timestepper import Solver

pid = sys.argv[1] if len(sys.argv) > 1 else 'sod'
steps = int(sys.argv[2]) if len(sys.argv) > 2 else 1
method = sys.argv[3] if len(sys.argv) > 3 else 'ev'

problem = build_problem(pid)
cfg = RunConfig(problem=pid, n=problem.default_n, d=problem.d, cfl=problem.cfl, t_end=problem.t_end,
                method=method, gamma=problem.equation.gamma)
mlp = storage.read_weights(config.WEIGHTS_PATH) if method == 'sdnn' else None
solver = Solver(problem, cfg, load_assets(cfg.d, cfg.C), mlp)


def resumen(fields):
    return {k: (round(float(v.min()), 6), round(float(v.max()), 6)) for k, v in fields.items()}


print('Problema:', pid, 'malla:', solver.grid.shape, 'método:', method)
print('Antes (min, max):', resumen(solver.fields()))

for _ in range(steps):
    dt = solver.step()
    print(f'  paso {solver.steps}: t={solver.t:.6g} dt={dt:.4e} max_mu={float(solver.mu.max()):.4e}')

print('\nDespués (min, max):', resumen(solver.fields()))
if solver.tau is not None:
    print('Clases SDNN:', {c: int((solver.tau == c).sum()) for c in (1, 2, 3, 4)})
