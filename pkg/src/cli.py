"""Interfaz de línea de comandos.

Subcomandos: solve, train-sdnn, gen-fc-assets, list-problems, compare,
fd6-baseline. Cada handler devuelve un dict que se imprime como JSON; los
errores de configuración salen con código 2 y los numéricos con código 3.
"""
import argparse
import configparser
import json
import logging
import os
import sys
import time
from dataclasses import fields as dc_fields
from typing import Any, Dict, List, Optional, Tuple, get_type_hints

from . import config, storage
from .app.models import RunConfig, RunManifest
from .errors import ConfigError, NumericalFailure, ShockFcError
from .fc_core import generate_fc_assets, load_assets
from .problems import build_problem, list_problems
from .reports import compare_report, error_metrics, fd6_baseline, self_reference, snapshot_oracle
from .sdnn import ensure_weights, generate_dataset, train, weights_info_path
from .timestepper import Solver

log = logging.getLogger('cli')

# sección -> {clave del fichero: campo de RunConfig}
SECTIONS: Dict[str, Dict[str, str]] = {
    'run': {'problem': 'problem', 'n': 'n', 'n2': 'n2', 'cfl': 'cfl', 't_end': 't_end', 'method': 'method',
            'seed': 'seed', 'max_steps': 'max_steps', 'log_every': 'log_every'},
    'fc': {'d': 'd', 'C': 'C', 'assets': 'assets'},
    'filter': {'enabled': 'filter_enabled', 'alpha': 'filter_alpha', 'order': 'filter_order'},
    'smear': {'c': 'smear_c', 'r': 'smear_r', 'alpha': 'smear_alpha', 'order': 'smear_order'},
    'viscosity': {'ev_c_max': 'ev_c_max', 'ev_c_E': 'ev_c_E'},
    'equation': {'gamma': 'gamma'},
    'output': {'out_dir': 'out_dir', 'dump_every': 'dump_every', 'dump_viscosity': 'dump_viscosity',
               'dump_oracle': 'dump_oracle'},
    'sdnn': {'weights': 'weights'},
}

# flag de argparse -> campo de RunConfig
FLAGS = {'problem': 'problem', 'n': 'n', 'n2': 'n2', 'd': 'd', 'cfl': 'cfl', 't_end': 't_end',
         'method': 'method', 'weights': 'weights', 'assets': 'assets', 'out': 'out_dir',
         'dump_every': 'dump_every', 'dump_viscosity': 'dump_viscosity', 'dump_oracle': 'dump_oracle',
         'seed': 'seed', 'max_steps': 'max_steps', 'gamma': 'gamma', 'filter': 'filter_enabled'}

RUN_FIELDS = {f.name for f in dc_fields(RunConfig)}
RUN_TYPES = get_type_hints(RunConfig)


def _read_config_file(path: str) -> Dict[str, Any]:
    """Lee `[sección]` / `clave = valor`; un `.json` (manifiesto o JSON seccionado) también vale."""
    if path.lower().endswith('.json'):
        return _read_json_config(path)
    return _read_ini_config(path)


def _coerce(name: str, raw: str, path: str) -> Any:
    kind = RUN_TYPES[name]
    text = raw.strip()
    if type(None) in getattr(kind, '__args__', ()):
        if text.lower() in ('', 'none', 'null'):
            return None
        kind = next(a for a in kind.__args__ if a is not type(None))
    try:
        if kind is bool:
            return configparser.ConfigParser.BOOLEAN_STATES[text.lower()]
        return kind(text)
    except (KeyError, ValueError) as e:
        raise ConfigError(f'{path}: valor inválido para {name}: {raw!r}') from e


def _read_ini_config(path: str) -> Dict[str, Any]:
    parser = configparser.ConfigParser(interpolation=None, strict=True, default_section='__ninguna__')
    parser.optionxform = str
    try:
        with open(path, 'r', encoding='utf8') as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f'no se pudo leer {path}: {e}') from e
    out = {}
    for section in parser.sections():
        keys = SECTIONS.get(section)
        if keys is None:
            raise ConfigError(f'{path}: sección desconocida [{section}]')
        for key, value in parser.items(section):
            if key not in keys:
                raise ConfigError(f'{path}: clave desconocida {section}.{key}')
            out[keys[key]] = _coerce(keys[key], value, path)
    return out


def _read_json_config(path: str) -> Dict[str, Any]:
    """Aplana un JSON seccionado (o el bloque `config` de un manifiesto) a campos de RunConfig."""
    try:
        with open(path, 'r', encoding='utf8') as f:
            raw = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigError(f'no se pudo leer {path}: {e}') from e
    if not isinstance(raw, dict):
        raise ConfigError(f'{path}: se esperaba un objeto JSON')
    if 'config' in raw and isinstance(raw['config'], dict):
        flat = dict(raw['config'])
        unknown = sorted(set(flat) - RUN_FIELDS)
        if unknown:
            raise ConfigError(f'{path}: claves desconocidas en el manifiesto: {", ".join(unknown)}')
        return flat
    out = {}
    for section, body in raw.items():
        keys = SECTIONS.get(section)
        if keys is None:
            raise ConfigError(f'{path}: sección desconocida [{section}]')
        if not isinstance(body, dict):
            raise ConfigError(f'{path}: [{section}] debe ser un objeto')
        for key, value in body.items():
            if key not in keys:
                raise ConfigError(f'{path}: clave desconocida {section}.{key}')
            out[keys[key]] = value
    return out


def parse_config(args: argparse.Namespace) -> Tuple[RunConfig, Dict[str, Any]]:
    """Prioridad: flag > fichero > ProblemSpec > valores por defecto de RunConfig."""
    from_file = _read_config_file(args.config) if getattr(args, 'config', None) else {}
    from_flags = {}
    for flag, name in FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            from_flags[name] = value
    problem_id = from_flags.get('problem') or from_file.get('problem')
    if not problem_id:
        raise ConfigError('falta el identificador del problema (--problem o run.problem)')
    problem = build_problem(problem_id, gamma=float(from_flags.get('gamma', from_file.get('gamma', config.GAMMA))))

    values: Dict[str, Any] = {'problem': problem_id, 'n': problem.default_n, 'd': problem.d, 'cfl': problem.cfl,
                              't_end': problem.t_end, 'gamma': problem.equation.gamma,
                              'weights': config.WEIGHTS_PATH}
    values.update(from_file)
    overrides = {}
    for name, value in from_flags.items():
        if name in from_file and from_file[name] != value:
            overrides[name] = {'file': from_file[name], 'flag': value}
        values[name] = value
    try:
        cfg = RunConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    validate_config(cfg)
    return cfg, overrides


def validate_config(cfg: RunConfig) -> None:
    if cfg.cfl <= 0:
        raise ConfigError(f'cfl debe ser positivo ({cfg.cfl})')
    if cfg.t_end <= 0:
        raise ConfigError(f't_end debe ser positivo ({cfg.t_end})')
    if cfg.method not in ('sdnn', 'ev', 'none'):
        raise ConfigError(f'método desconocido: {cfg.method}')
    if cfg.d < 2:
        raise ConfigError(f'd debe ser >= 2 ({cfg.d})')
    if cfg.n < max(2 * cfg.d, 7):
        raise ConfigError(f'n={cfg.n} demasiado pequeño para d={cfg.d}')
    if cfg.dump_every is not None and cfg.dump_every <= 0:
        raise ConfigError('dump_every debe ser positivo')
    if cfg.filter_order <= 0 or cfg.filter_order % 2:
        raise ConfigError(f'el orden del filtro debe ser par y positivo ({cfg.filter_order})')


def _load_mlp(cfg: RunConfig):
    if cfg.method != 'sdnn':
        return None
    if cfg.weights == config.WEIGHTS_PATH:
        # pesos por defecto: se entrenan y guardan la primera vez
        return ensure_weights(cfg.weights, load_assets(5, cfg.C, cfg.assets))
    if not cfg.weights or not os.path.exists(cfg.weights):
        raise ConfigError(f'no se encuentran los pesos de la red: {cfg.weights} (usar train-sdnn o --weights)')
    return storage.read_weights(cfg.weights)


def _assets_for(cfg: RunConfig):
    return load_assets(cfg.d, cfg.C, cfg.assets)


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------

def handle_solve(args) -> Dict[str, Any]:
    cfg, overrides = parse_config(args)
    problem = build_problem(cfg.problem, gamma=cfg.gamma)
    assets = _assets_for(cfg)
    mlp = _load_mlp(cfg)
    out_dir = cfg.out_dir or os.path.join(config.OUT_DIR, cfg.problem)
    started = time.time()
    solver = Solver(problem, cfg, assets, mlp)
    result = solver.run(out_dir)
    manifest = RunManifest(
        config=cfg.to_dict(),
        asset_hash=storage.sha256_file(storage.fc_asset_path(cfg.d, cfg.C, cfg.assets)),
        weights_hash=storage.sha256_file(cfg.weights) if mlp is not None else None,
        files=[os.path.basename(f) for f in result.files], wall_time=round(time.time() - started, 3),
        steps=result.steps, final_time=solver.t, metrics=solver.metrics, overrides=overrides)
    path = os.path.join(out_dir, 'manifest.json')
    storage.write_manifest(path, manifest.to_dict())
    return {'ok': True, 'problem': cfg.problem, 'steps': result.steps, 't': solver.t,
            'files': len(result.files), 'manifest': path}


def handle_train(args) -> Dict[str, Any]:
    assets = load_assets(args.d, config.DEFAULT_C, args.assets)
    train_set, val_set = generate_dataset(seed=args.seed, assets=assets, subsample=args.subsample)
    log.info(f'conjunto: {len(train_set)} de entrenamiento, {len(val_set)} de validación')
    print('epoch,loss,train_acc,val_acc', flush=True)

    def on_epoch(row):
        print(f"{row['epoch']},{row['loss']:.17g},{row['train_acc']:.6f},{row['val_acc']:.6f}", flush=True)

    result = train(train_set, val_set, epochs=args.epochs, seed=args.seed, lr=args.lr,
                   batch_size=args.batch, on_epoch=on_epoch)
    out = args.out or config.WEIGHTS_PATH
    if args.binary:
        storage.write_weights_binary(out, result.params)
    else:
        storage.write_weights(out, result.params)
    storage.write_manifest(weights_info_path(out), {
        'seed': args.seed, 'subsample': args.subsample, 'epochs': args.epochs, 'best_epoch': result.best_epoch,
        'val_acc': result.best_val_acc, 'train_size': len(train_set), 'val_size': len(val_set),
        'sha256': storage.sha256_file(out)})
    if args.history:
        storage.write_rows_csv(args.history, result.history)
    return {'ok': True, 'weights': out, 'best_epoch': result.best_epoch,
            'val_acc': result.best_val_acc, 'train_size': len(train_set), 'val_size': len(val_set)}


def handle_gen_assets(args) -> Dict[str, Any]:
    written = []
    for d in args.d:
        assets = generate_fc_assets(d, args.C, oversample=args.oversample)
        path = storage.fc_asset_path(d, args.C, args.out)
        storage.write_fc_assets(path, assets)
        written.append({'d': d, 'C': args.C, 'path': path, 'sha256': storage.sha256_file(path)})
    return {'ok': True, 'assets': written}


def handle_list(args) -> Dict[str, Any]:
    return {'ok': True, 'problems': list_problems()}


def handle_compare(args) -> Dict[str, Any]:
    methods = [m.strip() for m in args.methods.split(',') if m.strip()]
    if not methods:
        raise ConfigError('--methods vacío')
    runs, grid, base_cfg, problem, assets = {}, None, None, None, None
    for method in methods:
        args.method = method
        cfg, _ = parse_config(args)
        problem = build_problem(cfg.problem, gamma=cfg.gamma)
        assets = _assets_for(cfg)
        solver = Solver(problem, cfg, assets, _load_mlp(cfg))
        runs[method] = solver.run().snapshots
        grid, base_cfg = solver.grid, cfg
    if args.reference_n:
        ref_cfg = base_cfg
        oracle = self_reference(problem, ref_cfg, assets, _load_mlp(ref_cfg), n_ref=args.reference_n)
    elif problem.oracle is not None:
        oracle = problem.oracle
    else:
        oracle = snapshot_oracle(runs[methods[0]])
    out_dir = base_cfg.out_dir or os.path.join(config.OUT_DIR, base_cfg.problem)
    path = os.path.join(out_dir, 'compare.csv')
    rows = compare_report(runs, oracle, grid, path=path)
    return {'ok': True, 'rows': len(rows), 'report': path}


def handle_fd6(args) -> Dict[str, Any]:
    problem = build_problem(args.problem)
    n = args.n or problem.default_n
    t_end = args.t_end or problem.t_end
    snap = fd6_baseline(problem, n, t_end, dt=args.dt)
    grid = problem.build_grid(n, None)
    out_dir = args.out or os.path.join(config.OUT_DIR, 'fd6')
    path = os.path.join(out_dir, storage.snapshot_name('u', snap.t, prefix='fd6_'))
    storage.write_field_csv(path, {'x': grid.x, 'value': snap.fields['u']})
    metrics = error_metrics(snap.fields['u'], problem.oracle(grid, snap.t)['u'], grid)
    return {'ok': True, 'file': path, 't': snap.t, 'metrics': metrics}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument('--config', help='fichero [sección] clave = valor, o manifest.json de una ejecución previa')
    p.add_argument('--problem', help='identificador del problema (ver list-problems)')
    p.add_argument('--n', type=int, help='puntos de malla (N1 en 2D)')
    p.add_argument('--n2', type=int, help='puntos en y (2D)')
    p.add_argument('--d', type=int, help='orden FC (2 o 5)')
    p.add_argument('--cfl', type=float)
    p.add_argument('--t-end', dest='t_end', type=float)
    p.add_argument('--gamma', type=float)
    p.add_argument('--weights', help='pesos de la red (texto o binario)')
    p.add_argument('--assets', help='directorio de activos FC')
    p.add_argument('--out', help='directorio de salida')
    p.add_argument('--seed', type=int)
    p.add_argument('--max-steps', dest='max_steps', type=int)
    p.add_argument('--dump-every', dest='dump_every', type=float)
    p.add_argument('--dump-viscosity', dest='dump_viscosity', action='store_true', default=None)
    p.add_argument('--dump-oracle', dest='dump_oracle', action='store_true', default=None)
    p.add_argument('--no-filter', dest='filter', action='store_false', default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='shockfc', description='Solver FC-SDNN para leyes de conservación')
    parser.add_argument('--verbose', '-v', action='store_true', help='logging en nivel DEBUG')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('solve', help='ejecuta un problema')
    _add_run_flags(p)
    p.add_argument('--method', choices=('sdnn', 'ev', 'none'))
    p.set_defaults(handler=handle_solve)

    p = sub.add_parser('train-sdnn', help='genera el conjunto sintético y entrena el clasificador')
    p.add_argument('--out', help='fichero de pesos')
    p.add_argument('--epochs', type=int, default=config.TRAIN_EPOCHS)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--subsample', type=float, help='fracción del conjunto a usar (0, 1]')
    p.add_argument('--lr', type=float, default=config.TRAIN_LR)
    p.add_argument('--batch', type=int, default=config.TRAIN_BATCH)
    p.add_argument('--d', type=int, default=5)
    p.add_argument('--assets', help='directorio de activos FC')
    p.add_argument('--history', help='CSV con la historia por época')
    p.add_argument('--binary', action='store_true', help='guardar los pesos en formato binario')
    p.set_defaults(handler=handle_train)

    p = sub.add_parser('gen-fc-assets', help='genera las matrices FC-Gram')
    p.add_argument('--d', type=int, nargs='+', default=[2, 5])
    p.add_argument('--C', type=int, default=config.DEFAULT_C)
    p.add_argument('--oversample', type=int, default=config.DEFAULT_OVERSAMPLE)
    p.add_argument('--out', default=None, help='directorio destino (por defecto SHOCKFC_ASSET_DIR)')
    p.set_defaults(handler=handle_gen_assets)

    p = sub.add_parser('list-problems', help='lista los problemas disponibles')
    p.set_defaults(handler=handle_list)

    p = sub.add_parser('compare', help='compara métodos de viscosidad sobre un problema')
    _add_run_flags(p)
    p.add_argument('--methods', default='sdnn,ev')
    p.add_argument('--reference-n', dest='reference_n', type=int, help='referencia fina autogenerada (1D)')
    p.set_defaults(handler=handle_compare)

    p = sub.add_parser('fd6-baseline', help='diferencias finitas de orden 6 (advección periódica)')
    p.add_argument('--problem', default='advection-periodic')
    p.add_argument('--n', type=int)
    p.add_argument('--t-end', dest='t_end', type=float)
    p.add_argument('--dt', type=float, default=0.0034)
    p.add_argument('--out')
    p.set_defaults(handler=handle_fd6)
    return parser


def _setup_logging(verbose: bool) -> None:
    root = logging.getLogger()
    if root.handlers:
        return
    level = logging.DEBUG if verbose else getattr(logging, config.LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format='%(asctime)s [%(levelname)s] %(name)s: %(message)s')


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    code = 0
    try:
        result = args.handler(args)
    except ConfigError as e:
        log.error(f'configuración inválida: {e}')
        result, code = {'ok': False, 'error': str(e)}, 2
    except NumericalFailure as e:
        log.exception('fallo numérico')
        result, code = {'ok': False, 'error': str(e), 'step': e.step, 'time': e.time, 'field': e.field}, 3
    except ShockFcError as e:
        log.exception('error del solver')
        result, code = {'ok': False, 'error': str(e)}, 2
    print(json.dumps(result, ensure_ascii=False, default=storage.json_default))
    return code


def main() -> None:
    sys.exit(run())
