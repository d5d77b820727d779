#!/usr/bin/env python3
"""Pruebas de configuración, CLI, ficheros de salida e informes de error."""
import json
import os

import numpy as np
import pytest

from src import cli, config, sdnn, storage
from src.app.models import Grid1D, RunConfig, Snapshot, StencilDataset
from src.errors import ConfigError, GridMismatchError, NumericalFailure, WeightFileError
from src.reports import compare_report, error_metrics, fd6_baseline, snapshot_oracle, total_variation
from src.problems import build_problem
from src.sdnn import glorot_init


def _args(*argv):
    return cli.build_parser().parse_args(['solve', *argv])


def _write_json(path, payload):
    with open(path, 'w', encoding='utf8') as f:
        json.dump(payload, f)
    return str(path)


def _write_text(path, text):
    with open(path, 'w', encoding='utf8') as f:
        f.write(text)
    return str(path)


# --- configuración ----------------------------------------------------------

def test_defaults_come_from_problem():
    cfg, overrides = cli.parse_config(_args('--problem', 'sod'))
    assert (cfg.n, cfg.d, cfg.cfl, cfg.t_end) == (500, 5, 2.0, 0.2)
    assert cfg.method == 'sdnn' and cfg.filter_enabled
    assert cfg.weights == config.WEIGHTS_PATH
    assert overrides == {}


def test_missing_problem():
    with pytest.raises(ConfigError):
        cli.parse_config(_args('--n', '100'))


def test_flag_beats_file(tmp_path):
    path = _write_text(tmp_path / 'run.ini', '[run]\nproblem = sod\nn = 300\nmethod = ev\n\n[filter]\nenabled = false\n')
    cfg, overrides = cli.parse_config(_args('--config', path, '--n', '400'))
    assert cfg.n == 400
    assert cfg.method == 'ev'
    assert cfg.filter_enabled is False
    assert overrides == {'n': {'file': 300, 'flag': 400}}


def test_key_value_file_types(tmp_path):
    path = _write_text(tmp_path / 'run.ini', '# comentario\n[run]\nproblem = lax\nn = 250\ncfl = 1.5\n'
                                             'max_steps = none\n\n[fc]\nd = 2\nC = 27\n\n'
                                             '[output]\ndump_viscosity = yes\ndump_every = 0.1\n')
    cfg, _ = cli.parse_config(_args('--config', path))
    assert (cfg.problem, cfg.n, cfg.cfl, cfg.d, cfg.C) == ('lax', 250, 1.5, 2, 27)
    assert cfg.max_steps is None and cfg.dump_viscosity is True and cfg.dump_every == 0.1


@pytest.mark.parametrize('text', [
    '[run]\nproblem = sod\nnn = 3\n',
    '[solver]\nn = 3\n',
    'problem = sod\n',
    '[run]\nproblem = sod\nn = 3\nn = 4\n',
    '[run]\nproblem = sod\nn = muchos\n',
    '[run]\nproblem = sod\n\n[filter]\nenabled = quizás\n',
])
def test_invalid_key_value_files(tmp_path, text):
    path = _write_text(tmp_path / 'bad.ini', text)
    with pytest.raises(ConfigError):
        cli.parse_config(_args('--config', path))


def test_example_config_is_valid():
    root = os.path.dirname(os.path.abspath(__file__))
    cfg, _ = cli.parse_config(_args('--config', os.path.join(root, 'config_example.ini')))
    assert cfg.problem == 'sod' and cfg.n == 500 and cfg.dump_oracle


def test_unknown_keys_are_rejected(tmp_path):
    bad_key = _write_json(tmp_path / 'a.json', {'run': {'problem': 'sod', 'nn': 3}})
    bad_section = _write_json(tmp_path / 'b.json', {'solver': {'n': 3}})
    with pytest.raises(ConfigError):
        cli.parse_config(_args('--config', bad_key))
    with pytest.raises(ConfigError):
        cli.parse_config(_args('--config', bad_section))
    with pytest.raises(ConfigError):
        cli.parse_config(_args('--config', str(tmp_path / 'missing.json')))
    with pytest.raises(ConfigError):
        cli.parse_config(_args('--config', str(tmp_path / 'missing.ini')))


def test_manifest_is_a_valid_config(tmp_path):
    previous = RunConfig(problem='lax', n=250, method='ev', t_end=0.5)
    path = _write_json(tmp_path / 'manifest.json', {'config': previous.to_dict(), 'steps': 10})
    cfg, _ = cli.parse_config(_args('--config', path))
    assert cfg == previous


def test_invalid_values():
    with pytest.raises(ConfigError):
        cli.parse_config(_args('--problem', 'sod', '--cfl', '-1'))
    with pytest.raises(ConfigError):
        cli.parse_config(_args('--problem', 'sod', '--n', '5'))
    with pytest.raises(ConfigError):
        cli.parse_config(_args('--problem', 'nope'))


# --- CLI --------------------------------------------------------------------

def test_list_problems_command(capsys):
    assert cli.run(['list-problems']) == 0
    out = json.loads(capsys.readouterr().out)
    assert out['ok'] and any(p['id'] == 'double-mach' for p in out['problems'])


def test_solve_without_problem_exits_with_config_code(capsys):
    assert cli.run(['solve']) == 2
    assert json.loads(capsys.readouterr().out)['ok'] is False


def test_solve_without_weights(tmp_path, capsys):
    code = cli.run(['solve', '--problem', 'sod', '--weights', str(tmp_path / 'none.fcsdnn'),
                    '--assets', str(tmp_path), '--out', str(tmp_path)])
    assert code == 2
    assert 'pesos' in json.loads(capsys.readouterr().out)['error']


def test_solve_trains_default_weights_once(tmp_path, monkeypatch, capsys):
    default = tmp_path / 'assets' / 'sdnn_weights.fcsdnn'
    monkeypatch.setattr(config, 'WEIGHTS_PATH', str(default))
    calls = []

    def tiny_dataset(seed=0, assets=None, subsample=None):
        calls.append((seed, subsample))
        X = np.random.default_rng(seed).uniform(-1, 1, size=(40, 7))
        data = StencilDataset(X=X, tau=np.where(X[:, 3] > 0, 1, 4).astype(np.int8))
        return data.subset(slice(0, 32)), data.subset(slice(32, 40))

    monkeypatch.setattr(sdnn, 'generate_dataset', tiny_dataset)
    argv = ['solve', '--problem', 'sod', '--n', '100', '--t-end', '0.01', '--assets', str(tmp_path / 'assets'),
            '--out', str(tmp_path / 'out')]
    assert cli.run(argv) == 0
    assert default.exists() and (tmp_path / 'assets' / 'sdnn_weights.json').exists()
    manifest = storage.read_manifest(json.loads(capsys.readouterr().out)['manifest'])
    assert manifest['weights_hash'] == storage.sha256_file(str(default))
    assert cli.run(argv) == 0
    assert calls == [(config.DEFAULT_WEIGHTS_SEED, config.DEFAULT_WEIGHTS_SUBSAMPLE)]


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    class Exploding:
        def __init__(self, *args, **kw):
            pass

        def run(self, out_dir=None):
            raise NumericalFailure('presión no positiva', step=3, time=0.1, field='p')

    monkeypatch.setattr(cli, 'Solver', Exploding)
    code = cli.run(['solve', '--problem', 'sod', '--method', 'ev', '--assets', str(tmp_path),
                    '--out', str(tmp_path)])
    assert code == 3
    out = json.loads(capsys.readouterr().out)
    assert out['step'] == 3 and out['field'] == 'p'


def test_solve_end_to_end(tmp_path, capsys):
    out_dir = tmp_path / 'out'
    code = cli.run(['solve', '--problem', 'advection-bc', '--method', 'ev', '--n', '100', '--t-end', '0.1',
                    '--dump-viscosity', '--dump-oracle', '--assets', str(tmp_path / 'assets'),
                    '--out', str(out_dir)])
    assert code == 0
    result = json.loads(capsys.readouterr().out)
    manifest = storage.read_manifest(result['manifest'])
    assert manifest['config']['problem'] == 'advection-bc'
    assert manifest['asset_hash'] is not None
    assert manifest['weights_hash'] is None
    assert manifest['final_time'] == pytest.approx(0.1)
    for name in manifest['files']:
        assert os.path.exists(out_dir / name)
    assert os.path.exists(out_dir / storage.snapshot_name('mu', 0.1))
    assert os.path.exists(out_dir / storage.snapshot_name('u', 0.1, prefix='oracle_'))
    assert manifest['metrics']
    field = storage.read_field_csv(str(out_dir / storage.snapshot_name('u', 0.1)))
    assert list(field) == ['x', 'value'] and field['x'].size == 100


def test_gen_assets_and_compare(tmp_path, capsys):
    assets_dir = str(tmp_path / 'assets')
    assert cli.run(['gen-fc-assets', '--d', '2', '--out', assets_dir]) == 0
    assert os.path.exists(storage.fc_asset_path(2, 27, assets_dir))
    capsys.readouterr()
    code = cli.run(['compare', '--problem', 'advection-bc', '--n', '100', '--t-end', '0.05',
                    '--methods', 'ev,none', '--assets', assets_dir, '--out', str(tmp_path)])
    assert code == 0
    with open(tmp_path / 'compare.csv', encoding='utf8') as f:
        lines = f.read().strip().splitlines()
    assert lines[0] == 'time,method,field,L1,L2,Linf,TV'
    assert len(lines) == 1 + 2


def test_fd6_command(tmp_path, capsys):
    assert cli.run(['fd6-baseline', '--n', '90', '--t-end', '1.0', '--out', str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert os.path.exists(out['file'])
    assert out['metrics']['Linf'] < 0.1
    assert cli.run(['fd6-baseline', '--problem', 'sod']) == 2


# --- ficheros ---------------------------------------------------------------

def test_weights_files_are_bit_exact(tmp_path):
    params = glorot_init(11)
    text, binary = str(tmp_path / 'w.fcsdnn'), str(tmp_path / 'w.bin')
    storage.write_weights(text, params)
    storage.write_weights_binary(binary, params)
    assert np.array_equal(storage.read_weights(text).flat(), params.flat())
    assert np.array_equal(storage.read_weights(binary).flat(), params.flat())
    with open(text, 'w', encoding='utf8') as f:
        f.write('OTRO 7 16 16 16 4\n')
    with pytest.raises(WeightFileError):
        storage.read_weights(text)


def test_field_csv_is_bit_exact(tmp_path, rng):
    x = np.linspace(0, 1, 17)
    v = rng.standard_normal(17)
    path = str(tmp_path / storage.snapshot_name('rho', 0.2))
    storage.write_field_csv(path, {'x': x, 'value': v})
    back = storage.read_field_csv(path)
    assert np.array_equal(back['x'], x) and np.array_equal(back['value'], v)
    assert os.path.basename(path) == 'rho_t0.2.csv'


# --- métricas e informes ------------------------------------------------------

def test_error_metrics():
    grid = Grid1D.on_interval(0.0, 2.0, 41)
    v = np.sin(grid.x)
    zero = error_metrics(v, v, grid)
    assert zero['L1'] == 0.0 and zero['L2'] == 0.0 and zero['Linf'] == 0.0
    shifted = error_metrics(v + 1e-3, v, grid)
    assert shifted['L1'] == pytest.approx(2e-3)
    assert shifted['L1_mean'] == pytest.approx(1e-3)
    assert shifted['Linf'] == pytest.approx(1e-3)
    with pytest.raises(GridMismatchError):
        error_metrics(v, v[:-1], grid)


def test_total_variation():
    assert total_variation(np.array([0.0, 1.0, 0.0, 2.0])) == 4.0
    mask = np.ones((3, 3), dtype=bool)
    mask[1, 1] = False
    field = np.zeros((3, 3))
    field[1, 1] = 100.0
    assert total_variation(field, mask) == 0.0


def test_compare_report(tmp_path):
    grid = Grid1D.on_interval(0.0, 1.0, 11)
    ref = {'u': np.zeros(11)}
    runs = {m: [Snapshot(t, {'u': np.full(11, k)}) for t in (0.1, 0.2)] for k, m in enumerate(('ev', 'sdnn'))}
    path = str(tmp_path / 'compare.csv')
    rows = compare_report(runs, lambda g, t: ref, grid, path=path)
    assert len(rows) == 4
    assert [r['method'] for r in rows] == ['ev', 'sdnn', 'ev', 'sdnn']
    assert rows[1]['Linf'] == 1.0
    assert os.path.exists(path)
    runs['sdnn'] = runs['sdnn'][:1]
    with pytest.raises(GridMismatchError):
        compare_report(runs, lambda g, t: ref, grid)


def test_snapshot_oracle():
    oracle = snapshot_oracle([Snapshot(0.5, {'u': np.ones(3)})])
    assert np.array_equal(oracle(None, 0.5)['u'], np.ones(3))
    with pytest.raises(GridMismatchError):
        oracle(None, 0.25)


def test_fd6_only_for_periodic_advection():
    with pytest.raises(ConfigError):
        fd6_baseline(build_problem('sod'), 100, 0.1)
    snap = fd6_baseline(build_problem('advection-periodic'), 90, 0.1)
    assert snap.t == pytest.approx(0.1)


if __name__ == '__main__':
    print("=" * 60)
    print("TEST: CLI, ficheros e informes")
    print("=" * 60)
    code = pytest.main([__file__, '-q'])
    print("\n✅ Todas las pruebas pasaron" if code == 0 else "\n❌ Hay pruebas fallidas")
