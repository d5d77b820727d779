#!/usr/bin/env python3
"""Pruebas del núcleo FC: activos, continuación, derivadas, filtro y suavizado localizado."""
import numpy as np
import pytest

from src import storage
from src.app.models import WindowSpec
from src.errors import FcAssetError
from src.fc_core import (continuation, fc_derivative, fc_derivative_2d, fc_shifted_eval, filter_factors,
                         generate_fc_assets, global_filter, line_sections, localized_smear, neumann_boundary_value,
                         smear_window)


def test_gram_basis_orthonormal(assets5):
    Q = assets5.Q
    assert Q.shape == (5, 5)
    assert np.allclose(Q.T @ Q, np.eye(5), atol=1e-12)


def test_asset_dimensions(assets2, assets5):
    assert assets2.A_left.shape == (27, 2)
    assert assets5.A_right.shape == (27, 5)
    assert assets5.Q_neumann.shape == (5, 5)


def test_invalid_asset_parameters():
    with pytest.raises(FcAssetError):
        generate_fc_assets(1)
    with pytest.raises(FcAssetError):
        generate_fc_assets(5, C=6)


def test_continuation_length_and_prefix(assets5):
    x = np.linspace(0, 1, 40)
    v = np.cos(3 * x)
    ext = continuation(v, assets5)
    assert ext.shape == (40 + 27,)
    assert np.array_equal(ext[:40], v)


def test_continuation_requires_enough_points(assets5):
    with pytest.raises(ValueError):
        continuation(np.ones(9), assets5)


def test_derivative_convergence(assets5):
    errors = []
    for N in (50, 100, 200):
        x = np.linspace(0.0, 1.0, N)
        f = np.exp(np.sin(2 * x))
        exact = 2 * np.cos(2 * x) * f
        errors.append(np.max(np.abs(fc_derivative(f, assets5, 1.0) - exact)))
    assert errors[0] > errors[1] > errors[2]
    assert errors[0] / errors[2] >= 16
    assert errors[2] < 1e-3


def test_periodic_derivative_is_spectral():
    N = 32
    x = np.arange(N) / N
    u = np.sin(2 * np.pi * x)
    du = fc_derivative(u, None, 1.0, periodic=True)
    assert np.max(np.abs(du - 2 * np.pi * np.cos(2 * np.pi * x))) < 1e-10


def test_shifted_eval_endpoints(assets5):
    v = np.sin(np.linspace(0, 2, 30))
    ext = continuation(v, assets5)
    assert np.array_equal(fc_shifted_eval(v, assets5, 0.0), ext)
    # desplazar un paso completo equivale a rotar el vector extendido
    assert np.allclose(fc_shifted_eval(v, assets5, 1.0), np.roll(ext, -1), atol=1e-10)
    with pytest.raises(ValueError):
        fc_shifted_eval(v, assets5, 1.5)


def test_even_length_drops_nyquist_mode():
    N = 32
    x = np.arange(N) / N
    nyquist = (-1.0) ** np.arange(N)
    assert np.allclose(global_filter(nyquist, None, periodic=True), 0.0, atol=1e-14)
    assert np.allclose(fc_shifted_eval(nyquist, None, 0.5, periodic=True), 0.0, atol=1e-14)
    # el resto del espectro se desplaza sin cambios
    u = np.sin(2 * np.pi * x) + nyquist
    shifted = fc_shifted_eval(u, None, 0.5, periodic=True)
    assert np.allclose(shifted, np.sin(2 * np.pi * (x + 0.5 / N)), atol=1e-12)


def test_filter_factors():
    s = filter_factors(64, 10.0, 14)
    assert s[0] == 1.0
    assert np.isclose(s[-1], np.exp(-10.0))
    assert np.all(np.diff(s) <= 0)


def test_global_filter_rejects_odd_order(assets5):
    with pytest.raises(ValueError):
        global_filter(np.zeros(30), assets5, 10.0, 3)


def test_neumann_recovers_polynomial_boundary_value(assets5):
    N = 30
    x = np.linspace(0.0, 1.0, N)
    h = x[1] - x[0]
    f = 1.0 + x - 2 * x ** 3
    df = 1.0 - 6 * x ** 2
    right = neumann_boundary_value(f, df[-1], h, assets5, 'right')
    left = neumann_boundary_value(f, df[0], h, assets5, 'left')
    assert abs(right - f[-1]) < 1e-9
    assert abs(left - f[0]) < 1e-9


def test_smear_window_merges_close_jumps():
    x = np.linspace(0, 1, 201)
    h = x[1] - x[0]
    W = smear_window(x, [0.5, 0.52], WindowSpec(18, 9), h)
    between = (x >= 0.5) & (x <= 0.52)
    assert np.all(W[between] == 1.0)
    assert W[0] == 0.0 and W[-1] == 0.0


def test_localized_smear_only_touches_window(assets5):
    x = np.linspace(0, 1, 201)
    v = np.where(x < 0.5, 1.0, 0.0) + 0.1 * np.sin(3 * x)
    out = localized_smear(v, x, [0.5], assets5)
    h = x[1] - x[0]
    far = np.abs(x - 0.5) > (9 + 9) * h
    assert np.array_equal(out[far], v[far])
    assert not np.array_equal(out, v)
    with pytest.raises(ValueError):
        localized_smear(v, x, [2.0], assets5)


def test_line_sections_and_masked_derivative(assets5):
    N1, N2 = 40, 30
    mask = np.ones((N1, N2), dtype=bool)
    mask[25:, :10] = False
    sections = line_sections(mask, 0)
    assert set(sections) == {(0, 25), (0, 40)}
    x = np.linspace(0, 1, N1)
    field = np.repeat((x ** 2)[:, None], N2, axis=1)
    d = fc_derivative_2d(field, x[1] - x[0], 0, assets5, mask)
    assert np.allclose(d[:, 20], 2 * x, atol=1e-4)
    assert np.all(d[~mask] == 0.0)


def test_asset_file_roundtrip(tmp_path, assets2):
    path = storage.fc_asset_path(2, 27, str(tmp_path))
    storage.write_fc_assets(path, assets2)
    back = storage.read_fc_assets(path)
    assert np.array_equal(back.A_left, assets2.A_left)
    with open(path, 'ab') as f:
        f.write(b'x')
    with pytest.raises(FcAssetError):
        storage.read_fc_assets(path)


if __name__ == '__main__':
    print("=" * 60)
    print("TEST: núcleo FC")
    print("=" * 60)
    code = pytest.main([__file__, '-q'])
    print("\n✅ Todas las pruebas pasaron" if code == 0 else "\n❌ Hay pruebas fallidas")
