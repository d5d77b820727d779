#!/usr/bin/env python3
"""Script de verificación: comprueba configuración, matrices FC-Gram y pesos de la red.

Uso: python verificar_config.py [config.ini]
"""

import os
import sys

import numpy as np

ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

print("=" * 60)
print("TEST: Verificación de configuración")
print("=" * 60)

# Test 1: Importar el paquete
print("\n1. Importando src.config...")
try:
    from src import config, storage
    from src.cli import build_parser, parse_config
    from src.errors import ShockFcError
    from src.fc_core import continuation
    from src.sdnn import weights_info_path
    print("   ✅ paquete importado correctamente")
except Exception as e:
    print(f"   ❌ ERROR al importar: {e}")
    sys.exit(1)

# Test 2: Directorios
print("\n2. Verificando directorios...")
print(f"   SHOCKFC_ASSET_DIR = {config.ASSET_DIR}")
print(f"   SHOCKFC_OUT_DIR   = {config.OUT_DIR}")
if os.path.isdir(config.ASSET_DIR):
    print("   ✅ el directorio de activos existe")
else:
    print("   ⚠️  el directorio de activos no existe (gen-fc-assets lo crea)")

# Test 3: Matrices FC-Gram
print("\n3. Verificando matrices FC-Gram...")
for d in (2, 5):
    path = storage.fc_asset_path(d, config.DEFAULT_C)
    if not os.path.exists(path):
        print(f"   ⚠️  falta {os.path.basename(path)} (python -m src.main gen-fc-assets)")
        continue
    try:
        assets = storage.read_fc_assets(path)
        ext = continuation(np.ones(4 * d), assets)
        ok = np.allclose(ext[:4 * d], 1.0)
        print(f"   {'✅' if ok else '❌'} d={d}: {os.path.basename(path)} ({ext.size} puntos extendidos)")
    except ShockFcError as e:
        print(f"   ❌ d={d}: {e}")

# Test 4: Pesos de la red
print("\n4. Verificando pesos de la red...")
if os.path.exists(config.WEIGHTS_PATH):
    try:
        params = storage.read_weights(config.WEIGHTS_PATH)
        print(f"   ✅ {config.WEIGHTS_PATH} ({params.flat().size} parámetros)")
        info_path = weights_info_path(config.WEIGHTS_PATH)
        if os.path.exists(info_path):
            info = storage.read_manifest(info_path)
            print(f"   ✅ seed={info.get('seed')} val_acc={info.get('val_acc')}")
    except ShockFcError as e:
        print(f"   ❌ ERROR: {e}")
else:
    print(f"   ⚠️  no hay pesos en {config.WEIGHTS_PATH}; se entrenarán en el primer solve (o ejecuta install.sh)")

# Test 5: Fichero de configuración
if len(sys.argv) > 1:
    print(f"\n5. Leyendo {sys.argv[1]}...")
    try:
        cfg, _ = parse_config(build_parser().parse_args(['solve', '--config', sys.argv[1]]))
        print(f"   ✅ problema={cfg.problem} n={cfg.n} método={cfg.method} t_end={cfg.t_end}")
    except ShockFcError as e:
        print(f"   ❌ ERROR: {e}")

print("\n" + "=" * 60)
print("RESUMEN")
print("=" * 60)
print("\n✅ = Todo correcto")
print("⚠️  = Atención requerida")
print("❌ = Error que debe corregirse")
print("\nSi ves '✅' en los pasos 1-4, el solver puede ejecutarse con el método sdnn.")
