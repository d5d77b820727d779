import os

import numpy as np
import pytest

from src import config as settings
from src.app.models import MlpParams
from src.fc_core import generate_fc_assets
from src.sdnn import ensure_weights


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='ejecuta también las simulaciones largas y el entrenamiento completo')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: simulación o entrenamiento de varios minutos')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='usar --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope='session')
def assets5():
    return generate_fc_assets(5)


@pytest.fixture(scope='session')
def assets2():
    return generate_fc_assets(2)


@pytest.fixture(scope='session')
def sdnn_weights(request, assets5):
    """Pesos por defecto del repo; si faltan se entrenan (semilla 0, 20 %) solo con --runslow."""
    if not os.path.exists(settings.WEIGHTS_PATH) and not request.config.getoption('--runslow'):
        pytest.skip(f'no hay pesos en {settings.WEIGHTS_PATH}: ejecutar install.sh o usar --runslow')
    return ensure_weights(settings.WEIGHTS_PATH, assets5)


def constant_classifier(cls: int) -> MlpParams:
    """Red que asigna siempre la clase `cls` (salvo estenciles degenerados)."""
    params = MlpParams.zeros()
    params.b4[:] = 0.0
    params.b4[cls - 1] = 10.0
    return params


@pytest.fixture
def mlp_class():
    return constant_classifier


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
