import os

# Configuración del solver: variables de entorno con valores por defecto

BASE_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))

ASSET_DIR = os.environ.get('SHOCKFC_ASSET_DIR', os.path.join(BASE_DIR, 'assets'))
WEIGHTS_PATH = os.environ.get('SHOCKFC_WEIGHTS', os.path.join(ASSET_DIR, 'sdnn_weights.fcsdnn'))
OUT_DIR = os.environ.get('SHOCKFC_OUT_DIR', os.path.join(BASE_DIR, 'out'))
LOG_LEVEL = os.environ.get('SHOCKFC_LOG_LEVEL', 'INFO')

# FC-Gram
DEFAULT_C = 27
DEFAULT_OVERSAMPLE = 20
SVD_CUTOFF = 1e-12
FIT_TOLERANCE = 1e-6

# Clasificador
SDNN_EPSILON = 0.01
CLASSIFY_DELTA_FRACTION = 0.1
MLP_LAYERS = (7, 16, 16, 16, 4)
TRAIN_BATCH = 128
TRAIN_LR = 1e-6
TRAIN_EPOCHS = 400

# Pesos por defecto (assets/sdnn_weights.fcsdnn) cuando no existen
DEFAULT_WEIGHTS_SEED = 0
DEFAULT_WEIGHTS_SUBSAMPLE = 0.2
MIN_VAL_ACC = 0.985

# Filtro global en cada paso y suavizado localizado en t=0
FILTER_ALPHA = 10.0
FILTER_ORDER = 14
SMEAR_C = 18
SMEAR_R = 9
SMEAR_ALPHA = 10.0
SMEAR_ORDER = 2

# Viscosidad
VISC_WINDOW_C = 0
VISC_WINDOW_R = 9
EV_C_MAX = 0.5
EV_C_E = 1.0
EV_NORM_FLOOR = 1e-14

GAMMA = 1.4
LOG_EVERY = 50
