from dataclasses import dataclass, field, asdict
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

# Modelos de dominio compartidos por todos los módulos del solver


@dataclass
class Grid1D:
    x0: float
    h: float
    N: int
    periodic: bool = False

    @classmethod
    def on_interval(cls, a: float, b: float, N: int, periodic: bool = False) -> 'Grid1D':
        # periódica: x_N == x_0, así que el paso es L/N
        h = (b - a) / N if periodic else (b - a) / (N - 1)
        return cls(x0=float(a), h=float(h), N=int(N), periodic=periodic)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.N)

    @property
    def length(self) -> float:
        return self.h * (self.N if self.periodic else self.N - 1)

    @property
    def shape(self) -> Tuple[int]:
        return (self.N,)


@dataclass
class Grid2D:
    x0: float
    y0: float
    hx: float
    hy: float
    N1: int
    N2: int
    # máscara de puntos activos (dominios no rectangulares); None = rectángulo completo
    mask: Optional[np.ndarray] = None

    @classmethod
    def on_box(cls, xa: float, xb: float, ya: float, yb: float, N1: int,
               N2: Optional[int] = None) -> 'Grid2D':
        hx = (xb - xa) / (N1 - 1)
        if N2 is None:
            N2 = int(round((yb - ya) / hx)) + 1
        hy = (yb - ya) / (N2 - 1)
        return cls(x0=float(xa), y0=float(ya), hx=float(hx), hy=float(hy), N1=int(N1), N2=int(N2))

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.N1)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.N2)

    @property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing='ij')

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def active(self) -> np.ndarray:
        if self.mask is None:
            return np.ones((self.N1, self.N2), dtype=bool)
        return self.mask

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.N1, self.N2)

    @property
    def periodic(self) -> bool:
        return False


@dataclass(frozen=True)
class FcAssets:
    d: int
    C: int
    Q: np.ndarray
    Q_neumann: np.ndarray
    A_left: np.ndarray
    A_right: np.ndarray

    @property
    def left_map(self) -> np.ndarray:
        return self.A_left @ self.Q.T

    @property
    def right_map(self) -> np.ndarray:
        return self.A_right @ self.Q.T


@dataclass
class SpectralCoeffs:
    coeffs: np.ndarray
    beta: float
    M: int


@dataclass
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    W4: np.ndarray
    b4: np.ndarray

    NAMES = ('W1', 'b1', 'W2', 'b2', 'W3', 'b3', 'W4', 'b4')

    def layers(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        return [(self.W1, self.b1), (self.W2, self.b2), (self.W3, self.b3), (self.W4, self.b4)]

    def arrays(self) -> List[np.ndarray]:
        return [getattr(self, n) for n in self.NAMES]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> 'MlpParams':
        out, pos = {}, 0
        for n, a in zip(self.NAMES, self.arrays()):
            out[n] = np.asarray(vec[pos:pos + a.size], dtype=float).reshape(a.shape).copy()
            pos += a.size
        return MlpParams(**out)

    def copy(self) -> 'MlpParams':
        return MlpParams(**{n: a.copy() for n, a in zip(self.NAMES, self.arrays())})

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    @classmethod
    def zeros(cls, layers=(7, 16, 16, 16, 4)) -> 'MlpParams':
        out = {}
        for k, (n_in, n_out) in enumerate(zip(layers[:-1], layers[1:]), start=1):
            out[f'W{k}'] = np.zeros((n_out, n_in))
            out[f'b{k}'] = np.zeros(n_out)
        return cls(**out)


@dataclass
class StencilBatch:
    """Estenciles preprocesados en bloque: values (n, 7) y degenerate (n,)."""
    values: np.ndarray
    degenerate: np.ndarray


@dataclass
class StencilDataset:
    # X: (n, 7) estenciles normalizados; tau: (n,) clases 1..4
    X: np.ndarray
    tau: np.ndarray

    def __len__(self):
        return self.X.shape[0]

    def one_hot(self) -> np.ndarray:
        out = np.zeros((len(self), 4))
        out[np.arange(len(self)), self.tau.astype(int) - 1] = 1.0
        return out

    def subset(self, idx) -> 'StencilDataset':
        return StencilDataset(self.X[idx], self.tau[idx])


@dataclass(frozen=True)
class WindowSpec:
    c: int = 0
    r: int = 9

    def radius_cells(self) -> float:
        return self.c / 2 + self.r

    def support_radius(self, h: float) -> float:
        return self.radius_cells() * h


@dataclass
class EvParams:
    c_max: float = 0.5
    c_E: float = 1.0


@dataclass
class EquationSpec:
    kind: str  # advection | burgers1d | burgers2d | euler1d | euler2d
    a: float = 1.0
    gamma: float = 1.4

    @property
    def dim(self) -> int:
        return 2 if self.kind.endswith('2d') else 1

    @property
    def is_euler(self) -> bool:
        return self.kind.startswith('euler')


@dataclass
class FlowState:
    # conserved: (r, *grid.shape)
    conserved: np.ndarray
    gamma: float = 1.4


@dataclass
class Primitives:
    rho: Optional[np.ndarray]
    u: np.ndarray
    v: Optional[np.ndarray]
    p: Optional[np.ndarray]
    a: Optional[np.ndarray]
    mach: Optional[np.ndarray]


@dataclass
class BoundaryCondition:
    side: str   # left | right | bottom | top
    kind: str   # dirichlet | neumann | inflow | outflow | reflecting | oblique_neumann | evolve
    # dirichlet: g(t) -> valor (escalar o por componente); neumann: derivada normal prescrita
    data: Optional[Callable[[float], Any]] = None
    angle: Optional[float] = None
    # predicado sobre coordenadas (x, y) de los nodos de frontera
    where: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    KINDS = ('dirichlet', 'neumann', 'inflow', 'outflow', 'reflecting', 'oblique_neumann', 'evolve')


@dataclass
class RunConfig:
    problem: str
    n: int
    n2: Optional[int] = None
    d: int = 5
    C: int = 27
    cfl: float = 2.0
    t_end: float = 1.0
    method: str = 'sdnn'  # sdnn | ev | none
    filter_enabled: bool = True
    filter_alpha: float = 10.0
    filter_order: int = 14
    smear_c: int = 18
    smear_r: int = 9
    smear_alpha: float = 10.0
    smear_order: int = 2
    ev_c_max: float = 0.5
    ev_c_E: float = 1.0
    gamma: float = 1.4
    seed: int = 0
    dump_every: Optional[float] = None
    dump_viscosity: bool = False
    dump_oracle: bool = False
    out_dir: Optional[str] = None
    weights: Optional[str] = None
    assets: Optional[str] = None
    log_every: int = 50
    max_steps: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ProblemSpec:
    id: str
    equation: EquationSpec
    domain: Tuple[float, ...]
    default_n: int
    build_grid: Callable[[int, Optional[int]], Any]
    initial_state: Callable[[Any], FlowState]
    bcs: List[BoundaryCondition] = field(default_factory=list)
    cfl: float = 2.0
    t_end: float = 1.0
    d: int = 5
    periodic: bool = False
    # 1D: lista de posiciones; 2D: dict {'x': f(y) -> lista, 'y': f(x) -> lista}
    discontinuities: Any = field(default_factory=list)
    forced_tau_points: int = 0
    dump_times: Tuple[float, ...] = ()
    oracle: Optional[Callable[[Any, float], Dict[str, np.ndarray]]] = None
    # inicialización especial (doble Mach): f(grid, assets, mlp, config) -> FlowState
    custom_init: Optional[Callable[..., FlowState]] = None
    description: str = ''


@dataclass
class RiemannSolution:
    p_star: float
    u_star: float
    rho_star_left: float
    rho_star_right: float
    left_wave: str   # shock | rarefaction
    right_wave: str
    # velocidades características: choque -> (s, s); rarefacción -> (cabeza, cola)
    left_speeds: Tuple[float, float]
    right_speeds: Tuple[float, float]
    left: Tuple[float, float, float]
    right: Tuple[float, float, float]
    gamma: float = 1.4


@dataclass
class Snapshot:
    t: float
    fields: Dict[str, np.ndarray]
    mu: Optional[np.ndarray] = None
    tau: Optional[np.ndarray] = None


@dataclass
class RunManifest:
    config: Dict[str, Any]
    asset_hash: Optional[str] = None
    weights_hash: Optional[str] = None
    files: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    steps: int = 0
    final_time: float = 0.0
    metrics: Dict[str, Any] = field(default_factory=dict)
    overrides: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RunResult:
    snapshots: List[Snapshot]
    steps: int
    final_state: FlowState
    grid: Any
    files: List[str] = field(default_factory=list)
