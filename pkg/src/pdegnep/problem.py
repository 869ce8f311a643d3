"""Game configuration and its discretization on a crossed mesh."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .mesh_fem import assemble_mass, build_crossed_mesh
from .penalty import Obstacles
from .state import DISTRIBUTED, QUADRANT_REGIONS, StateProblem

GNEP = "gnep"
COOP = "coop"
QUADRANTS = "quadrants"
SINGLE = "single"

# desired state per quadrant id (lower-left, lower-right, upper-left, upper-right);
# the zero target sits in the upper-right square, diagonally opposite 0.1
DEFAULT_YD = (0.1, 0.2, 0.3, 0.0)


@dataclass(frozen=True)
class GameConfig:
    """Parameters of the tracking game.

    ``yd`` holds the desired-state constant of each quadrant. With
    ``partition="quadrants"`` player ``i`` owns quadrant ``i + 1``; with
    ``partition="single"`` one player owns the whole square (and tracks the
    piecewise constant desired state). ``lower``/``upper`` are the control
    bounds, either one value for all players or one per player.
    """

    kind: str = DISTRIBUTED
    mode: str = GNEP
    alpha: float = 1e-5
    lower: object = -32.0
    upper: object = 32.0
    yd: tuple = DEFAULT_YD
    psi_lower: float = 0.0
    psi_upper: float = 0.3
    partition: str = QUADRANTS

    def __post_init__(self):
        if self.mode not in (GNEP, COOP):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.partition not in (QUADRANTS, SINGLE):
            raise ValueError(f"unknown partition {self.partition!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if len(self.yd) != 4:
            raise ValueError("yd needs one value per quadrant (4 values)")
        object.__setattr__(self, "yd", tuple(float(v) for v in self.yd))
        lo, hi = self.bounds()
        if np.any(lo >= hi):
            raise ValueError("control bounds must satisfy lower < upper")
        if not self.psi_lower < self.psi_upper:
            raise ValueError("state obstacles must satisfy psi_lower < psi_upper")

    @property
    def regions(self):
        return QUADRANT_REGIONS if self.partition == QUADRANTS else ((1, 2, 3, 4),)

    @property
    def n_players(self):
        return len(self.regions)

    def bounds(self):
        n = self.n_players
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        return lo, hi

    def to_dict(self):
        d = asdict(self)
        for key in ("lower", "upper"):
            v = d[key]
            d[key] = float(v) if np.ndim(v) == 0 else [float(x) for x in v]
        d["yd"] = list(self.yd)
        return d


@dataclass
class Player:
    support: np.ndarray
    weights: np.ndarray
    lower: float
    upper: float
    tracking_mass: object
    tracking_load: np.ndarray
    tracking_const: float
    regions: tuple = field(default=())


class DiscreteGame:
    """Everything the solvers need for one configuration on one mesh."""

    def __init__(self, cfg, mesh):
        self.cfg = cfg
        self.mesh = mesh
        self.state = StateProblem(mesh, cfg.kind, cfg.regions)
        self.obstacles = Obstacles(cfg.psi_lower, cfg.psi_upper)
        self.lo, self.hi = self.obstacles.arrays(mesh)
        self.penalty_weights = self.state.lumped
        masses = {q: assemble_mass(mesh, q) for q in range(1, 5)}
        ones = np.ones(mesh.n_vertices)
        lo, hi = cfg.bounds()
        self.players = []
        for i, region in enumerate(cfg.regions):
            M = sum(masses[q] for q in region).tocsr()
            load = sum(cfg.yd[q - 1] * (masses[q] @ ones) for q in region)
            const = 0.5 * sum(cfg.yd[q - 1] ** 2 * float(ones @ (masses[q] @ ones))
                              for q in region)
            self.players.append(Player(
                support=self.state.supports[i],
                weights=self.state.control_weights[i],
                lower=float(lo[i]),
                upper=float(hi[i]),
                tracking_mass=M,
                tracking_load=np.asarray(load, dtype=float),
                tracking_const=const,
                regions=region,
            ))

    @classmethod
    def build(cls, cfg, n):
        return cls(cfg, build_crossed_mesh(n))

    @property
    def n_players(self):
        return len(self.players)

    @property
    def alpha(self):
        return self.cfg.alpha

    def tracking_term(self, i, y):
        """``1/2 ||y - yd||^2`` over player ``i``'s quadrants."""
        pl = self.players[i]
        y = np.asarray(y)
        return 0.5 * float(y @ (pl.tracking_mass @ y)) - float(y @ pl.tracking_load) \
            + pl.tracking_const

    def control_term(self, i, u_i):
        pl = self.players[i]
        u_i = np.asarray(u_i)
        return 0.5 * self.alpha * float(pl.weights @ (u_i * u_i))

    def project(self, i, values):
        pl = self.players[i]
        return np.clip(values, pl.lower, pl.upper)

    def zero_controls(self):
        return self.state.zero_controls()
