"""Penalized first-order systems with controls eliminated by projection.

Unknowns are the state and one adjoint per *group* of players, restricted to
free vertices and stacked as ``z = [y, p_1, ..., p_G]``. In Nash mode every
player forms its own group; in cooperative mode all players share a single
adjoint. Controls are never unknowns: player ``i`` in group ``g`` plays

    u_i = clip(-p_g / alpha, a_i, b_i)    on its support.

The residual is

    F_y = A(y) - sum_i B_i u_i - f_fixed
    F_g = DA(y) p_g - M_g (y - yd) - gamma * m * ((y - hi)_+ - (lo - y)_+)

where ``M_g`` is the tracking mass of the group and ``m`` the lumped mass.
The generalized Jacobian takes derivative 0 of ``max(., 0)`` at the kink and
of the projection at the bounds.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import SolverError
from .mesh_fem import FeFunction, nested_dissection
from .newton import DampingPolicy, semismooth_newton, sparse_lu_solve
from .penalty import active_masks, beta_value, violations
from .problem import COOP


def mode_groups(game, mode=None):
    mode = mode or game.cfg.mode
    if mode == COOP:
        return [tuple(range(game.n_players))]
    return [(i,) for i in range(game.n_players)]


@dataclass
class EquilibriumState:
    """Solution data of one penalized system.

    ``mu_upper``/``mu_lower`` are the nonnegative cone components of the
    multiplier proxy as functionals (``gamma * m * (y - hi)_+`` and
    ``gamma * m * (lo - y)_+``); ``mu`` is their signed difference, which is
    ``gamma`` times the penalty gradient.
    """

    controls: list
    y: FeFunction
    adjoints: list
    groups: list
    gamma: float
    mu_upper: np.ndarray
    mu_lower: np.ndarray
    lambdas: list
    mode: str

    @property
    def mu(self):
        return self.mu_upper - self.mu_lower

    def adjoint_of(self, i):
        for g, members in enumerate(self.groups):
            if i in members:
                return self.adjoints[g]
        raise KeyError(i)


class KktSystem:
    """Discrete penalized first-order system of a :class:`DiscreteGame`.

    Parameters
    ----------
    game : DiscreteGame
    gamma : float
        Penalty parameter (``0`` switches the penalty off).
    groups : list of tuple of int
        Players sharing each adjoint. Players not listed are frozen; their
        influence enters through ``fixed_load``.
    fixed_load : ndarray, optional
        Extra right-hand side of the state equation.
    """

    def __init__(self, game, gamma, groups=None, fixed_load=None):
        self.game = game
        self.gamma = float(gamma)
        self.groups = [tuple(g) for g in (groups if groups is not None else mode_groups(game))]
        st = game.state
        self.free = st.free
        self.nf = self.free.size
        self.nv = st.n_vertices
        f = self.free
        self.L0 = st.L0[f][:, f].tocsr()
        self.c = st.cubic_weights[f]
        self.m = game.penalty_weights[f]
        self.lo = game.lo[f]
        self.hi = game.hi[f]
        self.fixed = np.zeros(self.nf) if fixed_load is None else np.asarray(fixed_load)[f]
        self.track_mass = []
        self.track_load = []
        for g in self.groups:
            M = sum(game.players[i].tracking_mass for i in g)
            self.track_mass.append(M[f][:, f].tocsr())
            self.track_load.append(sum(game.players[i].tracking_load for i in g)[f])
        # player -> (group, full-length weights restricted to free, bounds)
        self.ctrl = []
        for gi, g in enumerate(self.groups):
            for i in g:
                pl = game.players[i]
                w = np.zeros(self.nv)
                w[pl.support] = pl.weights
                self.ctrl.append((i, gi, w[f], pl.lower, pl.upper))

    def _ordering(self):
        # vertex-interleaved nested dissection, cached on the game
        key = ("nd", len(self.groups))
        cache = self.game.__dict__.setdefault("_orderings", {})
        if key not in cache:
            order = nested_dissection(self.game.mesh, self.free)
            pos = np.searchsorted(self.free, order)
            blocks = self.nf * np.arange(len(self.groups) + 1)
            cache[key] = (pos[:, None] + blocks[None, :]).ravel()
        return cache[key]

    def linear_solve(self, J, rhs):
        return sparse_lu_solve(J, rhs, self._ordering())

    @property
    def size(self):
        return self.nf * (1 + len(self.groups))

    def split(self, z):
        z = np.asarray(z)
        y = z[: self.nf]
        ps = [z[self.nf * (k + 1): self.nf * (k + 2)] for k in range(len(self.groups))]
        return y, ps

    def residual(self, z):
        y, ps = self.split(z)
        a = self.game.alpha
        Fy = self.L0 @ y + self.c * y**3 - self.fixed
        for _, gi, w, lo, hi in self.ctrl:
            Fy -= w * np.clip(-ps[gi] / a, lo, hi)
        up, down = violations(y, self.lo, self.hi)
        pen = self.gamma * self.m * (up - down)
        out = [Fy]
        for gi, p in enumerate(ps):
            Fp = self.L0 @ p + 3.0 * self.c * y * y * p \
                - (self.track_mass[gi] @ y - self.track_load[gi]) - pen
            out.append(Fp)
        return np.concatenate(out)

    def jacobian(self, z):
        y, ps = self.split(z)
        a = self.game.alpha
        G = len(self.groups)
        DA = (self.L0 + sp.diags(3.0 * self.c * y * y)).tocsr()
        up, down = active_masks(y, self.lo, self.hi)
        pen_diag = self.gamma * self.m * (up | down)
        coupling = [np.zeros(self.nf) for _ in range(G)]
        for _, gi, w, lo, hi in self.ctrl:
            v = -ps[gi] / a
            coupling[gi] += w * ((v > lo) & (v < hi)) / a
        blocks = [[None] * (G + 1) for _ in range(G + 1)]
        blocks[0][0] = DA
        for gi, p in enumerate(ps):
            blocks[0][gi + 1] = sp.diags(coupling[gi])
            blocks[gi + 1][0] = sp.diags(6.0 * self.c * y * p - pen_diag) - self.track_mass[gi]
            blocks[gi + 1][gi + 1] = DA
        return sp.bmat(blocks, format="csc")

    def reference_norm(self):
        return float(np.linalg.norm(self.residual(np.zeros(self.size))))

    def embed(self, v):
        out = np.zeros(self.nv)
        out[self.free] = v
        return out

    def pack(self, y, adjoints):
        parts = [np.asarray(y)[self.free]] + [np.asarray(p)[self.free] for p in adjoints]
        return np.concatenate(parts)

    def controls(self, z):
        """Recovered controls ``{player: values on support}`` for controlled players."""
        _, ps = self.split(z)
        out = {}
        for i, gi, _, lo, hi in self.ctrl:
            pl = self.game.players[i]
            p_full = self.embed(ps[gi])
            out[i] = np.clip(-p_full[pl.support] / self.game.alpha, lo, hi)
        return out

    def penalty(self, z):
        y, _ = self.split(z)
        return beta_value(y, self.lo, self.hi, self.m)

    def to_state(self, z, mode=None):
        game = self.game
        y_f, ps = self.split(z)
        y = self.embed(y_f)
        space = game.state.space
        adj = [FeFunction(game.mesh, self.embed(p), space) for p in ps]
        ctrl = self.controls(z)
        controls = [ctrl.get(i) for i in range(game.n_players)]
        up, down = violations(y, game.lo, game.hi)
        m = game.penalty_weights
        lambdas = []
        for i in range(game.n_players):
            if controls[i] is None:
                lambdas.append(None)
                continue
            pl = game.players[i]
            p_i = next(adj[g] for g, members in enumerate(self.groups) if i in members)
            lambdas.append(-pl.weights * (game.alpha * controls[i] + p_i.values[pl.support]))
        return EquilibriumState(
            controls=controls,
            y=FeFunction(game.mesh, y, space),
            adjoints=adj,
            groups=self.groups,
            gamma=self.gamma,
            mu_upper=self.gamma * m * up,
            mu_lower=self.gamma * m * down,
            lambdas=lambdas,
            mode=mode or game.cfg.mode,
        )


def solve_penalized(system, z0=None, policy=None):
    """Semismooth Newton solve of a :class:`KktSystem`."""
    z0 = np.zeros(system.size) if z0 is None else np.asarray(z0, dtype=float)
    return semismooth_newton(
        system.residual, system.jacobian, z0, policy or DampingPolicy(),
        ref_norm=system.reference_norm(), linear_solver=system.linear_solve,
    )


class ToyGame:
    """Two players, scalar state ``y = u1 + u2``, ``J_i = (y - d_i)^2/2 + alpha u_i^2/2``."""

    n_players = 2

    def __init__(self, alpha, d1, d2):
        self.alpha = float(alpha)
        self.d = np.array([d1, d2], dtype=float)
        self.matrix = np.array([[1.0 + self.alpha, 1.0], [1.0, 1.0 + self.alpha]])
        if abs(np.linalg.det(self.matrix)) < 1e-14:
            raise SolverError(f"degenerate toy game: alpha = {alpha}")

    def costs(self, u):
        u = np.asarray(u, dtype=float)
        y = u.sum()
        return 0.5 * (y - self.d) ** 2 + 0.5 * self.alpha * u**2

    def residual(self, u):
        return self.matrix @ np.asarray(u, dtype=float) - self.d

    def jacobian(self, u):
        return sp.csc_matrix(self.matrix)

    def best_response(self, i, u):
        return (self.d[i] - np.asarray(u)[1 - i]) / (1.0 + self.alpha)

    def closed_form(self):
        return np.linalg.solve(self.matrix, self.d)


def solve_toy_game(game):
    """Equilibrium of a :class:`ToyGame` via the Newton driver."""
    u, _ = semismooth_newton(game.residual, game.jacobian, np.zeros(2),
                             atol=1e-14, rtol=1e-14)
    return u
