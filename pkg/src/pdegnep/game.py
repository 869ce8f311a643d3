"""Objectives, Nikaido-Isoda functional, value function and diagnostics."""

from dataclasses import dataclass

import numpy as np

from .kkt import KktSystem, solve_penalized
from .penalty import beta_value


def objective(game, i, u_i, y):
    """``J_i = 1/2 ||y - yd_i||^2_{omega_i} + alpha/2 ||u_i||^2`` on the player's control set."""
    y = y.values if hasattr(y, "values") else y
    return game.tracking_term(i, y) + game.control_term(i, u_i)


def summed_objective(game, controls, y):
    return sum(objective(game, i, controls[i], y) for i in range(game.n_players))


def penalty_of(game, y):
    y = y.values if hasattr(y, "values") else y
    return beta_value(y, game.lo, game.hi, game.penalty_weights)


def _replace(u, i, v_i):
    w = list(u)
    w[i] = v_i
    return w


def player_costs(game, u, gamma=None, policy=None):
    """Per-player objective values at ``u`` (optionally with ``gamma * beta`` added)."""
    if hasattr(game, "costs"):
        return np.asarray(game.costs(u), dtype=float)
    y, _ = game.state.solve_state(u, policy=policy)
    extra = 0.0 if gamma is None else gamma * penalty_of(game, y)
    return np.array([objective(game, i, u[i], y) + extra for i in range(game.n_players)])


def nikaido_isoda(game, u, v, gamma=None, policy=None):
    """``Psi(u, v) = sum_i J_i(u_i, u_-i) - J_i(v_i, u_-i)``.

    Works for PDE games (``N + 1`` state solves) and for any object exposing
    ``costs(u)`` such as :class:`~pdegnep.kkt.ToyGame`. ``gamma`` adds the
    penalty ``gamma * beta(y)`` to every objective.
    """
    base = player_costs(game, u, gamma, policy)
    total = 0.0
    for i in range(game.n_players):
        dev = player_costs(game, _replace(u, i, v[i]), gamma, policy)
        total += base[i] - dev[i]
    return float(total)


def nikaido_isoda_sup(game, u, deviations=None, gamma=None):
    """Surrogate of ``V(u) = sup_v Psi(u, v)``.

    With ``deviations`` the supremum is taken over the given candidates (the
    value at ``v = u``, zero, is always included). Without them the game must
    provide ``best_response(i, u)``, which gives the exact supremum.
    """
    if deviations is None:
        v = [game.best_response(i, u) for i in range(game.n_players)]
        return max(nikaido_isoda(game, u, v, gamma), 0.0)
    return max([0.0] + [nikaido_isoda(game, u, v, gamma) for v in deviations])


@dataclass
class BestResponse:
    player: int
    control: np.ndarray
    y: object
    value: float
    beta: float
    newton: object


def best_response(game, i, gamma, u_bar, start=None, policy=None):
    """Penalized best response of player ``i`` against ``u_bar``.

    ``start`` (an :class:`EquilibriumState`) warm-starts the Newton solve.
    """
    load = np.zeros(game.state.n_vertices)
    for j in range(game.n_players):
        if j != i:
            load += game.state.apply_B(j, u_bar[j])
    system = KktSystem(game, gamma, groups=[(i,)], fixed_load=load)
    z0 = None
    if start is not None:
        z0 = system.pack(start.y.values, [start.adjoint_of(i).values])
    z, report = solve_penalized(system, z0, policy)
    u_i = system.controls(z)[i]
    y = system.embed(system.split(z)[0])
    beta = system.penalty(z)
    value = objective(game, i, u_i, y) + gamma * beta
    return BestResponse(i, u_i, y, float(value), float(beta), report)


def value_function_W(game, gamma, u_bar, start=None, policy=None):
    """``W(gamma, u_bar) = sum_i min_v J_i(v, u_bar_-i) + gamma * beta``.

    Returns the value and the list of :class:`BestResponse` objects.
    """
    responses = [best_response(game, i, gamma, u_bar, start, policy)
                 for i in range(game.n_players)]
    return float(sum(r.value for r in responses)), responses


@dataclass
class ResidualReport:
    state: float
    stationarity: float
    primal_infeasibility: float
    complementarity: float
    normal_cone: float

    def as_dict(self):
        return dict(self.__dict__)


def equilibrium_residuals(game, st):
    """Residuals of the unpenalized first-order system at a solver output.

    ``stationarity`` combines the adjoint equations (with ``mu`` in place of
    the state-constraint multiplier) and ``alpha u_i + p_i + lambda_i = 0``;
    ``complementarity`` is ``sum |mu| * distance to the bound``;
    ``normal_cone`` measures sign violations of ``lambda_i`` against the
    control bounds.
    """
    sp_ = game.state
    free = sp_.free
    y = st.y.values
    load = sp_.total_load(st.controls)
    state_res = float(np.linalg.norm((sp_.apply_A(y) - load)[free]))
    DA = sp_.linearized_operator(y)
    stat = 0.0
    cone = 0.0
    for i in range(game.n_players):
        pl = game.players[i]
        p = st.adjoint_of(i).values
        groups = next(g for g in st.groups if i in g)
        rhs = sum(game.players[j].tracking_mass @ y - game.players[j].tracking_load
                  for j in groups)
        r_adj = (DA @ p - rhs - st.mu)[free]
        u = np.asarray(st.controls[i])
        lam = np.asarray(st.lambdas[i])
        r_ctrl = pl.weights * (game.alpha * u + p[pl.support]) + lam
        stat = max(stat, float(np.linalg.norm(r_adj)), float(np.linalg.norm(r_ctrl)))
        at_hi = u >= pl.upper
        at_lo = u <= pl.lower
        inner = ~(at_hi | at_lo)
        viol = np.concatenate([np.maximum(-lam[at_hi], 0), np.maximum(lam[at_lo], 0),
                               np.abs(lam[inner])])
        cone = max(cone, float(viol.max(initial=0.0)))
    infeas = float(np.max(np.maximum(y - game.hi, game.lo - y), initial=0.0))
    comp = float(np.sum(np.abs(st.mu_upper * (game.hi - y)))
                 + np.sum(np.abs(st.mu_lower * (y - game.lo))))
    return ResidualReport(state_res, stat, max(infeas, 0.0), comp, cone)


def price_of_anarchy(game, nash, coop):
    """Summed unpenalized objectives at ``nash`` divided by those at ``coop``."""
    num = summed_objective(game, nash.controls, nash.y)
    den = summed_objective(game, coop.controls, coop.y)
    if not den > 0:
        raise ValueError(f"cooperative objective must be positive, got {den!r}")
    return float(num / den)
