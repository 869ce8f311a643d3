"""Penalty path-following: solve for increasing gamma, warm-starting each step.

After solving at ``gamma_k`` the run stops when the penalty vanishes (below
``beta_tol``); otherwise it moves to

    gamma_{k+1} = gamma_k + max(c_path / penalty, eps)

unless that would exceed ``gamma_max``. In Nash mode the penalty value is
the sum of the players' penalties, each evaluated at the common state, so it
equals ``N * beta``; in cooperative mode it is ``beta`` itself.
"""

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exceptions import NewtonFailure, PathFailure
from .game import summed_objective, value_function_W
from .kkt import KktSystem, mode_groups, solve_penalized
from .newton import DampingPolicy
from .problem import COOP

STOP_PENALTY = "penalty_below_tol"
STOP_GAMMA = "gamma_max"


@dataclass(frozen=True)
class PathConfig:
    gamma0: float = 1.0
    c_path: float = 1e-5
    eps: float = 10.0
    gamma_max: float = 1e8
    beta_tol: float = 1e-15
    max_steps: int = 100000

    def __post_init__(self):
        for name in ("gamma0", "c_path", "eps", "gamma_max", "beta_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.gamma_max > self.gamma0:
            raise ValueError("gamma_max must exceed gamma0")


@dataclass
class PathRecord:
    k: int
    gamma: float
    beta: float
    player_betas: list
    sum_objectives: float
    newton: object
    wall_ms: float
    max_violation: float
    mu_l1: float


@dataclass
class PathHistory:
    records: list = field(default_factory=list)
    stop_reason: str = ""
    w_samples: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def gammas(self):
        return np.array([r.gamma for r in self.records])

    @property
    def betas(self):
        return np.array([r.beta for r in self.records])


def _exact(x):
    # shortest decimal repr of the float, so 1e-5 / 1e-7 is exactly 100
    return Fraction(repr(float(x)))


def gamma_update(gamma, penalty_value, cfg):
    """``gamma + max(c_path / penalty_value, eps)``.

    Evaluated in rational arithmetic on the decimal values of the inputs and
    rounded once, so decimal configurations give exact results.
    """
    step = max(_exact(cfg.c_path) / _exact(penalty_value), _exact(cfg.eps))
    return float(_exact(gamma) + step)


def run_path(game, cfg=PathConfig(), *, on_step=None, policy=None):
    """Run the path-following loop for ``game.cfg.mode``.

    Returns the final :class:`EquilibriumState` and the :class:`PathHistory`.
    ``on_step(record)`` is called after every accepted step. A terminal
    Newton failure raises :class:`PathFailure` carrying the partial history.
    """
    groups = mode_groups(game)
    n_pen = 1 if game.cfg.mode == COOP else game.n_players
    policy = policy if policy is not None else DampingPolicy()
    history = PathHistory()
    gamma = float(cfg.gamma0)
    z = None
    state = None
    for k in range(1, cfg.max_steps + 1):
        system = KktSystem(game, gamma, groups)
        t0 = time.perf_counter()
        try:
            z, report = solve_penalized(system, z, policy)
        except NewtonFailure as exc:
            history.stop_reason = "newton_failure"
            raise PathFailure(f"step {k} (gamma={gamma:g}): {exc}", history, exc.report) from exc
        wall_ms = (time.perf_counter() - t0) * 1e3
        state = system.to_state(z)
        beta = system.penalty(z)
        viol = np.max(np.maximum(state.y.values - game.hi, game.lo - state.y.values))
        record = PathRecord(
            k=k,
            gamma=gamma,
            beta=beta,
            player_betas=[beta] * n_pen,
            sum_objectives=summed_objective(game, state.controls, state.y),
            newton=report,
            wall_ms=wall_ms,
            max_violation=max(float(viol), 0.0),
            mu_l1=float(np.abs(state.mu).sum()),
        )
        history.records.append(record)
        if on_step is not None:
            on_step(record)
        if beta <= cfg.beta_tol:
            history.stop_reason = STOP_PENALTY
            break
        gamma_next = gamma_update(gamma, n_pen * beta, cfg)
        if gamma_next > cfg.gamma_max:
            history.stop_reason = STOP_GAMMA
            break
        gamma = gamma_next
    else:
        history.stop_reason = "max_steps"
    return state, history


def sample_value_function(game, state, gammas, history=None, **kwargs):
    """Evaluate ``W(gamma, u_bar)`` on ``gammas`` with ``u_bar`` the controls of ``state``.

    Each sample is ``(gamma, value, responses)``; they are appended to
    ``history.w_samples`` when a history is given.
    """
    samples = []
    for g in gammas:
        value, responses = value_function_W(game, g, state.controls, start=state, **kwargs)
        samples.append((float(g), value, responses))
    if history is not None:
        history.w_samples.extend(samples)
    return samples
