"""Shared, session-cached solver runs for the test modules."""

from pdegnep.path import PathConfig, run_path
from pdegnep.problem import DiscreteGame, GameConfig

_RUNS = {}


def solved(n, kind="distributed", mode="gnep", **overrides):
    key = (n, kind, mode, tuple(sorted(overrides.items())))
    if key not in _RUNS:
        game = DiscreteGame.build(GameConfig(kind=kind, mode=mode, **overrides), n)
        state, history = run_path(game, PathConfig())
        _RUNS[key] = (game, state, history)
    return _RUNS[key]
