import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import solved
from pdegnep.exceptions import PathFailure
from pdegnep.kkt import KktSystem, solve_penalized
from pdegnep.newton import DampingPolicy
from pdegnep.path import (
    STOP_GAMMA,
    STOP_PENALTY,
    PathConfig,
    PathHistory,
    gamma_update,
    run_path,
    sample_value_function,
)
from pdegnep.problem import DiscreteGame, GameConfig

CFG = PathConfig()


class TestGammaUpdate:
    def test_defaults(self):
        assert (CFG.gamma0, CFG.c_path, CFG.eps, CFG.gamma_max, CFG.beta_tol) == (1.0, 1e-5, 10.0, 1e8, 1e-15)

    def test_ratio_branch(self):
        assert gamma_update(10.0, 1e-7, CFG) == 110.0

    def test_floor_branch(self):
        assert gamma_update(10.0, 1.0, CFG) == 20.0
        assert gamma_update(123.5, 1e3, CFG) == 133.5

    @settings(max_examples=60, deadline=None)
    @given(st.floats(1.0, 1e7), st.floats(1e-14, 1e3), st.floats(1e-14, 1e3))
    def test_monotone(self, gamma, b1, b2):
        lo, hi = sorted((b1, b2))
        g_hi = gamma_update(gamma, lo, CFG)
        assert g_hi >= gamma_update(gamma, hi, CFG)
        assert g_hi >= gamma + CFG.eps

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PathConfig(eps=0.0)
        with pytest.raises(ValueError):
            PathConfig(gamma0=10.0, gamma_max=5.0)


class TestRunPath:
    def test_feasible_start_stops_at_once(self):
        # an upper obstacle far above every reachable state: beta is 0 at gamma0
        game = DiscreteGame.build(GameConfig(psi_lower=-100.0, psi_upper=100.0), 8)
        _, hist = run_path(game)
        assert len(hist) == 1 and hist.stop_reason == STOP_PENALTY
        assert hist.records[0].beta == 0.0

    def test_gamma_max_guard(self):
        game = DiscreteGame.build(GameConfig(), 8)
        cfg = PathConfig(gamma_max=100.0)
        _, hist = run_path(game, cfg)
        g = hist.gammas
        assert hist.stop_reason == STOP_GAMMA
        assert g.max() <= 100.0
        assert gamma_update(g[-1], 4 * hist.records[-1].beta, cfg) > 100.0

    def test_sequence_on_coarse_run(self, run16):
        _, _, hist = run16
        g = hist.gammas
        assert g[0] == 1.0
        assert np.all(np.diff(g) >= CFG.eps)
        assert g[-1] <= CFG.gamma_max
        for a, b in zip(hist.records, hist.records[1:]):
            assert b.gamma == gamma_update(a.gamma, 4 * a.beta, CFG)

    def test_cooperative_uses_single_penalty(self, run16_coop):
        _, _, hist = run16_coop
        for a, b in zip(hist.records, hist.records[1:]):
            assert b.gamma == gamma_update(a.gamma, a.beta, CFG)
            assert a.player_betas == [a.beta]

    def test_final_half_beta_nonincreasing(self):
        _, _, hist = solved(32)
        g, b = hist.gammas, hist.betas
        assert np.all(np.diff(g) > 0)
        tail = b[len(b) // 2:]
        assert np.all(np.diff(tail) <= 0)

    def test_warm_start_saves_iterations(self, run16):
        game, _, hist = run16
        k = len(hist) // 2
        warm = hist.records[k].newton.iterations
        _, cold = solved_cold(game, hist.records[k].gamma)
        assert warm <= cold.iterations

    def test_moreau_yosida_decay(self, run16):
        _, _, hist = run16
        v = np.array([r.max_violation for r in hist])
        scaled = hist.gammas[-5:] * v[-5:]
        assert np.all(scaled > 0) and scaled.max() < 10 * scaled.min()
        assert np.all(np.diff(v[-5:]) <= 0)

    def test_multiplier_bound(self, run16):
        _, _, hist = run16
        assert max(r.mu_l1 for r in hist) < 1e3

    def test_failure_keeps_history(self):
        game = DiscreteGame.build(GameConfig(), 8)
        pol = DampingPolicy()

        def starve(record):
            pol.max_iter = 0

        with pytest.raises(PathFailure) as info:
            run_path(game, on_step=starve, policy=pol)
        hist = info.value.history
        assert len(hist) == 1 and hist.stop_reason == "newton_failure"
        assert info.value.report is not None and not info.value.report.converged

    def test_deterministic(self):
        game = DiscreteGame.build(GameConfig(kind="boundary"), 8)
        _, h1 = run_path(game, PathConfig(gamma_max=1e4))
        _, h2 = run_path(game, PathConfig(gamma_max=1e4))
        assert [(r.gamma, r.beta, r.sum_objectives) for r in h1] == [(r.gamma, r.beta, r.sum_objectives) for r in h2]


def solved_cold(game, gamma):
    return solve_penalized(KktSystem(game, gamma))


class TestValueSamples:
    def test_single_point_self_consistent(self, run16):
        game, state, hist = run16
        samples = sample_value_function(game, state, [state.gamma])
        (g, W, resp), = samples
        assert g == state.gamma
        for r in resp:
            assert np.max(np.abs(r.control - state.controls[r.player])) < 1e-6
            assert np.isclose(r.beta, hist.records[-1].beta, rtol=1e-6, atol=1e-22)

    def test_attached_to_history(self, run16):
        game, state, _ = run16
        h = PathHistory()
        sample_value_function(game, state, [10.0, 20.0], history=h)
        assert [s[0] for s in h.w_samples] == [10.0, 20.0]
        assert h.w_samples[0][1] <= h.w_samples[1][1]
