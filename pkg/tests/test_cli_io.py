import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import solved
from pdegnep import cli
from pdegnep.io import (
    HISTORY_HEADER,
    ArtifactError,
    boundary_arclength,
    combined_control,
    read_connectivity,
    read_field,
    read_history,
    read_run,
    write_connectivity,
    write_field,
    write_history,
    write_run,
)
from pdegnep.mesh_fem import build_crossed_mesh
from pdegnep.path import PathConfig, PathHistory, run_path
from pdegnep.problem import DEFAULT_YD, DiscreteGame, GameConfig

MESH4 = build_crossed_mesh(4)


@pytest.fixture(scope="module")
def short_run():
    game = DiscreteGame.build(GameConfig(), 8)
    cfg = PathConfig(gamma_max=200.0)
    state, hist = run_path(game, cfg)
    return game, cfg, state, hist


class TestHistory:
    def test_round_trip(self, short_run, tmp_path):
        _, _, _, hist = short_run
        p = write_history(hist, tmp_path / "h.csv")
        cols = read_history(p)
        assert np.array_equal(cols["gamma"], hist.gammas)
        assert np.array_equal(cols["beta"], hist.betas)
        assert np.array_equal(cols["sum_objectives"], [r.sum_objectives for r in hist])
        assert np.array_equal(cols["newton_iters"], [r.newton.iterations for r in hist])
        assert np.all(cols["wall_ms"] == 0)

    def test_format(self, short_run, tmp_path):
        _, _, _, hist = short_run
        raw = write_history(hist, tmp_path / "h.csv").read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")
        lines = raw.decode().splitlines()
        assert lines[0] == ",".join(HISTORY_HEADER)
        assert len(lines) == len(hist) + 1

    def test_single_step(self, tmp_path):
        game = DiscreteGame.build(GameConfig(psi_lower=-10.0, psi_upper=10.0), 4)
        _, hist = run_path(game)
        lines = write_history(hist, tmp_path / "h.csv").read_text().splitlines()
        assert len(lines) == 2

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_history(PathHistory(), tmp_path / "h.csv")

    def test_real_time_column(self, short_run, tmp_path):
        _, _, _, hist = short_run
        cols = read_history(write_history(hist, tmp_path / "h.csv", real_time=True))
        assert np.array_equal(cols["wall_ms"], [r.wall_ms for r in hist])

    def test_io_failure(self, short_run, tmp_path):
        _, _, _, hist = short_run
        with pytest.raises(ArtifactError):
            write_history(hist, tmp_path / "missing" / "h.csv")
        with pytest.raises(ArtifactError):
            read_history(tmp_path / "nope.csv")


class TestFields:
    def test_zero_and_constant(self, mesh8, tmp_path):
        for c in (0.0, 0.3):
            xy, v, s = read_field(write_field(mesh8, np.full(mesh8.n_vertices, c), tmp_path / "f.csv"))
            assert s is None and np.all(v == c)
            assert np.array_equal(xy, mesh8.vertices)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.floats(-1e300, 1e300), min_size=MESH4.n_vertices, max_size=MESH4.n_vertices))
    def test_lossless(self, tmp_path_factory, vals):
        mesh = MESH4
        p = tmp_path_factory.mktemp("f") / "f.csv"
        _, v, _ = read_field(write_field(mesh, np.array(vals), p))
        assert np.array_equal(v, vals)

    def test_shape_mismatch(self, mesh8, tmp_path):
        with pytest.raises(ValueError):
            write_field(mesh8, np.zeros(3), tmp_path / "f.csv")

    def test_connectivity(self, mesh8, tmp_path):
        tri = read_connectivity(write_connectivity(mesh8, tmp_path / "t.csv"))
        assert np.array_equal(tri, mesh8.triangles)

    def test_arclength(self, mesh8):
        bv = mesh8.boundary_vertices
        s = boundary_arclength(mesh8, bv)
        assert s.min() == 0.0 and s.max() < 4.0
        assert np.unique(s).size == bv.size
        corners = {(1.0, 0.0): 1.0, (1.0, 1.0): 2.0, (0.0, 1.0): 3.0}
        for (x, y), ref in corners.items():
            v = np.flatnonzero((mesh8.vertices[:, 0] == x) & (mesh8.vertices[:, 1] == y))
            assert boundary_arclength(mesh8, v)[0] == ref

    def test_combined_control_constant(self):
        game = DiscreteGame.build(GameConfig(), 8)
        u, support = combined_control(game, [np.full(p.support.size, 2.5) for p in game.players])
        assert np.allclose(u[support], 2.5)
        assert np.all(u[np.setdiff1d(np.arange(game.mesh.n_vertices), support)] == 0)


class TestRunDirectory:
    def test_manifest_and_files(self, short_run, tmp_path):
        game, cfg, state, hist = short_run
        man = write_run(tmp_path, game, cfg, state, hist)
        back, cols = read_run(tmp_path)
        assert back == json.loads(json.dumps(man))
        assert back["steps"] == len(hist) == cols["k"].size
        assert back["game"]["yd"] == list(DEFAULT_YD)
        for name in back["files"].values():
            assert (tmp_path / name).is_file()
        assert sorted(back["files"]) == ["adjoint_1", "adjoint_2", "adjoint_3", "adjoint_4",
                                         "connectivity", "control", "history", "state"]

    def test_boundary_control_rows(self, tmp_path):
        game = DiscreteGame.build(GameConfig(kind="boundary"), 8)
        cfg = PathConfig(gamma_max=50.0)
        state, hist = run_path(game, cfg)
        write_run(tmp_path, game, cfg, state, hist)
        xy, v, s = read_field(tmp_path / "control.csv")
        assert s is not None and np.all(np.diff(s) > 0)
        assert xy.shape[0] == game.mesh.boundary_vertices.size

    def test_byte_identical(self, short_run, tmp_path):
        game, cfg, state, hist = short_run
        write_run(tmp_path / "a", game, cfg, state, hist)
        state2, hist2 = run_path(game, cfg)
        write_run(tmp_path / "b", game, cfg, state2, hist2)
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name

    def test_final_state_within_obstacles(self, tmp_path):
        game, state, hist = solved(32)
        write_run(tmp_path, game, PathConfig(), state, hist)
        _, y, _ = read_field(tmp_path / "state.csv")
        delta = 1e-2
        assert np.all(y >= 0.0 - delta) and np.all(y <= 0.3 + delta)


class TestCli:
    def test_defaults(self):
        args = cli.build_parser().parse_args(["solve", "--problem", "distributed", "--mode", "coop",
                                              "--mesh-n", "32", "--out", "x"])
        game, path, n = cli.resolve(args)
        assert n == 32 and game.mode == "coop"
        assert (game.alpha, game.lower, game.upper) == (1e-5, -32.0, 32.0)
        assert (game.psi_lower, game.psi_upper, game.yd) == (0.0, 0.3, DEFAULT_YD)
        assert (path.c_path, path.eps, path.gamma_max, path.beta_tol) == (1e-5, 10.0, 1e8, 1e-15)
        assert cli.build_parser().parse_args(["solve", "--out", "x"]).mesh_n == 128

    def test_echo(self, tmp_path, capsys):
        code = cli.main(["solve", "--mesh-n", "4", "--mode", "coop", "--gamma-max", "30",
                         "--out", str(tmp_path / "r")])
        out = capsys.readouterr().out
        assert code == cli.EXIT_OK
        assert "'alpha': 1e-05" in out and "'mode': 'coop'" in out

    def test_missing_out(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["solve", "--mesh-n", "8"])
        assert info.value.code == cli.EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [
        ["solve", "--yd", "0.1", "0.2", "0.3", "--out", "x"],
        ["solve", "--mesh-n", "7", "--out", "x"],
        ["solve", "--bogus", "--out", "x"],
        ["solve", "--problem", "neumann", "--out", "x"],
    ])
    def test_usage_errors(self, argv):
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
        assert info.value.code == cli.EXIT_USAGE

    def test_poa_identical(self, tmp_path, capsys):
        run = tmp_path / "r"
        assert cli.main(["solve", "--mesh-n", "4", "--gamma-max", "30", "--quiet", "--out", str(run)]) == 0
        capsys.readouterr()
        assert cli.main(["poa", str(run), str(run)]) == cli.EXIT_OK
        assert capsys.readouterr().out.strip() == "1.0"

    def test_poa_mismatch(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        cli.main(["solve", "--mesh-n", "4", "--gamma-max", "30", "--quiet", "--out", str(a)])
        cli.main(["solve", "--mesh-n", "6", "--gamma-max", "30", "--quiet", "--out", str(b)])
        with pytest.raises(SystemExit) as info:
            cli.main(["poa", str(a), str(b)])
        assert info.value.code == cli.EXIT_USAGE

    def test_poa_missing_dir(self, tmp_path):
        assert cli.main(["poa", str(tmp_path / "a"), str(tmp_path / "b")]) == cli.EXIT_IO

    def test_out_is_a_file(self, tmp_path):
        f = tmp_path / "file"
        f.write_text("x")
        assert cli.main(["solve", "--mesh-n", "4", "--gamma-max", "30", "--quiet", "--out", str(f)]) == cli.EXIT_IO

    def test_solver_failure_exit(self, monkeypatch, tmp_path):
        from pdegnep.exceptions import PathFailure

        def boom(*a, **k):
            raise PathFailure("no convergence")

        monkeypatch.setattr(cli, "run_path", boom)
        assert cli.main(["solve", "--mesh-n", "4", "--quiet", "--out", str(tmp_path)]) == cli.EXIT_SOLVER
