import math
import os

import numpy as np
import pytest

from lqmfg.errors import ModelConfigError
from lqmfg.experiments import (DEFAULT_DEVIATIONS, epsilon_sweep, figure_data,
                               loglog_slope, nash_gap, riccati_convergence,
                               write_csv, write_table)
from lqmfg.model import CoefficientSet, InitialLaw, TimeGrid

ALL_ONES = CoefficientSet.from_constants(A=1, B=1, C=1, D=1, f=1, g=1, Q=1,
                                         R=1, Gamma=1, eta=1, H=1, Gamma0=1,
                                         eta0=1)
UNIFORM = InitialLaw.uniform(0.0, 20.0)


def test_loglog_slope_recovers_exact_power_law():
    xs = [10, 20, 40, 80]
    ys = [3.0 * x ** -0.5 for x in xs]
    slope, se = loglog_slope(xs, ys)
    assert abs(slope + 0.5) < 1e-12
    assert se < 1e-12


def test_epsilon_sweep_rows_and_metadata():
    grid = TimeGrid(T=1.0, M=200)
    tab = epsilon_sweep(ALL_ONES, [8, 16, 32], reps=5, master_seed=99,
                        grid=grid, initial=UNIFORM)
    assert tab.columns == ("N", "epsilon", "stderr")
    assert [r[0] for r in tab.rows] == [8, 16, 32]
    assert all(e > 0 and s > 0 for _, e, s in tab.rows)
    assert tab.metadata["master_seed"] == 99
    assert tab.metadata["grid_M"] == 200
    assert len(tab.metadata["config_fingerprint"]) == 64
    assert "slope" in tab.metadata


def test_epsilon_sweep_requires_increasing_population_sizes():
    grid = TimeGrid(T=1.0, M=50)
    with pytest.raises(ModelConfigError):
        epsilon_sweep(ALL_ONES, [8, 8, 16], reps=2, master_seed=0,
                      grid=grid, initial=UNIFORM)


def test_epsilon_sweep_deterministic_population_tracks_mean_field():
    # zero noise and point initials: every agent follows the same Euler
    # path, so eps is the pure scheme gap, identical across N, and halves
    # under grid refinement
    det = CoefficientSet.from_constants(A=1, B=1, C=0, D=0, f=0.5, g=0, Q=1,
                                        R=1, Gamma=0.5, eta=1, H=1,
                                        Gamma0=0.5, eta0=1)
    point = InitialLaw.point(3.0)
    eps = {}
    for M in (200, 400):
        grid = TimeGrid(T=1.0, M=M)
        tab = epsilon_sweep(det, [2, 8, 32], reps=3, master_seed=1,
                            grid=grid, initial=point)
        vals = [e for _, e, _ in tab.rows]
        # averaging N identical paths rounds differently per N, so the
        # agreement is to roundoff rather than bitwise
        assert all(math.isclose(v, vals[0], rel_tol=1e-12) for v in vals)
        assert all(s == 0.0 for _, _, s in tab.rows)
        assert vals[0] <= 2.0 * grid.dt
        eps[M] = vals[0]
    assert 1.8 < eps[200] / eps[400] < 2.2


def test_epsilon_sweep_slope_near_minus_half():
    grid = TimeGrid(T=1.0, M=2000)
    tab = epsilon_sweep(ALL_ONES, [8, 16, 32, 64, 128], reps=10,
                        master_seed=99, grid=grid, initial=UNIFORM)
    assert -0.65 < tab.metadata["slope"] < -0.35


def test_epsilon_sweep_reproducible_and_worker_invariant():
    grid = TimeGrid(T=1.0, M=100)
    a = epsilon_sweep(ALL_ONES, [4, 8], reps=3, master_seed=7, grid=grid,
                      initial=UNIFORM)
    b = epsilon_sweep(ALL_ONES, [4, 8], reps=3, master_seed=7, grid=grid,
                      initial=UNIFORM, workers=3)
    assert a.rows == b.rows


def test_epsilon_sweep_doubling_reps_is_consistent():
    grid = TimeGrid(T=1.0, M=400)
    a = epsilon_sweep(ALL_ONES, [16], reps=8, master_seed=21, grid=grid,
                      initial=UNIFORM)
    b = epsilon_sweep(ALL_ONES, [16], reps=16, master_seed=21, grid=grid,
                      initial=UNIFORM)
    (_, ea, sa), (_, eb, sb) = a.rows[0], b.rows[0]
    assert abs(ea - eb) <= 3.0 * math.hypot(sa, sb)


def test_riccati_convergence_rows_shrink_like_one_over_N():
    grid = TimeGrid(T=1.0, M=500)
    tab = riccati_convergence(ALL_ONES, [10, 40, 160, math.inf], grid)
    assert [r[0] for r in tab.rows] == [10, 40, 160, math.inf]
    assert tab.rows[-1][1:] == (0.0, 0.0, 0.0)
    for j in (1, 2, 3):
        assert tab.rows[0][j] > tab.rows[1][j] > tab.rows[2][j] > 0
        # quadrupling N should cut the error by roughly four
        assert 2.0 < tab.rows[0][j] / tab.rows[1][j] < 8.0
    assert tab.metadata["rate_constant_P"] > 0


def test_riccati_convergence_worker_invariant():
    grid = TimeGrid(T=1.0, M=200)
    a = riccati_convergence(ALL_ONES, [5, 20], grid)
    b = riccati_convergence(ALL_ONES, [5, 20], grid, workers=2)
    assert a.rows == b.rows


def test_nash_gap_calibration_row_is_exactly_zero():
    grid = TimeGrid(T=1.0, M=200)
    tab = nash_gap(ALL_ONES, N=20, reps=4, master_seed=4, grid=grid,
                   initial=UNIFORM)
    row = {r[0]: r for r in tab.rows}["scaled(1)"]
    assert row[1] == 0.0
    assert row[2] == 0.0


def test_nash_gap_default_family_and_ordering():
    grid = TimeGrid(T=1.0, M=100)
    tab = nash_gap(ALL_ONES, N=10, reps=3, master_seed=8, grid=grid,
                   initial=UNIFORM)
    labels = [r[0] for r in tab.rows]
    assert labels == sorted(labels)
    assert set(labels) == set(DEFAULT_DEVIATIONS) | {"scaled(1)"}
    assert tab.metadata["max_gap"] >= 0.0
    assert tab.metadata["max_gap"] == max(0.0, max(r[1] for r in tab.rows))


def test_nash_gap_zero_state_weights_give_zero_gaps():
    # Q = H = 0 makes the backward solutions vanish, so every law in the
    # family is the zero control and all costs (hence gaps) are exactly 0
    flat = CoefficientSet.from_constants(A=0.5, B=1, C=0.2, D=0.1, f=0, g=0.3,
                                         Q=0, R=1, Gamma=0.7, eta=1, H=0,
                                         Gamma0=0.7, eta0=1)
    grid = TimeGrid(T=1.0, M=100)
    tab = nash_gap(flat, N=8, reps=3, master_seed=2, grid=grid,
                   initial=UNIFORM)
    assert all(r[1] == 0.0 for r in tab.rows)
    assert tab.metadata["max_gap"] == 0.0


def test_nash_gap_rejects_bad_family():
    grid = TimeGrid(T=1.0, M=50)
    with pytest.raises(ModelConfigError):
        nash_gap(ALL_ONES, N=4, reps=2, master_seed=1, grid=grid,
                 initial=UNIFORM, deviations=())
    with pytest.raises(ModelConfigError):
        nash_gap(ALL_ONES, N=4, reps=2, master_seed=1, grid=grid,
                 initial=UNIFORM, deviations=("hedged",))


def test_write_csv_round_trips_floats(tmp_path):
    path = tmp_path / "vals.csv"
    rows = [(1, 0.1 + 0.2), (2, 1.0 / 3.0)]
    write_csv(path, ("k", "v"), rows, comments=("hello",))
    lines = path.read_text().splitlines()
    assert lines[0] == "# hello"
    assert lines[1] == "k,v"
    for line, (_, v) in zip(lines[2:], rows):
        assert float(line.split(",")[1]) == v


def test_write_table_embeds_metadata(tmp_path):
    grid = TimeGrid(T=1.0, M=100)
    tab = riccati_convergence(ALL_ONES, [5, 10], grid)
    path = tmp_path / "conv.csv"
    write_table(path, tab)
    text = path.read_text()
    assert "# experiment = riccati-convergence" in text
    assert "N,err_P,err_K,err_phi" in text


def test_figure_data_writes_expected_files(tmp_path):
    grid = TimeGrid(T=10.0, M=400)
    sweep = epsilon_sweep(ALL_ONES, [4, 8], reps=2, master_seed=3,
                          grid=TimeGrid(T=1.0, M=100), initial=UNIFORM)
    paths = figure_data(ALL_ONES, grid, sweep, tmp_path)
    names = sorted(os.path.basename(p) for p in paths)
    assert names == ["fig1.csv", "fig1.gp", "fig2.csv", "fig2.gp"]
    last = open(os.path.join(tmp_path, "fig1.csv")).read().splitlines()[-1]
    t, p, k = (float(v) for v in last.split(","))
    assert t == 10.0
    assert p == 1.0
    assert k == -1.0


def test_figure_data_is_byte_identical_across_runs(tmp_path):
    grid = TimeGrid(T=2.0, M=200)
    sweep = epsilon_sweep(ALL_ONES, [4, 8], reps=2, master_seed=3,
                          grid=TimeGrid(T=1.0, M=100), initial=UNIFORM)
    d1 = tmp_path / "a"
    d2 = tmp_path / "b"
    d1.mkdir()
    d2.mkdir()
    figure_data(ALL_ONES, grid, sweep, d1)
    figure_data(ALL_ONES, grid, sweep, d2)
    for name in ("fig1.csv", "fig2.csv", "fig1.gp", "fig2.gp"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


def test_figure_data_refuses_empty_sweep(tmp_path):
    grid = TimeGrid(T=1.0, M=50)
    with pytest.raises(ModelConfigError):
        figure_data(ALL_ONES, grid, None, tmp_path)
