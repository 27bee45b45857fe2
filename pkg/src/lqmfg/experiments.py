"""Packaged studies: mean-field gap sweep, population-solver convergence,
deviation-gap (approximate equilibrium) study, and figure data emission.

Each study returns an ExperimentTable whose metadata records everything
needed to reproduce it bit for bit: master seed, grid, and a fingerprint of
the coefficient set.  Sweep points are pure functions of (seed, parameter),
so they may be computed concurrently without affecting output.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ModelConfigError
from .model import CoefficientSet, InitialLaw, TimeGrid, canonical_fingerprint
from .riccati import SolverOptions, gains, solve_finite_N, solve_limit
from .sim import PopulationConfig, cost_of_agent, resimulate_agent, simulate_reps
from .synthesis import make_law, solve_mean_field

DEFAULT_DEVIATIONS = ("zero", "scaled(0.25)", "scaled(0.5)", "scaled(0.75)",
                      "scaled(1.25)", "scaled(1.5)", "meanfield-informed",
                      "centralized")


@dataclass(frozen=True)
class ExperimentTable:
    """Rows of (parameter, metrics...) plus reproducibility metadata."""

    experiment: str
    columns: tuple
    rows: tuple
    metadata: dict


def _fingerprint(coeffs: CoefficientSet, grid: TimeGrid) -> str:
    return canonical_fingerprint({"coefficients": coeffs.to_dict(),
                                  "grid": {"T": grid.T, "M": grid.M}})


def _base_metadata(coeffs, grid, master_seed=None) -> dict:
    md = {"grid_T": grid.T, "grid_M": grid.M,
          "config_fingerprint": _fingerprint(coeffs, grid)}
    if master_seed is not None:
        md["master_seed"] = master_seed
    return md


def loglog_slope(xs, ys):
    """OLS slope of log y against log x, with its standard error."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    n = lx.size
    xc = lx - lx.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, ly) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    if n <= 2:
        return slope, float("nan")
    resid = ly - (slope * lx + intercept)
    s2 = float(np.dot(resid, resid)) / (n - 2)
    return slope, math.sqrt(s2 / sxx)


def _trapz_sq(diff: np.ndarray, dt: float) -> float:
    sq = diff * diff
    return float(dt * (sq.sum() - 0.5 * (sq[0] + sq[-1])))


def epsilon_sweep(coeffs: CoefficientSet, Ns, reps: int, master_seed: int,
                  grid: TimeGrid, initial: InitialLaw,
                  opts: SolverOptions = SolverOptions(),
                  workers: int = 1) -> ExperimentTable:
    """Mean-field approximation error against population size.

    For each N, all agents play the decentralized law and the metric is
    eps(N) = sqrt(E int (x^(N) - xbar)^2 dt), with the expectation taken
    over `reps` replications.  Agent randomness depends only on the agent
    index, so consecutive N share their first agents' noise (common random
    numbers) and the fitted log-log slope is compared cleanly across N.
    """
    Ns = list(Ns)
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ModelConfigError("population sizes must be strictly increasing")
    lim = solve_limit(coeffs, grid, opts)
    gl = gains(lim, coeffs, opts)
    mf = solve_mean_field(coeffs, gl, initial.mean, grid)
    law = make_law("decentralized", gl, xbar=mf)
    dt = grid.dt

    def point(N):
        cfg = PopulationConfig(N=N, reps=reps, master_seed=master_seed,
                               initial=initial)
        sq = np.array([_trapz_sq(ps.mean - mf.values, dt)
                       for ps in simulate_reps(coeffs, law, cfg, grid)])
        mean_sq = float(sq.mean())
        eps = math.sqrt(mean_sq)
        if reps > 1 and mean_sq > 0.0:
            se = float(sq.std(ddof=1)) / math.sqrt(reps) / (2.0 * eps)
        else:
            se = 0.0
        return (N, eps, se)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(point, Ns))
    else:
        rows = tuple(point(N) for N in Ns)

    md = _base_metadata(coeffs, grid, master_seed)
    md["reps"] = reps
    md["initial"] = {"kind": initial.kind, "a": initial.a, "b": initial.b}
    positive = [(n, e) for n, e, _ in rows if e > 0.0]
    if len(positive) >= 2:
        slope, slope_se = loglog_slope([n for n, _ in positive],
                                       [e for _, e in positive])
        md["slope"] = slope
        md["slope_stderr"] = slope_se
    return ExperimentTable(experiment="epsilon-sweep",
                           columns=("N", "epsilon", "stderr"),
                           rows=rows, metadata=md)


def riccati_convergence(coeffs: CoefficientSet, Ns, grid: TimeGrid,
                        opts: SolverOptions = SolverOptions(),
                        workers: int = 1) -> ExperimentTable:
    """Sup-node distance between the population and limit backward solutions.

    Accepts math.inf as a sentinel population size; that row compares the
    limit solution with itself and is exactly zero.
    """
    Ns = sorted(Ns)
    lim = solve_limit(coeffs, grid, opts)

    def point(N):
        if math.isinf(N):
            return (float("inf"), 0.0, 0.0, 0.0)
        fin = solve_finite_N(coeffs, int(N), grid, opts)
        return (int(N),
                float(np.max(np.abs(fin.P - lim.P))),
                float(np.max(np.abs(fin.K - lim.K))),
                float(np.max(np.abs(fin.phi - lim.phi))))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(point, Ns))
    else:
        rows = tuple(point(N) for N in Ns)

    md = _base_metadata(coeffs, grid)
    finite = [r for r in rows if math.isfinite(r[0])]
    # through-origin fit err ~ C/N gives the leading constant per column
    inv = np.array([1.0 / r[0] for r in finite])
    denom = float(np.dot(inv, inv))
    if denom > 0.0:
        for j, name in enumerate(("P", "K", "phi"), start=1):
            errs = np.array([r[j] for r in finite])
            md[f"rate_constant_{name}"] = float(np.dot(errs, inv) / denom)
    return ExperimentTable(experiment="riccati-convergence",
                           columns=("N", "err_P", "err_K", "err_phi"),
                           rows=rows, metadata=md)


_SCALED = re.compile(r"^scaled\((-?[0-9.]+)\)$")


def _build_deviation(label: str, gl, gn, mf):
    if label == "zero":
        return make_law("zero", gl)
    if label == "centralized":
        return make_law("centralized", gn)
    if label == "meanfield-informed":
        return make_law("meanfield-informed", gl)
    m = _SCALED.match(label)
    if m:
        return make_law("scaled", gl, xbar=mf, theta=float(m.group(1)))
    raise ModelConfigError(f"unknown deviation label {label!r}")


def nash_gap(coeffs: CoefficientSet, N: int, reps: int, master_seed: int,
             grid: TimeGrid, initial: InitialLaw,
             deviations=DEFAULT_DEVIATIONS,
             opts: SolverOptions = SolverOptions()) -> ExperimentTable:
    """Paired deviation study for the first agent.

    All agents play the decentralized law; for each deviation the first
    agent is replayed on the same noise and gap = J(base) - J(deviation) is
    averaged with its paired standard error.  scaled(1) is always included:
    it replays the base law bit for bit, so its row is exactly zero and
    calibrates the pairing.
    """
    if not deviations:
        raise ModelConfigError("deviation family must be nonempty")
    labels = list(deviations)
    if "scaled(1)" not in labels:
        labels.append("scaled(1)")
    lim = solve_limit(coeffs, grid, opts)
    gl = gains(lim, coeffs, opts)
    mf = solve_mean_field(coeffs, gl, initial.mean, grid)
    dec = make_law("decentralized", gl, xbar=mf)
    fin = solve_finite_N(coeffs, N, grid, opts)
    gn = gains(fin, coeffs, opts)
    laws = {label: _build_deviation(label, gl, gn, mf) for label in labels}

    diffs = {label: [] for label in labels}
    cfg = PopulationConfig(N=N, reps=reps, master_seed=master_seed,
                           initial=initial)
    for ps in simulate_reps(coeffs, dec, cfg, grid):
        j_base = cost_of_agent(ps, 0, coeffs, grid)
        for label, law in laws.items():
            dev = resimulate_agent(ps, 0, law, coeffs, grid)
            diffs[label].append(j_base - cost_of_agent(dev, 0, coeffs, grid))

    rows = []
    for label in sorted(labels):
        d = np.array(diffs[label])
        se = float(d.std(ddof=1)) / math.sqrt(reps) if reps > 1 else 0.0
        rows.append((label, float(d.mean()), se))
    md = _base_metadata(coeffs, grid, master_seed)
    md["N"] = N
    md["reps"] = reps
    best = max(rows, key=lambda r: r[1])
    md["max_gap"] = max(0.0, best[1])
    md["max_gap_label"] = best[0]
    md["max_gap_stderr"] = best[2]
    return ExperimentTable(experiment="nash-gap",
                           columns=("deviation", "gap", "stderr"),
                           rows=tuple(rows), metadata=md)


# ---------------------------------------------------------------------------
# CSV and figure emission
# ---------------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, comments=()) -> None:
    """Write a CSV with '#'-prefixed comment lines; floats use the shortest
    round-trip representation so identical data gives identical bytes."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def write_table(path, table: ExperimentTable) -> None:
    comments = [f"experiment = {table.experiment}"]
    comments += [f"{k} = {_cell(v)}" for k, v in sorted(table.metadata.items())
                 if not isinstance(v, dict)]
    write_csv(path, table.columns, table.rows, comments)


_FIG1_SCRIPT = """set datafile separator comma
set terminal pngcairo size 900,600
set output 'fig1.png'
set xlabel 't'
set key top right
plot 'fig1.csv' skip 1 using 1:2 with lines lw 2 title 'P', \\
     'fig1.csv' skip 1 using 1:3 with lines lw 2 title 'K'
"""

_FIG2_SCRIPT = """set datafile separator comma
set terminal pngcairo size 900,600
set output 'fig2.png'
set logscale xy
set xlabel 'N'
set ylabel 'epsilon(N)'
plot 'fig2.csv' skip 1 using 1:2:3 with yerrorlines lw 2 title 'epsilon(N)'
"""


def figure_data(coeffs: CoefficientSet, grid: TimeGrid, sweep, out_dir,
                opts: SolverOptions = SolverOptions()) -> list:
    """Write fig1.csv (t, P, K), fig2.csv (N, epsilon, stderr) and one
    gnuplot script per figure into out_dir; returns the written paths."""
    import os

    if sweep is None or not getattr(sweep, "rows", ()):
        raise ModelConfigError("figure emission needs a nonempty sweep table")
    lim = solve_limit(coeffs, grid, opts)
    written = []

    # the gnuplot scripts skip exactly one line, so these two files carry a
    # bare column header and no comment lines
    p1 = os.path.join(out_dir, "fig1.csv")
    rows1 = [(float(t), float(p), float(k))
             for t, p, k in zip(grid.nodes, lim.P, lim.K)]
    write_csv(p1, ("t", "P", "K"), rows1)
    written.append(p1)

    p2 = os.path.join(out_dir, "fig2.csv")
    write_csv(p2, sweep.columns, sweep.rows)
    written.append(p2)

    for name, script in (("fig1.gp", _FIG1_SCRIPT), ("fig2.gp", _FIG2_SCRIPT)):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(script)
        written.append(path)
    return written
