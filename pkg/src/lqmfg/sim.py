"""Population simulation, cost evaluation, and optimality diagnostics.

States advance by Euler-Maruyama on the solver grid with left-endpoint
feedback controls.  Every random draw comes from a counter-based stream
keyed by (master_seed, purpose, replication, agent), so replications can be
scheduled in any order (or in parallel) without changing a single bit of
output, and agent j's noise is identical across population sizes, giving
common random numbers for the N-sweep experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelConfigError, SimulationDivergedError
from .model import CoefficientSet, InitialLaw, TimeGrid
from .riccati import GainSchedule, RiccatiSolution
from .synthesis import StrategyLaw

_PURPOSE_AGENT = 0
_PURPOSE_PROBE_CONTROL = 1
_PURPOSE_PROBE_NOISE = 2

_MASK64 = (1 << 64) - 1
_MAX_INDEX = 1 << 24


def stream(master_seed: int, purpose: int, rep: int, agent: int) -> np.random.Generator:
    """Counter-based stream for one (purpose, replication, agent) triple."""
    if not (0 <= rep < _MAX_INDEX and 0 <= agent < _MAX_INDEX):
        raise ModelConfigError("replication and agent indices must be < 2^24")
    key = (purpose << 48) | (rep << 24) | agent
    return np.random.Generator(np.random.Philox(key=[master_seed & _MASK64, key]))


@dataclass(frozen=True)
class PopulationConfig:
    """Population size, replication count, master seed, and initial law."""

    N: int
    reps: int
    master_seed: int
    initial: InitialLaw

    def __post_init__(self):
        if self.N < 1:
            raise ModelConfigError(f"population size must be >= 1, got {self.N}")
        if self.reps < 1:
            raise ModelConfigError(f"replication count must be >= 1, got {self.reps}")


@dataclass(frozen=True)
class PathSet:
    """One replication: states (N, M+1), controls and increments (N, M),
    population average (M+1)."""

    rep: int
    states: np.ndarray
    controls: np.ndarray
    increments: np.ndarray
    mean: np.ndarray


@dataclass(frozen=True)
class CostReport:
    """Cost of one agent averaged over replications, plus the population mean."""

    agent: int
    mean: float
    stderr: float
    population_mean: float
    per_replication: np.ndarray


@dataclass(frozen=True)
class AdjointCheckReport:
    """Worst stationarity residual over agents and time, absolute and relative."""

    max_abs: float
    max_rel: float


@dataclass(frozen=True)
class ProbeReport:
    """Minimum sampled value of the convexity form and its Monte Carlo error."""

    min_value: float
    min_stderr: float
    argmin: int
    values: np.ndarray
    stderrs: np.ndarray
    inner_reps: int


def _node_coeffs(coeffs: CoefficientSet, grid: TimeGrid) -> dict:
    return {name: getattr(coeffs, name).node_values(grid)
            for name in ("A", "B", "C", "D", "f", "g", "Q", "R", "Gamma", "eta")}


def _check_law_grid(law: StrategyLaw, grid: TimeGrid) -> None:
    if law.k_self.size != grid.M + 1:
        raise ModelConfigError("strategy law and grid disagree on node count")
    if law.mean_source == "precomputed" and law.xbar is None:
        raise ModelConfigError("law wants a precomputed mean but carries none")


def simulate_reps(coeffs: CoefficientSet, law: StrategyLaw,
                  cfg: PopulationConfig, grid: TimeGrid):
    """Yield one PathSet per replication, in replication order."""
    _check_law_grid(law, grid)
    M, dt = grid.M, grid.dt
    sqdt = math.sqrt(dt)
    nc = _node_coeffs(coeffs, grid)
    a, b, c, d = nc["A"], nc["B"], nc["C"], nc["D"]
    f, g = nc["f"], nc["g"]
    ks, km, kc = law.k_self, law.k_mean, law.k_const
    precomputed = law.mean_source == "precomputed"
    xbar = law.xbar
    N = cfg.N

    for rep in range(cfg.reps):
        x0 = np.empty(N)
        dW = np.empty((N, M))
        for agent in range(N):
            rng = stream(cfg.master_seed, _PURPOSE_AGENT, rep, agent)
            x0[agent] = cfg.initial.sample(rng)
            dW[agent] = rng.standard_normal(M) * sqdt
        states = np.empty((N, M + 1))
        controls = np.empty((N, M))
        states[:, 0] = x0
        x = x0.copy()
        # overflow is an expected failure mode, reported as a typed error
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(M):
                m = xbar[k] if precomputed else np.mean(x)
                u = ks[k] * x + km[k] * m + kc[k]
                x = x + (a[k] * x + b[k] * u + f[k]) * dt \
                      + (c[k] * x + d[k] * u + g[k]) * dW[:, k]
                if not np.all(np.isfinite(x)):
                    bad = int(np.argmax(~np.isfinite(x)))
                    raise SimulationDivergedError(
                        f"agent {bad} diverged at step {k + 1} of replication {rep}",
                        rep=rep, agent=bad, step=k + 1)
                controls[:, k] = u
                states[:, k + 1] = x
        yield PathSet(rep=rep, states=states, controls=controls,
                      increments=dW, mean=states.mean(axis=0))


def simulate(coeffs: CoefficientSet, law: StrategyLaw,
             cfg: PopulationConfig, grid: TimeGrid) -> list:
    """All replications as a list; see simulate_reps for the streaming form."""
    return list(simulate_reps(coeffs, law, cfg, grid))


def resimulate_agent(base: PathSet, i: int, law: StrategyLaw,
                     coeffs: CoefficientSet, grid: TimeGrid) -> PathSet:
    """Replay agent i under a different law against frozen co-players.

    Reuses agent i's recorded initial state and Brownian increments, leaves
    every other agent's path untouched, and recomputes the population
    average.  Replaying the original law reproduces the base paths bit for
    bit, which calibrates deviation-gap estimates at exactly zero.
    """
    _check_law_grid(law, grid)
    N, n_nodes = base.states.shape
    M, dt = grid.M, grid.dt
    if n_nodes != M + 1:
        raise ModelConfigError("path set and grid disagree on node count")
    if not 0 <= i < N:
        raise IndexError(f"agent index {i} out of range for N={N}")
    nc = _node_coeffs(coeffs, grid)
    a, b, c, d = nc["A"], nc["B"], nc["C"], nc["D"]
    f, g = nc["f"], nc["g"]
    ks, km, kc = law.k_self, law.k_mean, law.k_const
    precomputed = law.mean_source == "precomputed"
    xbar = law.xbar
    dWi = base.increments[i]
    # population sum without agent i, for realized-mean laws
    others = base.states.sum(axis=0) - base.states[i]

    states = base.states.copy()
    controls = base.controls.copy()
    x = base.states[i, 0]
    path = np.empty(M + 1)
    ui = np.empty(M)
    path[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(M):
            m = xbar[k] if precomputed else (others[k] + x) / N
            u = ks[k] * x + km[k] * m + kc[k]
            x = x + (a[k] * x + b[k] * u + f[k]) * dt \
                  + (c[k] * x + d[k] * u + g[k]) * dWi[k]
            if not math.isfinite(x):
                raise SimulationDivergedError(
                    f"agent {i} diverged at step {k + 1} of replication {base.rep}",
                    rep=base.rep, agent=i, step=k + 1)
            ui[k] = u
            path[k + 1] = x
    states[i] = path
    controls[i] = ui
    return PathSet(rep=base.rep, states=states, controls=controls,
                   increments=base.increments, mean=states.mean(axis=0))


def _trapz_weights_sum(vals: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid rule along the last axis."""
    return dt * (vals.sum(axis=-1) - 0.5 * (vals[..., 0] + vals[..., -1]))


def costs_all_agents(ps: PathSet, coeffs: CoefficientSet,
                     grid: TimeGrid) -> np.ndarray:
    """Cost of every agent on one replication, shape (N,).

    Half of: trapezoid of Q (x - Gamma x^(N) - eta)^2, rectangle sum of
    R u^2, plus terminal H (x(T) - Gamma0 x^(N)(T) - eta0)^2.
    """
    nc = _node_coeffs(coeffs, grid)
    M, dt = grid.M, grid.dt
    dev = ps.states - nc["Gamma"] * ps.mean - nc["eta"]
    state_int = _trapz_weights_sum(nc["Q"] * dev * dev, dt)
    ctrl_int = dt * (nc["R"][:M] * ps.controls * ps.controls).sum(axis=1)
    tdev = ps.states[:, -1] - coeffs.Gamma0 * ps.mean[-1] - coeffs.eta0
    terminal = coeffs.H * tdev * tdev
    return 0.5 * (state_int + ctrl_int + terminal)


def cost_of_agent(ps: PathSet, i: int, coeffs: CoefficientSet,
                  grid: TimeGrid) -> float:
    """Cost of agent i on one replication; same quadrature as costs_all_agents."""
    nc = _node_coeffs(coeffs, grid)
    M, dt = grid.M, grid.dt
    dev = ps.states[i] - nc["Gamma"] * ps.mean - nc["eta"]
    state_int = _trapz_weights_sum(nc["Q"] * dev * dev, dt)
    u = ps.controls[i]
    ctrl_int = dt * (nc["R"][:M] * u * u).sum()
    tdev = ps.states[i, -1] - coeffs.Gamma0 * ps.mean[-1] - coeffs.eta0
    return float(0.5 * (state_int + ctrl_int + coeffs.H * tdev * tdev))


def cost_per_replication(i: int, paths: list, coeffs: CoefficientSet,
                         grid: TimeGrid) -> np.ndarray:
    """Agent i's cost on each replication, shape (reps,)."""
    if not paths:
        raise ModelConfigError("empty path list")
    if not 0 <= i < paths[0].states.shape[0]:
        raise IndexError(f"agent index {i} out of range")
    return np.array([cost_of_agent(ps, i, coeffs, grid) for ps in paths])


def evaluate_cost(i: int, paths: list, coeffs: CoefficientSet,
                  grid: TimeGrid) -> CostReport:
    """Replication-averaged cost of agent i plus the population average."""
    if not paths:
        raise ModelConfigError("empty path list")
    if not 0 <= i < paths[0].states.shape[0]:
        raise IndexError(f"agent index {i} out of range")
    per_agent = np.stack([costs_all_agents(ps, coeffs, grid) for ps in paths])
    per_rep = per_agent[:, i]
    reps = per_rep.size
    stderr = float(per_rep.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return CostReport(agent=i, mean=float(per_rep.mean()), stderr=stderr,
                      population_mean=float(per_agent.mean()),
                      per_replication=per_rep)


def stationarity_residual(paths: list, finN: RiccatiSolution,
                          gains_N: GainSchedule,
                          coeffs: CoefficientSet) -> AdjointCheckReport:
    """Residual of B p + D q + R u along recorded centralized paths.

    p and q are rebuilt from the population Riccati solution at every node;
    for correctly derived gains the residual is a floating-point zero, and a
    perturbed gain shows up as a residual proportional to the perturbation.
    """
    if finN.variant != "finiteN" or gains_N.variant != "finiteN":
        raise ModelConfigError("stationarity check needs finite-population "
                               "solution and gains")
    if finN.N != gains_N.N:
        raise ModelConfigError("solution and gains disagree on N")
    if not paths:
        raise ModelConfigError("empty path list")
    grid = finN.grid
    M = grid.M
    N = paths[0].states.shape[0]
    if N != finN.N:
        raise ModelConfigError(f"paths have {N} agents but solution is for N={finN.N}")
    if paths[0].states.shape[1] != M + 1:
        raise ModelConfigError("paths and solution use different grids")

    nc = _node_coeffs(coeffs, grid)
    B, C, D, R, g = (nc[n][:M] for n in ("B", "C", "D", "R", "g"))
    P = finN.P[:M]
    K = finN.K[:M]
    phi = finN.phi[:M]
    S = P + K / finN.N

    max_abs = 0.0
    max_rel = 0.0
    for ps in paths:
        x = ps.states[:, :M]
        u = ps.controls
        m = ps.mean[:M]
        p_adj = P * x + K * m + phi
        q_adj = S * (C * x + D * u + g)
        res = np.abs(B * p_adj + D * q_adj + R * u)
        scale = np.maximum(np.abs(R * u), 1.0)
        max_abs = max(max_abs, float(res.max()))
        max_rel = max(max_rel, float((res / scale).max()))
    return AdjointCheckReport(max_abs=max_abs, max_rel=max_rel)


def convexity_probe(coeffs: CoefficientSet, N: int, grid: TimeGrid,
                    samples: int, seed: int,
                    inner_reps: int = 256) -> ProbeReport:
    """Monte Carlo lower-bound probe of the convexity form.

    Each sample draws one piecewise-constant control (standard normal per
    cell), runs the homogeneous perturbation dynamics from zero under
    inner_reps independent noise paths, and averages

        int [Q (1-Gamma/N)^2 x^2 + R u^2] dt + H (1-Gamma0/N)^2 x(T)^2.

    A negative minimum (beyond Monte Carlo error) certifies that the
    quadratic form fails to be convex for this model.
    """
    if samples < 1:
        raise ModelConfigError(f"need at least one sample, got {samples}")
    nc = _node_coeffs(coeffs, grid)
    M, dt = grid.M, grid.dt
    sqdt = math.sqrt(dt)
    qeff = nc["Q"] * (1.0 - nc["Gamma"] / N) ** 2
    heff = coeffs.H * (1.0 - coeffs.Gamma0 / N) ** 2
    a, b, c, d, r = nc["A"], nc["B"], nc["C"], nc["D"], nc["R"]

    values = np.empty(samples)
    stderrs = np.empty(samples)
    for s in range(samples):
        u = stream(seed, _PURPOSE_PROBE_CONTROL, s, 0).standard_normal(M)
        dW = stream(seed, _PURPOSE_PROBE_NOISE, s, 0) \
            .standard_normal((inner_reps, M)) * sqdt
        x = np.zeros(inner_reps)
        acc = np.zeros(inner_reps)
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(M):
                w = 0.5 if k == 0 else 1.0
                acc += w * qeff[k] * x * x
                x = x + (a[k] * x + b[k] * u[k]) * dt \
                      + (c[k] * x + d[k] * u[k]) * dW[:, k]
                if not np.all(np.isfinite(x)):
                    raise SimulationDivergedError(
                        f"perturbation path diverged in probe sample {s} "
                        f"at step {k + 1}", rep=s, step=k + 1)
        acc += 0.5 * qeff[M] * x * x
        vals = dt * acc + dt * float(np.dot(r[:M], u * u)) + heff * x * x
        values[s] = vals.mean()
        stderrs[s] = vals.std(ddof=1) / math.sqrt(inner_reps) if inner_reps > 1 else 0.0
    j = int(np.argmin(values))
    return ProbeReport(min_value=float(values[j]), min_stderr=float(stderrs[j]),
                       argmin=j, values=values, stderrs=stderrs,
                       inner_reps=inner_reps)


@dataclass(frozen=True)
class DecompositionReport:
    """Per-replication pieces of the deviation cost identity.

    j_dev = j_base + j_quad + i_cross up to floating-point error: j_quad is
    the pure quadratic cost of the deviation increment and i_cross collects
    the cross terms against the undeviated optimum.
    """

    agent: int
    j_dev: np.ndarray
    j_base: np.ndarray
    j_quad: np.ndarray
    i_cross: np.ndarray

    @property
    def residuals(self) -> np.ndarray:
        return np.abs(self.j_dev - self.j_base - self.j_quad - self.i_cross)

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())


def cost_decomposition(i: int, base_paths: list, dev_paths: list,
                       coeffs: CoefficientSet, grid: TimeGrid) -> DecompositionReport:
    """Split agent i's deviated cost against frozen co-players.

    base_paths hold the undeviated population, dev_paths the same
    replications with agent i replayed (resimulate_agent) on the same noise.
    The quadratic and cross pieces use the deviation increments
    x_tilde = x_dev - x_base, u_tilde = u_dev - u_base and the undeviated
    paths; the identity holds pathwise per replication.
    """
    if len(base_paths) != len(dev_paths) or not base_paths:
        raise ModelConfigError("base and deviated path lists must align")
    N = base_paths[0].states.shape[0]
    if not 0 <= i < N:
        raise IndexError(f"agent index {i} out of range")
    nc = _node_coeffs(coeffs, grid)
    M, dt = grid.M, grid.dt
    q, r, gam, eta = nc["Q"], nc["R"], nc["Gamma"], nc["eta"]
    wq = q * (1.0 - gam / N) ** 2
    cq = q * (1.0 - gam / N)
    wh = coeffs.H * (1.0 - coeffs.Gamma0 / N) ** 2
    ch = coeffs.H * (1.0 - coeffs.Gamma0 / N)

    j_dev, j_base, j_quad, i_cross = [], [], [], []
    for bp, dp in zip(base_paths, dev_paths):
        if bp.rep != dp.rep:
            raise ModelConfigError("replication order mismatch")
        j_dev.append(cost_of_agent(dp, i, coeffs, grid))
        j_base.append(cost_of_agent(bp, i, coeffs, grid))
        xt = dp.states[i] - bp.states[i]
        ut = dp.controls[i] - bp.controls[i]
        quad = 0.5 * (_trapz_weights_sum(wq * xt * xt, dt)
                      + dt * np.dot(r[:M], ut * ut)
                      + wh * xt[-1] * xt[-1])
        hat_dev = bp.states[i] - gam * bp.mean - eta
        cross = (_trapz_weights_sum(cq * xt * hat_dev, dt)
                 + dt * np.dot(r[:M], ut * bp.controls[i])
                 + ch * xt[-1] * (bp.states[i, -1]
                                  - coeffs.Gamma0 * bp.mean[-1] - coeffs.eta0))
        j_quad.append(quad)
        i_cross.append(cross)
    return DecompositionReport(agent=i, j_dev=np.array(j_dev),
                               j_base=np.array(j_base),
                               j_quad=np.array(j_quad),
                               i_cross=np.array(i_cross))
