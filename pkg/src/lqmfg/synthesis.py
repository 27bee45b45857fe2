"""Mean-field trajectory and feedback strategy laws.

A strategy law is a sampled feedback rule

    u_i(t_k) = k_self[k] x_i(t_k) + k_mean[k] m(t_k) + k_const[k],

where m is either a precomputed deterministic mean-field path or the
realized population average.  Laws are plain sampled arrays rather than
closures so they can be serialized, diffed, scaled, and replayed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelConfigError, NonSolvableError
from .model import CoefficientSet, TimeGrid, half_interp
from .riccati import GainSchedule

LAW_KINDS = ("decentralized", "centralized", "zero", "scaled",
             "meanfield-informed")


@dataclass(frozen=True)
class MeanFieldPath:
    """Deterministic population-average trajectory at the grid nodes."""

    grid: TimeGrid
    values: np.ndarray
    initial: float


@dataclass(frozen=True)
class StrategyLaw:
    """Sampled feedback law; mean_source picks what m(t_k) is at run time."""

    kind: str
    grid: TimeGrid
    k_self: np.ndarray
    k_mean: np.ndarray
    k_const: np.ndarray
    mean_source: str                  # "precomputed" | "realized"
    xbar: np.ndarray | None = None    # required when mean_source == "precomputed"
    theta: float | None = None        # scaled kind only

    @property
    def label(self) -> str:
        if self.kind == "scaled":
            return f"scaled({self.theta:g})"
        return self.kind


def solve_mean_field(coeffs: CoefficientSet, gains: GainSchedule,
                     xi_bar: float, grid: TimeGrid) -> MeanFieldPath:
    """Forward RK4 for the deterministic mean-field ODE.

    dxbar/dt = [A - B(beta+gamma)/alpha] xbar - B delta/alpha + f,
    started from the analytic initial mean xi_bar.  Gains must come from the
    limit variant; half-step values are linear interpolants of the node
    schedules, consistent with the profile rule used everywhere else.
    """
    if gains.variant != "limit":
        raise ModelConfigError("mean-field ODE needs limit-variant gains, "
                               f"got {gains.variant!r}")
    ah = half_interp(gains.alpha)
    bh = half_interp(gains.beta)
    gh = half_interp(gains.gamma)
    dh = half_interp(gains.delta)
    Ah = coeffs.A.half_values(grid)
    Bh = coeffs.B.half_values(grid)
    fh = coeffs.f.half_values(grid)
    lin = Ah - Bh * (bh + gh) / ah
    cst = -Bh * dh / ah + fh
    if not (np.all(np.isfinite(lin)) and np.all(np.isfinite(cst))):
        raise NonSolvableError("mean-field drift is non-finite")
    lin = lin.tolist()
    cst = cst.tolist()

    M, dt = grid.M, grid.dt
    out = [0.0] * (M + 1)
    y = float(xi_bar)
    out[0] = y
    for k in range(M):
        j = 2 * k
        k1 = lin[j] * y + cst[j]
        yh = y + 0.5 * dt * k1
        k2 = lin[j + 1] * yh + cst[j + 1]
        yh = y + 0.5 * dt * k2
        k3 = lin[j + 1] * yh + cst[j + 1]
        yf = y + dt * k3
        k4 = lin[j + 2] * yf + cst[j + 2]
        y = y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not math.isfinite(y):
            raise NonSolvableError(
                f"mean-field trajectory became non-finite near t={(k + 1) * dt:.6g}",
                t=(k + 1) * dt)
        out[k + 1] = y
    return MeanFieldPath(grid=grid, values=np.asarray(out), initial=float(xi_bar))


def make_law(kind: str, gains: GainSchedule,
             xbar: MeanFieldPath | None = None,
             theta: float | None = None) -> StrategyLaw:
    """Build a strategy law from a gain schedule.

    decentralized / scaled(theta) need limit gains plus a mean-field path;
    centralized needs population gains; zero and meanfield-informed need no
    mean-field path.  Mismatches raise ModelConfigError.
    """
    if kind not in LAW_KINDS:
        raise ModelConfigError(f"unknown strategy kind {kind!r}")
    grid = gains.grid
    n_nodes = gains.alpha.size

    if kind == "zero":
        z = np.zeros(n_nodes)
        return StrategyLaw(kind=kind, grid=grid, k_self=z, k_mean=z.copy(),
                           k_const=z.copy(), mean_source="realized")

    k_self = -gains.beta / gains.alpha
    k_mean = -gains.gamma / gains.alpha
    k_const = -gains.delta / gains.alpha

    if kind == "centralized":
        if gains.variant != "finiteN":
            raise ModelConfigError("centralized law needs finite-population gains")
        return StrategyLaw(kind=kind, grid=grid, k_self=k_self, k_mean=k_mean,
                           k_const=k_const, mean_source="realized")

    if gains.variant != "limit":
        raise ModelConfigError(f"{kind} law needs limit-variant gains")

    if kind == "meanfield-informed":
        return StrategyLaw(kind=kind, grid=grid, k_self=k_self, k_mean=k_mean,
                           k_const=k_const, mean_source="realized")

    # decentralized and scaled both track the precomputed mean-field path
    if xbar is None:
        raise ModelConfigError(f"{kind} law needs a mean-field path")
    if xbar.values.size != n_nodes:
        raise ModelConfigError("mean-field path and gains use different grids")
    if kind == "scaled":
        if theta is None:
            raise ModelConfigError("scaled law needs a scaling factor")
        th = float(theta)
        return StrategyLaw(kind=kind, grid=grid, k_self=th * k_self,
                           k_mean=th * k_mean, k_const=th * k_const,
                           mean_source="precomputed", xbar=xbar.values,
                           theta=th)
    return StrategyLaw(kind="decentralized", grid=grid, k_self=k_self,
                       k_mean=k_mean, k_const=k_const,
                       mean_source="precomputed", xbar=xbar.values)
