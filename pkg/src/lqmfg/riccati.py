"""Backward solvers for the feedback Riccati system and its gain schedules.

Two variants are solved on the same uniform grid, both by classical
fixed-step fourth-order Runge-Kutta running backward from t = T:

* the limiting system (P, K, phi), integrated sequentially: P satisfies an
  autonomous rational equation, K a quadratic equation with coefficients
  built from P, and phi a linear equation built from P and K;
* the population system (P_N, K_N, phi_N) for N agents, integrated jointly
  because P_N and K_N are coupled through the shared effective weight.

Stage evaluations at half steps use piecewise-linear interpolation of both
the model coefficients and the already-computed solution components, the
same rule the rest of the package uses for time profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonSolvableError, SingularGainError
from .model import CoefficientSet, TimeGrid, half_interp


@dataclass(frozen=True)
class SolverOptions:
    """Numerical guards: minimum effective control weight and blow-up bound."""

    alpha_min: float = 1e-10
    blow_up_bound: float = 1e8


@dataclass(frozen=True)
class RiccatiSolution:
    """Node samples of (P, K, phi); variant 'limit' or 'finiteN' (then N is set)."""

    variant: str
    grid: TimeGrid
    P: np.ndarray
    K: np.ndarray
    phi: np.ndarray
    N: int | None = None


@dataclass(frozen=True)
class GainSchedule:
    """Node samples of the feedback gains alpha, beta, gamma, delta."""

    variant: str
    grid: TimeGrid
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    N: int | None = None


def gain_arrays(P, K, phi, B, C, D, R, g, N=None):
    """Evaluate the gain formulas on aligned arrays.

    The population variant replaces the weight P by P + K/N inside the
    effective-weight, cross, and offset terms; the limit formulas are the
    N -> infinity case of the same expressions.
    """
    S = P if N is None else P + K / N
    alpha = R + S * D * D
    beta = B * P + S * C * D
    gamma = B * K
    delta = B * phi + S * g * D
    return alpha, beta, gamma, delta


def _half_coeffs(coeffs: CoefficientSet, grid: TimeGrid):
    """Model coefficient values at the 2M+1 half-grid points."""
    return {name: getattr(coeffs, name).half_values(grid)
            for name in ("A", "B", "C", "D", "f", "g", "Q", "R", "Gamma", "eta")}


def _rk4_backward_scalar(f, terminal: float, grid: TimeGrid,
                         bound: float, name: str) -> np.ndarray:
    """Integrate y' = f(j, y) backward from t=T; j indexes the half grid."""
    M, dt = grid.M, grid.dt
    h = -dt
    out = [0.0] * (M + 1)
    y = float(terminal)
    out[M] = y
    for k in range(M - 1, -1, -1):
        j = 2 * k
        k1 = f(j + 2, y)
        k2 = f(j + 1, y + 0.5 * h * k1)
        k3 = f(j + 1, y + 0.5 * h * k2)
        k4 = f(j, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not (-bound < y < bound):
            raise NonSolvableError(
                f"{name} left [-{bound:g}, {bound:g}] near t={k * dt:.6g}",
                t=k * dt)
        out[k] = y
    return np.asarray(out)


def solve_limit(coeffs: CoefficientSet, grid: TimeGrid,
                opts: SolverOptions = SolverOptions()) -> RiccatiSolution:
    """Solve the limiting backward system (P, K, phi) on the grid.

    P first (rational autonomous form), then K (quadratic, coefficients from
    P), then phi (linear, coefficients from P and K).  Raises
    SingularGainError if the effective weight R + D^2 P falls below
    opts.alpha_min in magnitude, NonSolvableError on blow-up.
    """
    hc = _half_coeffs(coeffs, grid)
    dt = grid.dt
    amin = opts.alpha_min
    bound = opts.blow_up_bound

    # P' = -(2A + C^2) P - Q + (B + C D)^2 P^2 / (R + D^2 P)
    lin = (2.0 * hc["A"] + hc["C"] ** 2).tolist()
    src = hc["Q"].tolist()
    num = ((hc["B"] + hc["C"] * hc["D"]) ** 2).tolist()
    rr = hc["R"].tolist()
    d2 = (hc["D"] ** 2).tolist()

    def f_p(j, y):
        den = rr[j] + d2[j] * y
        if -amin < den < amin:
            raise SingularGainError(
                f"effective control weight |R + D^2 P| < {amin:g} "
                f"at t={j * dt / 2:.6g}", t=j * dt / 2)
        return -lin[j] * y - src[j] + num[j] * y * y / den

    P = _rk4_backward_scalar(f_p, coeffs.H, grid, bound, "P")

    # alpha and beta on the half grid, from P interpolated at half steps
    Ph = half_interp(P)
    alpha_h = hc["R"] + hc["D"] ** 2 * Ph
    if np.min(np.abs(alpha_h)) < amin:
        j = int(np.flatnonzero(np.abs(alpha_h) < amin)[-1])
        raise SingularGainError(
            f"effective control weight |alpha| < {amin:g} at t={j * dt / 2:.6g}",
            t=j * dt / 2)
    beta_h = hc["B"] * Ph + Ph * hc["C"] * hc["D"]

    # K' = Q Gamma + 2[B alpha^-1 beta - A] K + alpha^-1 B^2 K^2
    k0 = (hc["Q"] * hc["Gamma"]).tolist()
    k1c = (2.0 * (hc["B"] * beta_h / alpha_h - hc["A"])).tolist()
    k2c = (hc["B"] ** 2 / alpha_h).tolist()

    def f_k(j, y):
        return k0[j] + (k1c[j] + k2c[j] * y) * y

    K = _rk4_backward_scalar(f_k, -coeffs.H * coeffs.Gamma0, grid, bound, "K")

    # phi' = [(KB + beta) alpha^-1 B - A] phi
    #        + (KB + beta) alpha^-1 P g D - f (P + K) - C P g + Q eta
    Kh = half_interp(K)
    w = (Kh * hc["B"] + beta_h) / alpha_h
    p0 = (w * Ph * hc["g"] * hc["D"] - hc["f"] * (Ph + Kh)
          - hc["C"] * Ph * hc["g"] + hc["Q"] * hc["eta"]).tolist()
    p1 = (w * hc["B"] - hc["A"]).tolist()

    def f_phi(j, y):
        return p0[j] + p1[j] * y

    phi = _rk4_backward_scalar(f_phi, -coeffs.H * coeffs.eta0, grid, bound, "phi")

    return RiccatiSolution(variant="limit", grid=grid, P=P, K=K, phi=phi)


def solve_finite_N(coeffs: CoefficientSet, N: int, grid: TimeGrid,
                   opts: SolverOptions = SolverOptions()) -> RiccatiSolution:
    """Solve the coupled population system (P_N, K_N, phi_N) for N agents."""
    if N < 1:
        raise ValueError(f"population size must be >= 1, got {N}")
    hc = _half_coeffs(coeffs, grid)
    M, dt = grid.M, grid.dt
    h = -dt
    amin = opts.alpha_min
    bound = opts.blow_up_bound
    inv_n = 1.0 / N

    av = hc["A"].tolist()
    bv = hc["B"].tolist()
    cv = hc["C"].tolist()
    dv = hc["D"].tolist()
    fv = hc["f"].tolist()
    gv = hc["g"].tolist()
    rv = hc["R"].tolist()
    qe = (hc["Q"] * (1.0 - hc["Gamma"] * inv_n)).tolist()
    gam = hc["Gamma"].tolist()
    eta = hc["eta"].tolist()

    def rhs(j, p, k, ph):
        s = p + k * inv_n
        alpha = rv[j] + s * dv[j] * dv[j]
        if -amin < alpha < amin:
            raise SingularGainError(
                f"effective control weight |alpha_N| < {amin:g} "
                f"at t={j * dt / 2:.6g}", t=j * dt / 2)
        beta = bv[j] * p + s * cv[j] * dv[j]
        gamma = bv[j] * k
        delta = bv[j] * ph + s * gv[j] * dv[j]
        dp = (-2.0 * av[j] * p + p * bv[j] * beta / alpha
              - cv[j] * s * (cv[j] - dv[j] * beta / alpha) - qe[j])
        dk = (-2.0 * av[j] * k + p * bv[j] * gamma / alpha
              + k * bv[j] * (beta + gamma) / alpha
              + cv[j] * dv[j] * s * gamma / alpha + qe[j] * gam[j])
        dph = (-fv[j] * (p + k) - av[j] * ph + (p + k) * bv[j] * delta / alpha
               - cv[j] * s * (gv[j] - dv[j] * delta / alpha) + qe[j] * eta[j])
        return dp, dk, dph

    scale = coeffs.H * (1.0 - coeffs.Gamma0 * inv_n)
    p = scale
    k = -scale * coeffs.Gamma0
    ph = -scale * coeffs.eta0
    P = [0.0] * (M + 1)
    K = [0.0] * (M + 1)
    PHI = [0.0] * (M + 1)
    P[M], K[M], PHI[M] = p, k, ph
    for step in range(M - 1, -1, -1):
        j = 2 * step
        a1, b1, c1 = rhs(j + 2, p, k, ph)
        a2, b2, c2 = rhs(j + 1, p + 0.5 * h * a1, k + 0.5 * h * b1, ph + 0.5 * h * c1)
        a3, b3, c3 = rhs(j + 1, p + 0.5 * h * a2, k + 0.5 * h * b2, ph + 0.5 * h * c2)
        a4, b4, c4 = rhs(j, p + h * a3, k + h * b3, ph + h * c3)
        p = p + (h / 6.0) * (a1 + 2.0 * (a2 + a3) + a4)
        k = k + (h / 6.0) * (b1 + 2.0 * (b2 + b3) + b4)
        ph = ph + (h / 6.0) * (c1 + 2.0 * (c2 + c3) + c4)
        if not (-bound < p < bound and -bound < k < bound and -bound < ph < bound):
            raise NonSolvableError(
                f"(P_N, K_N, phi_N) left [-{bound:g}, {bound:g}] "
                f"near t={step * dt:.6g}", t=step * dt)
        P[step], K[step], PHI[step] = p, k, ph
    return RiccatiSolution(variant="finiteN", grid=grid,
                           P=np.asarray(P), K=np.asarray(K),
                           phi=np.asarray(PHI), N=N)


def gains(sol: RiccatiSolution, coeffs: CoefficientSet,
          opts: SolverOptions = SolverOptions()) -> GainSchedule:
    """Gain schedule at the grid nodes for either solution variant."""
    grid = sol.grid
    B = coeffs.B.node_values(grid)
    C = coeffs.C.node_values(grid)
    D = coeffs.D.node_values(grid)
    R = coeffs.R.node_values(grid)
    g = coeffs.g.node_values(grid)
    alpha, beta, gamma, delta = gain_arrays(
        sol.P, sol.K, sol.phi, B, C, D, R, g, N=sol.N)
    small = np.abs(alpha) < opts.alpha_min
    if np.any(small):
        k = int(np.flatnonzero(small)[-1])
        t_k = grid.nodes[k]
        raise SingularGainError(
            f"effective control weight |alpha(t)| < {opts.alpha_min:g} "
            f"at t={t_k:.6g}", t=float(t_k))
    return GainSchedule(variant=sol.variant, grid=grid, alpha=alpha,
                        beta=beta, gamma=gamma, delta=delta, N=sol.N)


def half_gain_arrays(sol: RiccatiSolution, coeffs: CoefficientSet):
    """Gain values on the half grid, for RK4 stages of forward ODEs.

    P, K, phi are interpolated at half steps by the shared midpoint rule and
    fed through the same gain formulas as `gains`.
    """
    grid = sol.grid
    hc = _half_coeffs(coeffs, grid)
    Ph, Kh, phih = half_interp(sol.P), half_interp(sol.K), half_interp(sol.phi)
    return gain_arrays(Ph, Kh, phih, hc["B"], hc["C"], hc["D"],
                       hc["R"], hc["g"], N=sol.N)
