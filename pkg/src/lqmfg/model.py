"""Game data: uniform time grid, scalar coefficient profiles, initial laws.

The model is scalar throughout: one state, one control, one Brownian motion
per agent.  Dynamics and running cost are

    dx_i = [A x_i + B u_i + f] dt + [C x_i + D u_i + g] dW_i,
    J_i  = 1/2 E{ int_0^T [ Q (x_i - Gamma x^(N) - eta)^2 + R u_i^2 ] dt
                  + H (x_i(T) - Gamma0 x^(N)(T) - eta0)^2 },

with A..eta deterministic functions of time and H, Gamma0, eta0 constants.
Coefficients are either constant or sampled on the grid nodes with
piecewise-linear evaluation in between.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelConfigError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k*dt on [0, T] with dt = T/M."""

    T: float
    M: int

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise ModelConfigError(f"horizon T must be finite and positive, got {self.T}")
        if self.M < 2:
            raise ModelConfigError(f"step count M must be >= 2, got {self.M}")

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def nodes(self) -> np.ndarray:
        # linspace pins t_M = T exactly
        return np.linspace(0.0, self.T, self.M + 1)


@dataclass(frozen=True)
class TimeProfile:
    """A scalar function of time: constant, or sampled at grid nodes.

    Sampled profiles interpolate linearly between nodes and reproduce the
    stored values exactly at the nodes.
    """

    kind: str                        # "constant" | "sampled"
    value: float = 0.0               # constant kind
    values: tuple = ()               # sampled kind, length M+1
    grid: TimeGrid | None = None     # sampled kind

    @staticmethod
    def constant(value: float) -> "TimeProfile":
        v = float(value)
        if not math.isfinite(v):
            raise ModelConfigError(f"non-finite constant coefficient: {value}")
        return TimeProfile(kind="constant", value=v)

    @staticmethod
    def sampled(values, grid: TimeGrid) -> "TimeProfile":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.size != grid.M + 1:
            raise ModelConfigError(
                f"sampled profile needs M+1={grid.M + 1} values, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ModelConfigError("sampled profile contains non-finite values")
        return TimeProfile(kind="sampled", values=tuple(arr.tolist()), grid=grid)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def at(self, t: float) -> float:
        """Evaluate at time t; exact at nodes, linear between them."""
        if self.is_constant:
            return self.value
        grid = self.grid
        if t < 0.0 or t > grid.T:
            raise ModelConfigError(f"time {t} outside [0, {grid.T}]")
        return float(np.interp(t, grid.nodes, self.values))

    def node_values(self, grid: TimeGrid) -> np.ndarray:
        """Values at the M+1 nodes of `grid` (must match the sampling grid)."""
        if self.is_constant:
            return np.full(grid.M + 1, self.value)
        self._check_alignment(grid)
        return np.asarray(self.values, dtype=float)

    def half_values(self, grid: TimeGrid) -> np.ndarray:
        """Values at the 2M+1 half-grid points t_j = j*dt/2.

        Odd indices are cell midpoints, obtained by the same piecewise-linear
        rule as `at`; this is what the RK4 stages consume.
        """
        if self.is_constant:
            return np.full(2 * grid.M + 1, self.value)
        self._check_alignment(grid)
        v = np.asarray(self.values, dtype=float)
        out = np.empty(2 * grid.M + 1)
        out[0::2] = v
        out[1::2] = 0.5 * (v[:-1] + v[1:])
        return out

    def _check_alignment(self, grid: TimeGrid) -> None:
        if self.grid is None or self.grid.M != grid.M or self.grid.T != grid.T:
            raise ModelConfigError("sampled profile is not aligned to the requested grid")


def eval_profile(p: TimeProfile, t: float) -> float:
    """Evaluate a time profile at t in [0, T]."""
    return p.at(t)


def half_interp(node_vals) -> np.ndarray:
    """Interleave node values with their cell midpoints (length 2M+1).

    Matches TimeProfile.half_values, so solver outputs sampled at nodes can be
    fed back into half-step stage evaluations consistently.
    """
    v = np.asarray(node_vals, dtype=float)
    out = np.empty(2 * v.size - 1)
    out[0::2] = v
    out[1::2] = 0.5 * (v[:-1] + v[1:])
    return out


@dataclass(frozen=True)
class InitialLaw:
    """Distribution of the i.i.d. initial states; `mean` is its analytic mean."""

    kind: str                 # "uniform" | "gaussian" | "point"
    a: float = 0.0            # uniform: lower; gaussian: mean; point: value
    b: float = 0.0            # uniform: upper; gaussian: variance

    @staticmethod
    def uniform(a: float, b: float) -> "InitialLaw":
        if not (math.isfinite(a) and math.isfinite(b) and a <= b):
            raise ModelConfigError(f"bad uniform support [{a}, {b}]")
        return InitialLaw(kind="uniform", a=float(a), b=float(b))

    @staticmethod
    def gaussian(mean: float, var: float) -> "InitialLaw":
        if not (math.isfinite(mean) and math.isfinite(var) and var >= 0.0):
            raise ModelConfigError(f"bad gaussian parameters mean={mean}, var={var}")
        return InitialLaw(kind="gaussian", a=float(mean), b=float(var))

    @staticmethod
    def point(c: float) -> "InitialLaw":
        if not math.isfinite(c):
            raise ModelConfigError(f"bad point mass at {c}")
        return InitialLaw(kind="point", a=float(c))

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        return self.a  # gaussian mean / point value

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size=size)
        if self.kind == "gaussian":
            return self.a + math.sqrt(self.b) * rng.standard_normal(size=size)
        if size is None:
            return self.a
        return np.full(size, self.a)


_PROFILE_NAMES = ("A", "B", "C", "D", "f", "g", "Q", "R", "Gamma", "eta")


@dataclass(frozen=True)
class CoefficientSet:
    """All model coefficients: ten time profiles plus three terminal scalars."""

    A: TimeProfile
    B: TimeProfile
    C: TimeProfile
    D: TimeProfile
    f: TimeProfile
    g: TimeProfile
    Q: TimeProfile
    R: TimeProfile
    Gamma: TimeProfile
    eta: TimeProfile
    H: float
    Gamma0: float
    eta0: float

    def __post_init__(self):
        for name in ("H", "Gamma0", "eta0"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ModelConfigError(f"non-finite terminal scalar {name}={v}")

    @staticmethod
    def from_constants(*, A=0.0, B=0.0, C=0.0, D=0.0, f=0.0, g=0.0,
                       Q=0.0, R=0.0, Gamma=0.0, eta=0.0,
                       H=0.0, Gamma0=0.0, eta0=0.0) -> "CoefficientSet":
        c = TimeProfile.constant
        return CoefficientSet(A=c(A), B=c(B), C=c(C), D=c(D), f=c(f), g=c(g),
                              Q=c(Q), R=c(R), Gamma=c(Gamma), eta=c(eta),
                              H=float(H), Gamma0=float(Gamma0), eta0=float(eta0))

    def replace_constant(self, **overrides) -> "CoefficientSet":
        """Copy with some profiles replaced by constants (test convenience)."""
        kwargs = {name: getattr(self, name) for name in _PROFILE_NAMES}
        kwargs.update(H=self.H, Gamma0=self.Gamma0, eta0=self.eta0)
        for name, v in overrides.items():
            if name in _PROFILE_NAMES:
                kwargs[name] = TimeProfile.constant(v)
            elif name in ("H", "Gamma0", "eta0"):
                kwargs[name] = float(v)
            else:
                raise ModelConfigError(f"unknown coefficient {name!r}")
        return CoefficientSet(**kwargs)

    def to_dict(self) -> dict:
        """JSON-compatible representation, used for fingerprinting."""
        out = {}
        for name in _PROFILE_NAMES:
            p: TimeProfile = getattr(self, name)
            out[name] = p.value if p.is_constant else list(p.values)
        out["H"] = self.H
        out["Gamma0"] = self.Gamma0
        out["eta0"] = self.eta0
        return out


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the standing-assumption checks; indefinite R is a flag, not an error."""

    q_nonnegative: bool
    h_nonnegative: bool
    r_indefinite: bool
    all_finite: bool
    messages: tuple

    @property
    def a3_holds(self) -> bool:
        return self.q_nonnegative and self.h_nonnegative


def validate(coeffs: CoefficientSet, grid: TimeGrid) -> ValidationReport:
    """Check state-weight nonnegativity, flag indefinite control weight.

    Raises ModelConfigError if any coefficient value is non-finite; a
    negative R is permitted and only flagged.
    """
    messages = []
    for name in _PROFILE_NAMES:
        vals = getattr(coeffs, name).node_values(grid)
        if not np.all(np.isfinite(vals)):
            raise ModelConfigError(f"coefficient {name} has non-finite values")
    q = coeffs.Q.node_values(grid)
    r = coeffs.R.node_values(grid)
    q_ok = bool(np.all(q >= 0.0))
    h_ok = coeffs.H >= 0.0
    r_indef = bool(np.any(r < 0.0))
    if not q_ok:
        messages.append("state weight Q is negative at some node")
    if not h_ok:
        messages.append(f"terminal weight H={coeffs.H} is negative")
    if r_indef:
        messages.append("indefinite control weight: R < 0 at some node (allowed)")
    return ValidationReport(q_nonnegative=q_ok, h_nonnegative=h_ok,
                            r_indefinite=r_indef, all_finite=True,
                            messages=tuple(messages))


# ---------------------------------------------------------------------------
# Configuration files
# ---------------------------------------------------------------------------

def canonical_fingerprint(data) -> str:
    """sha256 of the canonical JSON encoding; invariant under key reordering."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_grid(cfg: dict) -> TimeGrid:
    try:
        g = cfg["grid"]
        return TimeGrid(T=float(g["T"]), M=int(g["M"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelConfigError(f"bad or missing grid section: {exc}") from exc


def parse_coefficients(cfg: dict, grid: TimeGrid) -> CoefficientSet:
    try:
        section = cfg["coefficients"]
    except KeyError as exc:
        raise ModelConfigError("missing 'coefficients' section") from exc
    kwargs = {}
    for name in _PROFILE_NAMES:
        if name not in section:
            raise ModelConfigError(f"missing coefficient {name!r}")
        raw = section[name]
        if isinstance(raw, (list, tuple)):
            kwargs[name] = TimeProfile.sampled(raw, grid)
        else:
            kwargs[name] = TimeProfile.constant(raw)
    for name in ("H", "Gamma0", "eta0"):
        if name not in section:
            raise ModelConfigError(f"missing terminal scalar {name!r}")
        kwargs[name] = float(section[name])
    return CoefficientSet(**kwargs)


def parse_initial_law(cfg: dict) -> InitialLaw:
    try:
        section = cfg["initial"]
        kind = section["kind"]
        if kind == "uniform":
            return InitialLaw.uniform(section["a"], section["b"])
        if kind == "gaussian":
            return InitialLaw.gaussian(section["mean"], section["var"])
        if kind == "point":
            return InitialLaw.point(section["value"])
    except (KeyError, TypeError) as exc:
        raise ModelConfigError(f"bad or missing initial-law section: {exc}") from exc
    raise ModelConfigError(f"unknown initial law kind {kind!r}")


def load_config(path) -> dict:
    """Read a JSON config file; raises ModelConfigError on parse failure."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ModelConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ModelConfigError(f"config file is not valid JSON: {exc}") from exc
