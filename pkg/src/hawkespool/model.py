"""Model primitives: exciting kernels, baseline intensities and trade-size distributions.

A model is the triple (baseline, kernel, marks).  All evaluation methods are
pure; instances are frozen and hashable so they can key solver caches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, NormUndefinedError

# Evaluating a mark MGF is only guaranteed on the closed left half plane; a
# small grace band absorbs roundoff from iterates that graze the boundary.
MGF_REAL_TOL = 1e-9
_LATTICE_TAIL = 1e-14


def _as_positive_tuple(values, name, allow_zero=False):
    out = tuple(float(v) for v in values)
    lo = 0.0 if allow_zero else np.nextafter(0.0, 1.0)
    for v in out:
        if not math.isfinite(v) or v < lo:
            raise ValueError(f"{name} must be finite and {'>= 0' if allow_zero else '> 0'}")
    return out


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    return t


def _check_mgf_arg(omega):
    omega = np.asarray(omega, dtype=complex)
    if np.max(omega.real) > MGF_REAL_TOL:
        raise ValueError("mark MGF argument must have nonpositive real part")
    return omega


# ---------------------------------------------------------------------------
# Exciting kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialKernel:
    """h(t) = delta * exp(-kappa t)."""

    delta: float
    kappa: float

    def __post_init__(self):
        if self.delta < 0 or self.kappa <= 0:
            raise ValueError("ExponentialKernel requires delta >= 0 and kappa > 0")

    def __call__(self, t):
        t = _check_time(t)
        return self.delta * np.exp(-self.kappa * t)

    def l1_norm(self):
        return self.delta / self.kappa

    def integral(self, t):
        """Cumulative integral of h over [0, t]."""
        t = _check_time(t)
        return self.delta / self.kappa * -np.expm1(-self.kappa * t)

    def offset_quantile(self, u):
        """Inverse CDF of the normalized offspring-offset density h / ||h||."""
        return -np.log1p(-np.asarray(u, dtype=float)) / self.kappa

    @property
    def is_monotone(self):
        return True


@dataclass(frozen=True)
class PowerLawKernel:
    """h(t) = C / (1 + t)^gamma with gamma > 1.  C = 0 gives the zero kernel."""

    C: float
    gamma: float

    def __post_init__(self):
        if self.C < 0 or self.gamma <= 1:
            raise ValueError("PowerLawKernel requires C >= 0 and gamma > 1")

    def __call__(self, t):
        t = _check_time(t)
        return self.C * (1.0 + t) ** (-self.gamma)

    def l1_norm(self):
        return self.C / (self.gamma - 1.0)

    def integral(self, t):
        t = _check_time(t)
        return self.C / (self.gamma - 1.0) * (1.0 - (1.0 + t) ** (1.0 - self.gamma))

    def offset_quantile(self, u):
        u = np.asarray(u, dtype=float)
        return (1.0 - u) ** (-1.0 / (self.gamma - 1.0)) - 1.0

    @property
    def is_monotone(self):
        return True


@dataclass(frozen=True)
class TabulatedKernel:
    """Piecewise-linear kernel on an ascending grid starting at 0; zero beyond the grid.

    The last tabulated value must be 0, otherwise the L1 norm is treated as
    undefined (the extrapolated tail would not be integrable).
    """

    grid: tuple
    values: tuple

    def __post_init__(self):
        grid = tuple(float(g) for g in self.grid)
        values = _as_positive_tuple(self.values, "kernel values", allow_zero=True)
        if len(grid) != len(values) or len(grid) < 2:
            raise ValueError("grid and values must have equal length >= 2")
        if grid[0] != 0.0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly ascending and start at 0")
        if values[-1] != 0.0:
            raise NormUndefinedError("tabulated kernel must decay to 0 at the grid end")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        g = np.asarray(grid)
        v = np.asarray(values)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(g))])
        object.__setattr__(self, "_cum", tuple(cum))

    def __call__(self, t):
        t = _check_time(t)
        return np.interp(t, self.grid, self.values, right=0.0)

    def l1_norm(self):
        return self._cum[-1]

    def integral(self, t):
        t = _check_time(t)
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        cum = np.asarray(self._cum)
        idx = np.clip(np.searchsorted(g, t, side="right") - 1, 0, len(g) - 2)
        tc = np.minimum(t, g[-1])
        ht = np.interp(tc, g, v)
        out = cum[idx] + 0.5 * (v[idx] + ht) * (tc - g[idx])
        return out if out.ndim else float(out)

    def offset_quantile(self, u):
        # table inversion of the cumulative-trapezoid CDF
        u = np.asarray(u, dtype=float)
        return np.interp(u * self.l1_norm(), self._cum, self.grid)

    @property
    def is_monotone(self):
        return all(b <= a + 1e-15 for a, b in zip(self.values, self.values[1:]))


ExcitingKernel = Union[ExponentialKernel, PowerLawKernel, TabulatedKernel]


def kernel_is_zero(kernel) -> bool:
    if isinstance(kernel, TabulatedKernel):
        return max(kernel.values) == 0.0
    if isinstance(kernel, ExponentialKernel):
        return kernel.delta == 0.0
    return kernel.C == 0.0


# ---------------------------------------------------------------------------
# Baseline intensities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantBaseline:
    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("baseline level must be >= 0")

    def __call__(self, t):
        t = _check_time(t)
        return np.broadcast_to(self.mu, t.shape).copy() if t.ndim else self.mu

    def integral(self, t):
        t = _check_time(t)
        return self.mu * t

    def sup_on(self, a, b):
        return self.mu

    @property
    def breakpoints(self):
        return ()


@dataclass(frozen=True)
class PiecewiseConstantBaseline:
    """Right-continuous step function: levels[i] on [breakpoints[i-1], breakpoints[i])."""

    breakpoints: tuple
    levels: tuple

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        levels = _as_positive_tuple(self.levels, "baseline levels", allow_zero=True)
        if len(levels) != len(bps) + 1:
            raise ValueError("need len(levels) == len(breakpoints) + 1")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])) or (bps and bps[0] <= 0):
            raise ValueError("breakpoints must be strictly ascending and positive")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "levels", levels)
        edges = np.concatenate([[0.0], np.asarray(bps)])
        cum = np.concatenate([[0.0], np.cumsum(np.asarray(levels[:-1]) * np.diff(edges))]) \
            if bps else np.array([0.0])
        object.__setattr__(self, "_edges", tuple(edges))
        object.__setattr__(self, "_cum", tuple(cum))

    def __call__(self, t):
        t = _check_time(t)
        idx = np.searchsorted(self.breakpoints, t, side="right")
        out = np.asarray(self.levels)[idx]
        return out if out.ndim else float(out)

    def integral(self, t):
        t = _check_time(t)
        edges = np.asarray(self._edges)
        idx = np.searchsorted(self.breakpoints, t, side="right")
        out = np.asarray(self._cum)[idx] + np.asarray(self.levels)[idx] * (t - edges[idx])
        return out if out.ndim else float(out)

    def sup_on(self, a, b):
        lo = int(np.searchsorted(self.breakpoints, a, side="right"))
        hi = int(np.searchsorted(self.breakpoints, b, side="left"))
        return max(self.levels[lo : hi + 1])

    def sup(self):
        return max(self.levels)


@dataclass(frozen=True)
class AugmentedBaseline:
    """base(t) + shift_mass * h(t): the baseline seen after an initial fill."""

    base: "BaselineIntensity"
    shift_mass: float
    kernel: ExcitingKernel

    def __post_init__(self):
        if self.shift_mass < 0:
            raise ValueError("shift_mass must be >= 0")

    def __call__(self, t):
        return self.base(t) + self.shift_mass * self.kernel(t)

    def integral(self, t):
        return self.base.integral(t) + self.shift_mass * self.kernel.integral(t)

    def sup_on(self, a, b):
        if self.kernel.is_monotone:
            peak = self.kernel(a)
        else:
            g = np.asarray(self.kernel.grid)
            inside = g[(g > a) & (g < b)]
            peak = max(self.kernel(np.concatenate([[a, b], inside])).max(), 0.0)
        return self.base.sup_on(a, b) + self.shift_mass * peak

    @property
    def breakpoints(self):
        return self.base.breakpoints


BaselineIntensity = Union[ConstantBaseline, PiecewiseConstantBaseline, AugmentedBaseline]


# ---------------------------------------------------------------------------
# Trade-size (mark) distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantMark:
    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("constant mark must be > 0")

    def mean(self):
        return self.a

    def second_moment(self):
        return self.a * self.a

    def mgf(self, omega):
        omega = _check_mgf_arg(omega)
        out = np.exp(self.a * omega)
        return out if out.ndim else complex(out)

    def exp_weighted_moment(self, m, c):
        """E[l^m exp(-l c)] for c >= 0, the m-th MGF derivative at -c."""
        c = np.asarray(c, dtype=float)
        out = self.a**m * np.exp(-self.a * c)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return self.a if size is None else np.full(size, self.a)

    @property
    def lattice_delta(self):
        return self.a


@dataclass(frozen=True)
class ExponentialMark:
    mean_value: float

    def __post_init__(self):
        if self.mean_value <= 0:
            raise ValueError("exponential mark mean must be > 0")

    @property
    def rate(self):
        return 1.0 / self.mean_value

    def mean(self):
        return self.mean_value

    def second_moment(self):
        return 2.0 * self.mean_value**2

    def mgf(self, omega):
        omega = _check_mgf_arg(omega)
        out = self.rate / (self.rate - omega)
        return out if out.ndim else complex(out)

    def exp_weighted_moment(self, m, c):
        c = np.asarray(c, dtype=float)
        out = self.rate * math.factorial(m) / (self.rate + c) ** (m + 1)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return rng.exponential(self.mean_value, size=size)

    @property
    def lattice_delta(self):
        return None


@dataclass(frozen=True)
class HyperExponentialMark:
    """Mixture of exponentials: weights c_i in (0,1) summing to 1, rates lambda_i > 0."""

    weights: tuple
    rates: tuple

    def __post_init__(self):
        weights = _as_positive_tuple(self.weights, "weights")
        rates = _as_positive_tuple(self.rates, "rates")
        if len(weights) != len(rates):
            raise ValueError("weights and rates must have equal length")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "rates", rates)

    def mean(self):
        return sum(w / r for w, r in zip(self.weights, self.rates))

    def second_moment(self):
        return sum(2.0 * w / r**2 for w, r in zip(self.weights, self.rates))

    def mgf(self, omega):
        omega = _check_mgf_arg(omega)
        out = sum(w * r / (r - omega) for w, r in zip(self.weights, self.rates))
        out = np.asarray(out)
        return out if out.ndim else complex(out)

    def exp_weighted_moment(self, m, c):
        c = np.asarray(c, dtype=float)
        out = sum(
            w * r * math.factorial(m) / (r + c) ** (m + 1)
            for w, r in zip(self.weights, self.rates)
        )
        out = np.asarray(out)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        scales = 1.0 / np.asarray(self.rates)
        return rng.exponential(scales[comp])

    @property
    def lattice_delta(self):
        return None


@dataclass(frozen=True)
class LatticeMark:
    """Support {k * delta : k >= 1} with P(l = k delta) = probs[k-1]."""

    delta: float
    probs: tuple

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("lattice spacing must be > 0")
        probs = _as_positive_tuple(self.probs, "lattice probs", allow_zero=True)
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("lattice probs must sum to 1")
        object.__setattr__(self, "probs", probs)

    def prob(self, k):
        """P(l = k delta); zero outside the stored support (and at k = 0)."""
        if 1 <= k <= len(self.probs):
            return self.probs[k - 1]
        return 0.0

    def mean(self):
        return self.delta * sum(k * p for k, p in enumerate(self.probs, start=1))

    def second_moment(self):
        return self.delta**2 * sum(k * k * p for k, p in enumerate(self.probs, start=1))

    def mgf(self, omega):
        omega = _check_mgf_arg(omega)
        out = np.zeros(np.shape(omega), dtype=complex)
        remaining = 1.0
        for k, p in enumerate(self.probs, start=1):
            out = out + p * np.exp(k * self.delta * omega)
            remaining -= p
            if remaining < _LATTICE_TAIL:
                break
        return out if out.ndim else complex(out)

    def exp_weighted_moment(self, m, c):
        c = np.asarray(c, dtype=float)
        out = np.zeros(c.shape, dtype=float)
        for k, p in enumerate(self.probs, start=1):
            out = out + p * (k * self.delta) ** m * np.exp(-k * self.delta * c)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        k = rng.choice(len(self.probs), size=size, p=self.probs) + 1
        return self.delta * k

    @property
    def lattice_delta(self):
        return self.delta


MarkDistribution = Union[ConstantMark, ExponentialMark, HyperExponentialMark, LatticeMark]


@dataclass(frozen=True)
class HawkesModel:
    """The triple (baseline, kernel, marks) driving the execution process."""

    baseline: BaselineIntensity
    kernel: ExcitingKernel
    marks: MarkDistribution

    def branching_ratio(self):
        return self.kernel.l1_norm() * self.marks.mean()

    @property
    def volume_lattice_delta(self):
        """Spacing of the cumulative-volume lattice, or None for continuous marks."""
        return self.marks.lattice_delta

    def with_baseline(self, baseline):
        return HawkesModel(baseline, self.kernel, self.marks)


# ---------------------------------------------------------------------------
# JSON (de)serialization
# ---------------------------------------------------------------------------

_KERNEL_TAGS = {"exponential", "power_law", "tabulated"}
_BASELINE_TAGS = {"constant", "piecewise_constant", "augmented"}
_MARK_TAGS = {"constant", "exponential", "hyper_exponential", "lattice"}


def _tag(d, allowed, what):
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{what} spec must be an object with a 'type' tag")
    t = d["type"]
    if t not in allowed:
        raise ConfigError(f"unknown {what} type {t!r} (expected one of {sorted(allowed)})")
    return t


def kernel_from_dict(d) -> ExcitingKernel:
    t = _tag(d, _KERNEL_TAGS, "kernel")
    try:
        if t == "exponential":
            return ExponentialKernel(d["delta"], d["kappa"])
        if t == "power_law":
            return PowerLawKernel(d["C"], d["gamma"])
        return TabulatedKernel(tuple(d["grid"]), tuple(d["values"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad kernel spec: {exc}") from exc


def baseline_from_dict(d) -> BaselineIntensity:
    t = _tag(d, _BASELINE_TAGS, "baseline")
    try:
        if t == "constant":
            return ConstantBaseline(d["mu"])
        if t == "piecewise_constant":
            return PiecewiseConstantBaseline(tuple(d["breakpoints"]), tuple(d["levels"]))
        return AugmentedBaseline(
            baseline_from_dict(d["base"]), d["shift_mass"], kernel_from_dict(d["kernel"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad baseline spec: {exc}") from exc


def marks_from_dict(d) -> MarkDistribution:
    t = _tag(d, _MARK_TAGS, "marks")
    try:
        if t == "constant":
            return ConstantMark(d["a"])
        if t == "exponential":
            return ExponentialMark(d["mean"])
        if t == "hyper_exponential":
            return HyperExponentialMark(tuple(d["weights"]), tuple(d["rates"]))
        return LatticeMark(d["delta"], tuple(d["probs"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad marks spec: {exc}") from exc


def model_from_dict(d) -> HawkesModel:
    if not isinstance(d, dict):
        raise ConfigError("model spec must be an object")
    for key in ("baseline", "kernel", "marks"):
        if key not in d:
            raise ConfigError(f"model spec missing {key!r}")
    return HawkesModel(
        baseline_from_dict(d["baseline"]),
        kernel_from_dict(d["kernel"]),
        marks_from_dict(d["marks"]),
    )


def kernel_to_dict(k) -> dict:
    if isinstance(k, ExponentialKernel):
        return {"type": "exponential", "delta": k.delta, "kappa": k.kappa}
    if isinstance(k, PowerLawKernel):
        return {"type": "power_law", "C": k.C, "gamma": k.gamma}
    return {"type": "tabulated", "grid": list(k.grid), "values": list(k.values)}


def baseline_to_dict(b) -> dict:
    if isinstance(b, ConstantBaseline):
        return {"type": "constant", "mu": b.mu}
    if isinstance(b, PiecewiseConstantBaseline):
        return {
            "type": "piecewise_constant",
            "breakpoints": list(b.breakpoints),
            "levels": list(b.levels),
        }
    return {
        "type": "augmented",
        "base": baseline_to_dict(b.base),
        "shift_mass": b.shift_mass,
        "kernel": kernel_to_dict(b.kernel),
    }


def marks_to_dict(m) -> dict:
    if isinstance(m, ConstantMark):
        return {"type": "constant", "a": m.a}
    if isinstance(m, ExponentialMark):
        return {"type": "exponential", "mean": m.mean_value}
    if isinstance(m, HyperExponentialMark):
        return {"type": "hyper_exponential", "weights": list(m.weights), "rates": list(m.rates)}
    return {"type": "lattice", "delta": m.delta, "probs": list(m.probs)}


def model_to_dict(model: HawkesModel) -> dict:
    return {
        "baseline": baseline_to_dict(model.baseline),
        "kernel": kernel_to_dict(model.kernel),
        "marks": marks_to_dict(model.marks),
    }
