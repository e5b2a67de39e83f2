"""Execution metrics for a resting midpoint order matched by a marked Hawkes flow.

Covers fill-time distributions, expected fill rates, conditional re-fill
quantities given an observed first fill, the non-empty-pool extensions with a
random initial liquidity size, and the compound-Poisson closed forms used as
sanity anchors.

Implementation note: for a baseline augmented by an initial fill of size u the
volume-transform exponent is  base_part + u * kernel_part,  so sweeps over u
reuse one set of collocation solves and only recombine the two outer integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    DEFAULT_INVERSION,
    TransformCache,
    euler_cdf_value,
    inversion_contour,
    lattice_volume_pmf_numeric,
    volume_cdf,
)
from .errors import ConditioningImpossibleError, TruncationError
from .model import ConstantMark, ExponentialMark, HyperExponentialMark
from .quadrature import WeightedMeshIntegral, panel_nodes
from .volterra import Mesh, default_mesh

_EPS = 1e-12


# ---------------------------------------------------------------------------
# Elementary fill-time quantities
# ---------------------------------------------------------------------------


def time_to_first_fill_cdf(model, t) -> float:
    """P(first execution by t) = 1 - exp(-int_0^t mu); set by the baseline alone."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return -math.expm1(-float(model.baseline.integral(t)))


def _lattice_below_index(x, delta):
    """Index of the largest lattice point strictly below x."""
    return int(math.ceil(x / delta - 1e-9)) - 1


def prob_volume_below(model, t, x, mesh=None, config=DEFAULT_INVERSION, cache=None) -> float:
    """P(L_t < x); lattice atoms are resolved by evaluating between atoms."""
    if x <= 0:
        return 0.0
    if t <= 0:
        return 1.0
    delta = model.volume_lattice_delta
    if delta is None:
        return volume_cdf(model, t, x, mesh, config, cache)
    kstar = _lattice_below_index(x, delta)
    if kstar < 0:
        return 1.0
    if kstar == 0:
        return math.exp(-float(model.baseline.integral(t)))
    return volume_cdf(model, t, (kstar + 0.5) * delta, mesh, config, cache)


def time_to_complete_fill_cdf(model, x, t, mesh=None, config=DEFAULT_INVERSION, cache=None) -> float:
    """P(order of size x fully executed by t) = P(L_t >= x)."""
    if x <= 0:
        raise ValueError("x must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    return 1.0 - prob_volume_below(model, t, x, mesh, config, cache)


def expected_time_to_complete_fill(
    model,
    x,
    mesh=None,
    config=DEFAULT_INVERSION,
    cache=None,
    *,
    grid_dt=0.05,
    tail_tol=1e-4,
    horizon_cap=1024.0,
) -> float:
    """E[time to full execution] = int_0^inf P(L_t < x) dt.

    The horizon doubles until the integrand falls below tail_tol, the bulk is a
    composite trapezoid on a grid_dt grid, and a single-exponential fit over the
    last half of the horizon supplies the remaining tail mass.
    """
    if x <= 0:
        raise ValueError("x must be > 0")
    cache = cache or TransformCache()
    if mesh is not None:
        horizon = mesh.horizon
        per_unit = mesh.n / mesh.horizon
    else:
        horizon = 8.0
        per_unit = 25.0
    while True:
        work_mesh = Mesh(horizon, max(150, int(math.ceil(per_unit * horizon))))
        tail_val = prob_volume_below(model, horizon, x, work_mesh, config, cache)
        if tail_val < tail_tol:
            break
        horizon *= 2.0
        if horizon > horizon_cap:
            raise TruncationError(
                f"P(L_t < x) still {tail_val:.2e} at t = {horizon / 2:.0f}; "
                "integrand does not decay below tolerance"
            )

    m = int(math.ceil(horizon / grid_dt))
    ts = np.linspace(0.0, horizon, m + 1)
    g = np.empty(m + 1)
    g[0] = 1.0
    for i in range(1, m + 1):
        g[i] = prob_volume_below(model, ts[i], x, work_mesh, config, cache)
    dt = ts[1] - ts[0]
    bulk = dt * (g.sum() - 0.5 * (g[0] + g[-1]))

    sel = (ts >= 0.5 * horizon) & (g > 0.0)
    tail = 0.0
    if sel.sum() >= 2 and g[-1] > 0.0:
        slope = np.polyfit(ts[sel], np.log(g[sel]), 1)[0]
        if slope < -_EPS:
            tail = g[-1] / (-slope)
    return float(bulk + tail)


# ---------------------------------------------------------------------------
# Threshold batches (shared by fill-rate and non-empty-pool quadratures)
# ---------------------------------------------------------------------------


def _cdf_batch(model, t, xs, mesh, config, cache):
    """P(L_t <= x_j) for an array of positive thresholds, with batched solves."""
    xs = np.asarray(xs, dtype=float)
    delta = model.volume_lattice_delta
    if delta is not None:
        jmax = int(np.floor(xs.max() / delta + 1e-9))
        pmf = lattice_volume_pmf_numeric(model, t, jmax, mesh, cache)
        cum = np.minimum(np.cumsum(pmf), 1.0)
        return cum[np.floor(xs / delta + 1e-9).astype(int)]
    n_terms = config.truncation_terms + 1
    thetas = np.concatenate([inversion_contour(x, config) for x in xs])
    from .distributions import volume_transform_grid

    vals = volume_transform_grid(model, thetas, t, mesh, cache)
    return np.array(
        [
            euler_cdf_value(vals[j * n_terms : (j + 1) * n_terms], xs[j], config)
            for j in range(len(xs))
        ]
    )


def _prob_below_batch(model, t, xs, mesh, config, cache):
    """P(L_t < x_j): strict version of :func:`_cdf_batch` (lattice-midpoint aware)."""
    xs = np.asarray(xs, dtype=float)
    delta = model.volume_lattice_delta
    if delta is None:
        return _cdf_batch(model, t, xs, mesh, config, cache)
    kstars = np.array([_lattice_below_index(x, delta) for x in xs])
    jmax = max(0, int(kstars.max()))
    pmf = lattice_volume_pmf_numeric(model, t, jmax, mesh, cache)
    cum = np.minimum(np.cumsum(pmf), 1.0)
    return cum[np.clip(kstars, 0, jmax)]


def _lattice_survival_integral(cum, delta, c):
    """int_0^c P(L > v) dv for a lattice law with cumulative masses `cum` at k*delta."""
    if c <= 0:
        return 0.0
    full = int(math.floor(c / delta + 1e-9))
    ks = np.arange(full + 1)
    seg = np.minimum((ks + 1) * delta, c) - ks * delta
    surv = 1.0 - cum[np.clip(ks, 0, len(cum) - 1)]  # P(L > k delta) = 1 - cum_k
    return float((seg * surv).sum())


def expected_fill_rate(
    model, x, t, mesh=None, config=DEFAULT_INVERSION, cache=None, *, panels=200
) -> float:
    """E[min(L_t, x)] / x = (1/x) int_0^x P(L_t > y) dy."""
    if x <= 0:
        raise ValueError("x must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 0.0
    mesh = mesh or default_mesh(t)
    cache = cache or TransformCache()
    delta = model.volume_lattice_delta
    if delta is not None:
        # survival is a step function between atoms: sum segments exactly
        kmax = _lattice_below_index(x, delta)
        pmf = lattice_volume_pmf_numeric(model, t, max(kmax, 0), mesh, cache)
        cum = np.minimum(np.cumsum(pmf), 1.0)
        return _lattice_survival_integral(cum, delta, x) / x
    ys = np.linspace(0.0, x, panels + 1)
    integrand = np.empty(panels + 1)
    integrand[0] = -math.expm1(-float(model.baseline.integral(t)))
    integrand[1:] = 1.0 - _cdf_batch(model, t, ys[1:], mesh, config, cache)
    dy = ys[1] - ys[0]
    return float(dy * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))) / x


# ---------------------------------------------------------------------------
# Conditional metrics given one observed fill
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditioningEvent:
    """Observed history: exactly one fill of size l1 in (0, t]."""

    t: float
    l1: float

    def __post_init__(self):
        if self.t <= 0 or self.l1 <= 0:
            raise ValueError("conditioning event needs t > 0 and l1 > 0")


def _first_fill_weights(model, event, n_nodes=64):
    """Quadrature nodes for the first-fill time plus the (unnormalized) density mass."""
    t, l1 = event.t, event.l1
    breaks = [b for b in model.baseline.breakpoints if 0.0 < b < t]
    taus, w = panel_nodes(0.0, t, breaks, n_nodes)
    mu_tau = np.asarray(model.baseline(taus), dtype=float)
    damp = np.exp(-l1 * np.asarray(model.kernel.integral(t - taus), dtype=float))
    eff = w * mu_tau * damp
    total = float(eff.sum())
    if total <= 0.0:
        raise ConditioningImpossibleError(
            "baseline carries no mass on (0, t]; cannot condition on a first fill"
        )
    return taus, eff, total


def cond_prob_k_fills(model, event: ConditioningEvent, T, k, *, n_nodes=64) -> float:
    """P(exactly k more fills in (t, t+T] | one fill of size l1 by t), k in {0, 1}."""
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    if T <= 0:
        raise ValueError("T must be > 0")
    t, l1 = event.t, event.l1
    base, kern, marks = model.baseline, model.kernel, model.marks
    taus, eff, denom = _first_fill_weights(model, event, n_nodes)
    decay = math.exp(-float(base.integral(t + T) - base.integral(t)))
    Hfar = np.asarray(kern.integral(t + T - taus), dtype=float)
    Hnear = np.asarray(kern.integral(t - taus), dtype=float)
    kernel_gap = np.exp(-l1 * (Hfar - Hnear))  # e^{-l1 H(t+T-tau)} / e^{-l1 H(t-tau)}
    if k == 0:
        return float(decay * (eff * kernel_gap).sum() / denom)

    breaks = [b for b in base.breakpoints if t < b < t + T]
    s_nodes, s_w = panel_nodes(t, t + T, breaks, n_nodes)
    g = np.asarray(marks.exp_weighted_moment(0, kern.integral(T + t - s_nodes)), dtype=float)
    lam = np.asarray(base(s_nodes), dtype=float)[None, :] + l1 * np.asarray(
        kern(s_nodes[None, :] - taus[:, None]), dtype=float
    )
    inner = lam @ (s_w * g)
    return float(decay * (eff * kernel_gap * inner).sum() / denom)


def _conditional_volume_transform(model, event, T, thetas, mesh, cache):
    """E[exp(-theta (L_{t+T} - L_t)) | event] for a batch of thetas."""
    t, l1 = event.t, event.l1
    taus, eff, denom = _first_fill_weights(model, event)
    base, kern = model.baseline, model.kernel
    F = cache.volume_values(model, np.asarray(thetas, dtype=complex), mesh)
    shifted_breaks = [b - t for b in base.breakpoints if t < b < t + T]

    def mu_shift(v):
        return base(t + np.asarray(v))

    weights = [mu_shift] + [
        (lambda v, off=t - tau: kern(off + np.asarray(v))) for tau in taus
    ]
    quad = WeightedMeshIntegral(mesh, T, weights, shifted_breaks)
    parts = quad.apply(F - 1.0)  # (B, 1 + n_tau)
    expo = parts[:, :1] + l1 * parts[:, 1:]
    return np.exp(expo) @ eff / denom


def cond_expected_fill_size(
    model,
    event: ConditioningEvent,
    T,
    x,
    mesh=None,
    config=DEFAULT_INVERSION,
    cache=None,
    *,
    panels=200,
) -> float:
    """E[min(L_{t+T} - L_t, x - l1) | event]: expected further executed volume."""
    if x <= event.l1:
        raise ValueError("order size x must exceed the observed fill l1")
    if T < 0:
        raise ValueError("T must be >= 0")
    if T == 0:
        return 0.0
    cap = x - event.l1
    mesh = mesh or default_mesh(T)
    cache = cache or TransformCache()
    delta = model.volume_lattice_delta
    if delta is not None:
        jmax = max(_lattice_below_index(cap, delta), 0)
        n_pts = max(64, 4 * (jmax + 1))
        n_pts = 1 << (n_pts - 1).bit_length()
        r = 1e-10 ** (1.0 / n_pts)
        ms = np.arange(n_pts // 2 + 1)
        thetas = -np.log(r) - 2j * np.pi * ms / n_pts
        half = _conditional_volume_transform(model, event, T, thetas, mesh, cache)
        phi = np.empty(n_pts, dtype=complex)
        phi[: n_pts // 2 + 1] = half
        phi[n_pts // 2 + 1 :] = np.conj(half[1 : n_pts // 2][::-1])
        pmf = np.clip(np.fft.fft(phi).real[: jmax + 1] / n_pts / r ** np.arange(jmax + 1), 0.0, 1.0)
        cum = np.minimum(np.cumsum(pmf), 1.0)
        return _lattice_survival_integral(cum, delta, cap)
    zs = np.linspace(0.0, cap, panels + 1)
    n_terms = config.truncation_terms + 1
    thetas = np.concatenate([inversion_contour(z, config) for z in zs[1:]])
    vals = _conditional_volume_transform(model, event, T, thetas, mesh, cache)
    integrand = np.empty(panels + 1)
    integrand[0] = 1.0 - cond_prob_k_fills(model, event, T, 0)
    integrand[1:] = [
        1.0 - euler_cdf_value(vals[j * n_terms : (j + 1) * n_terms], zs[j + 1], config)
        for j in range(panels)
    ]
    dz = zs[1] - zs[0]
    return float(dz * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1])))


# ---------------------------------------------------------------------------
# Non-empty pools: random initial liquidity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeibullSide:
    """One side of the liquidity law: weight * Weibull(shape, scale 1) density."""

    weight: float
    shape: float

    def __post_init__(self):
        if self.weight < 0 or self.shape <= 0:
            raise ValueError("side needs weight >= 0 and shape > 0")

    def density(self, y):
        y = np.asarray(y, dtype=float)
        return self.weight * self.shape * y ** (self.shape - 1.0) * np.exp(-(y**self.shape))

    def tail_beyond(self, y):
        """Mass of this side with |Y| > y."""
        return self.weight * math.exp(-(float(y) ** self.shape))

    def support_bound(self, eps=1e-8):
        return (-math.log(eps)) ** (1.0 / self.shape)

    def nodes(self, n, upper=None):
        if self.weight == 0.0:
            return np.empty(0), np.empty(0)
        hi = self.support_bound() if upper is None else min(upper, self.support_bound())
        ys, w = panel_nodes(0.0, hi, [], n)
        return ys, w * self.density(ys)


@dataclass(frozen=True)
class TabulatedSide:
    """One side of the liquidity law from a tabulated density on an ascending grid."""

    grid: tuple
    values: tuple

    def __post_init__(self):
        grid = tuple(float(g) for g in self.grid)
        values = tuple(float(v) for v in self.values)
        if len(grid) != len(values) or len(grid) < 2 or any(v < 0 for v in values):
            raise ValueError("need matching grid/values with nonnegative density")
        if grid[0] != 0.0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly ascending from 0")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def weight(self):
        g, v = np.asarray(self.grid), np.asarray(self.values)
        return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(g)))

    def density(self, y):
        return np.interp(y, self.grid, self.values, right=0.0)

    def tail_beyond(self, y):
        g, v = np.asarray(self.grid), np.asarray(self.values)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(g))])
        return self.weight - float(np.interp(y, g, cum))

    def support_bound(self, eps=1e-8):
        return self.grid[-1]

    def nodes(self, n, upper=None):
        if self.weight == 0.0:
            return np.empty(0), np.empty(0)
        hi = self.grid[-1] if upper is None else min(upper, self.grid[-1])
        ys, w = panel_nodes(0.0, hi, [g for g in self.grid if 0 < g < hi], max(4, n // 4))
        return ys, w * self.density(ys)


@dataclass(frozen=True)
class LiquidityDistribution:
    """Initial pool liquidity Y: mass at zero plus signed-density sides.

    negative_side describes |Y| for Y < 0 (resting contra-side volume executed
    immediately); positive_side describes Y > 0 (same-side volume queued ahead).
    """

    mass_at_zero: float
    negative_side: WeibullSide | TabulatedSide
    positive_side: WeibullSide | TabulatedSide

    def __post_init__(self):
        total = self.mass_at_zero + self.negative_side.weight + self.positive_side.weight
        if not 0.0 <= self.mass_at_zero <= 1.0 or abs(total - 1.0) > 1e-9:
            raise ValueError("liquidity masses must be in [0,1] and sum to 1")

    @classmethod
    def two_sided_weibull(cls, mass_at_zero, shape):
        w = 0.5 * (1.0 - mass_at_zero)
        return cls(mass_at_zero, WeibullSide(w, shape), WeibullSide(w, shape))


@dataclass
class FirstFillSplit:
    p_immediate: float
    survival: float


def nonempty_first_fill(
    model, liquidity: LiquidityDistribution, t, mesh=None, config=DEFAULT_INVERSION, cache=None,
    *, n_nodes=80,
) -> FirstFillSplit:
    """P(immediate execution at 0) and P(no execution by t) in a non-empty pool."""
    if t < 0:
        raise ValueError("t must be >= 0")
    p_imm = liquidity.negative_side.weight
    if t == 0:
        return FirstFillSplit(p_imm, liquidity.mass_at_zero + liquidity.positive_side.weight)
    mesh = mesh or default_mesh(t)
    cache = cache or TransformCache()
    surv = liquidity.mass_at_zero * math.exp(-float(model.baseline.integral(t)))
    ys, wq = liquidity.positive_side.nodes(n_nodes)
    if len(ys):
        surv += float(wq @ _cdf_batch(model, t, ys, mesh, config, cache))
    return FirstFillSplit(p_imm, surv)


def _augmented_prob_below(model, t, us, thresholds, mesh, config, cache):
    """P(L^{(u)}_t < c_u) for paired arrays of augment masses and thresholds.

    L^{(u)} is the volume process with baseline mu(s) + u h(s).  All u share the
    base model's collocation solves via the exponent decomposition.
    """
    us = np.asarray(us, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    delta = model.volume_lattice_delta

    def exponent_pair(thetas):
        F = cache.volume_values(model, thetas, mesh)
        quad = WeightedMeshIntegral(
            mesh, t, [model.baseline, model.kernel], model.baseline.breakpoints
        )
        parts = quad.apply(F - 1.0)
        return parts[:, 0], parts[:, 1]

    if delta is not None:
        kstars = np.array([_lattice_below_index(c, delta) for c in thresholds])
        jmax = max(0, int(kstars.max()))
        n_pts = 1 << (max(64, 4 * (jmax + 1)) - 1).bit_length()
        r = 1e-10 ** (1.0 / n_pts)
        ms = np.arange(n_pts // 2 + 1)
        thetas = -np.log(r) - 2j * np.pi * ms / n_pts
        base_ex, kern_ex = exponent_pair(thetas)
        out = np.empty(len(us))
        rj = r ** np.arange(jmax + 1)
        for i, (u, kstar) in enumerate(zip(us, kstars)):
            if kstar < 0:
                out[i] = math.exp(-float(model.baseline.integral(t)) - u * float(model.kernel.integral(t)))
                continue
            half = np.exp(base_ex + u * kern_ex)
            phi = np.empty(n_pts, dtype=complex)
            phi[: n_pts // 2 + 1] = half
            phi[n_pts // 2 + 1 :] = np.conj(half[1 : n_pts // 2][::-1])
            pmf = np.clip(np.fft.fft(phi).real[: jmax + 1] / n_pts / rj, 0.0, 1.0)
            out[i] = min(1.0, float(pmf[: kstar + 1].sum()))
        return out

    n_terms = config.truncation_terms + 1
    thetas = np.concatenate([inversion_contour(c, config) for c in thresholds])
    base_ex, kern_ex = exponent_pair(thetas)
    out = np.empty(len(us))
    for i, u in enumerate(us):
        sl = slice(i * n_terms, (i + 1) * n_terms)
        vals = np.exp(base_ex[sl] + u * kern_ex[sl])
        out[i] = euler_cdf_value(vals, thresholds[i], config)
    return out


def nonempty_complete_fill_cdf(
    model, liquidity: LiquidityDistribution, x, t,
    mesh=None, config=DEFAULT_INVERSION, cache=None, *, n_nodes=48,
) -> float:
    """P(order of size x fully executed by t) with random initial liquidity."""
    if x <= 0:
        raise ValueError("x must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return liquidity.negative_side.tail_beyond(x)
    mesh = mesh or default_mesh(t)
    cache = cache or TransformCache()
    surv = liquidity.mass_at_zero * prob_volume_below(model, t, x, mesh, config, cache)
    ys, wq = liquidity.positive_side.nodes(n_nodes)
    if len(ys):
        surv += float(wq @ _prob_below_batch(model, t, x + ys, mesh, config, cache))
    us, wu = liquidity.negative_side.nodes(n_nodes, upper=x)
    if len(us):
        surv += float(wu @ _augmented_prob_below(model, t, us, x - us, mesh, config, cache))
    return 1.0 - surv


def nonempty_expected_fill_rate(
    model, liquidity: LiquidityDistribution, x, t,
    mesh=None, config=DEFAULT_INVERSION, cache=None, *, panels=200, n_nodes=32,
) -> float:
    """E[min((L_t - Y)^+, x)] / x with random initial liquidity Y."""
    if x <= 0:
        raise ValueError("x must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    neg, pos = liquidity.negative_side, liquidity.positive_side
    if t == 0:
        zs, w = panel_nodes(0.0, x, [], 64)
        return float(w @ np.array([neg.tail_beyond(z) for z in zs])) / x

    mesh = mesh or default_mesh(t)
    cache = cache or TransformCache()
    delta = model.volume_lattice_delta
    total = neg.tail_beyond(x)  # |Y| >= x executes everything at time zero

    # survival of the unmodified volume on a grid reaching the positive side's support
    upper = x + (pos.support_bound() if pos.weight > 0 else 0.0)
    m = max(panels, int(math.ceil(panels * upper / x)))
    grid = np.linspace(0.0, upper, m + 1)
    if delta is not None:
        jmax = max(_lattice_below_index(upper, delta), 0)
        pmf = lattice_volume_pmf_numeric(model, t, jmax, mesh, cache)
        cum = np.minimum(np.cumsum(pmf), 1.0)
        W = np.array([_lattice_survival_integral(cum, delta, c) for c in grid])
    else:
        surv = np.empty(m + 1)
        surv[0] = -math.expm1(-float(model.baseline.integral(t)))
        surv[1:] = 1.0 - _cdf_batch(model, t, grid[1:], mesh, config, cache)
        dz = grid[1] - grid[0]
        W = np.concatenate([[0.0], np.cumsum(dz * 0.5 * (surv[1:] + surv[:-1]))])

    def W_at(c):
        return float(np.interp(c, grid, W))

    total += liquidity.mass_at_zero * W_at(x) / x
    ys, wq = pos.nodes(n_nodes)
    if len(ys):
        total += float(wq @ np.array([(W_at(x + y) - W_at(y)) / x for y in ys]))

    us, wu = neg.nodes(n_nodes, upper=x)
    if len(us):
        if delta is not None:
            vals = np.empty(len(us))
            jm = max(_lattice_below_index(x, delta), 0)
            n_pts = 1 << (max(64, 4 * (jm + 1)) - 1).bit_length()
            r = 1e-10 ** (1.0 / n_pts)
            ms = np.arange(n_pts // 2 + 1)
            thetas = -np.log(r) - 2j * np.pi * ms / n_pts
            F = cache.volume_values(model, thetas, mesh)
            quad = WeightedMeshIntegral(
                mesh, t, [model.baseline, model.kernel], model.baseline.breakpoints
            )
            parts = quad.apply(F - 1.0)
            rj = r ** np.arange(jm + 1)
            for i, u in enumerate(us):
                half = np.exp(parts[:, 0] + u * parts[:, 1])
                phi = np.empty(n_pts, dtype=complex)
                phi[: n_pts // 2 + 1] = half
                phi[n_pts // 2 + 1 :] = np.conj(half[1 : n_pts // 2][::-1])
                pmf_u = np.clip(np.fft.fft(phi).real[: jm + 1] / n_pts / rj, 0.0, 1.0)
                cum_u = np.minimum(np.cumsum(pmf_u), 1.0)
                vals[i] = (u + _lattice_survival_integral(cum_u, delta, x - u)) / x
            total += float(wu @ vals)
        else:
            zgrid = np.linspace(0.0, x, panels + 1)
            n_terms = config.truncation_terms + 1
            thetas = np.concatenate([inversion_contour(z, config) for z in zgrid[1:]])
            F = cache.volume_values(model, thetas, mesh)
            quad = WeightedMeshIntegral(
                mesh, t, [model.baseline, model.kernel], model.baseline.breakpoints
            )
            parts = quad.apply(F - 1.0)
            base_int = float(model.baseline.integral(t))
            kern_int = float(model.kernel.integral(t))
            dz = zgrid[1] - zgrid[0]
            vals = np.empty(len(us))
            for i, u in enumerate(us):
                surv_u = np.empty(panels + 1)
                surv_u[0] = -math.expm1(-(base_int + u * kern_int))
                for j in range(panels):
                    sl = slice(j * n_terms, (j + 1) * n_terms)
                    tvals = np.exp(parts[sl, 0] + u * parts[sl, 1])
                    surv_u[j + 1] = 1.0 - euler_cdf_value(tvals, zgrid[j + 1], config)
                cumW = np.concatenate([[0.0], np.cumsum(dz * 0.5 * (surv_u[1:] + surv_u[:-1]))])
                c = x - u
                vals[i] = (u + float(np.interp(c, zgrid, cumW))) / x
            total += float(wu @ vals)
    return float(min(1.0, total))


# ---------------------------------------------------------------------------
# Compound-Poisson closed forms (h == 0 anchors)
# ---------------------------------------------------------------------------


@dataclass
class FillTimeResult:
    """Expected complete-fill time, possibly only a certified lower bound."""

    value: float
    is_lower_bound: bool


def compound_poisson_expected_fill_time(marks, mu_const, x) -> FillTimeResult:
    """E[first time cumulative arriving volume reaches x] for h == 0, constant rate.

    Exact for constant marks (ceil(x/a) arrivals) and exponential marks
    (memoryless overshoot); hyper-exponential overshoot strictly exceeds the
    mean, so only the Wald lower bound is certified.  Other variants get the
    generic Wald bound.
    """
    if mu_const <= 0 or x <= 0:
        raise ValueError("need mu_const > 0 and x > 0")
    if isinstance(marks, ConstantMark):
        return FillTimeResult(math.ceil(x / marks.a - 1e-12) / mu_const, False)
    if isinstance(marks, ExponentialMark):
        m = marks.mean_value
        return FillTimeResult((x + m) / (m * mu_const), False)
    if isinstance(marks, HyperExponentialMark):
        m = marks.mean()
        return FillTimeResult((x + m) / (m * mu_const), True)
    return FillTimeResult(x / (marks.mean() * mu_const), True)
