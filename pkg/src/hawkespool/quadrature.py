"""Quadrature helpers for baseline-weighted integrals of mesh functions.

The recurring integral is  I(t) = int_0^t w(t - s) g(s) ds  where g is known
at uniform mesh nodes (piecewise linear between them) and w is a baseline or
kernel weight that may jump at known breakpoints.  Segments are split at mesh
nodes and at reflected breakpoints, then integrated with 2-point Gauss–Legendre
per segment, which is exact for a constant weight times a linear g.
"""

from __future__ import annotations

import numpy as np

_GL2_OFFSET = 1.0 / np.sqrt(3.0)


def panel_nodes(a, b, interior, n_nodes):
    """Gauss–Legendre nodes/weights on [a, b] split at the given interior points."""
    if b <= a:
        return np.empty(0), np.empty(0)
    edges = np.unique(np.concatenate([[a, b], np.asarray([p for p in interior if a < p < b])]))
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _segment_points(mesh, t):
    """2-point GL abscissae/weights on [0, t] split at mesh nodes, plus interp info."""
    if t < 0 or t > mesh.horizon * (1.0 + 1e-12):
        raise ValueError("integration endpoint outside the mesh horizon")
    t = min(t, mesh.horizon)
    dt = mesh.dt
    n_inside = int(np.floor(t / dt + 1e-12))
    edges = dt * np.arange(n_inside + 1)
    if t - edges[-1] > 1e-15 * max(1.0, t):
        edges = np.append(edges, t)
    else:
        edges[-1] = t
    return edges


class WeightedMeshIntegral:
    """Coefficients for int_0^t w(t-s) g(s) ds with g piecewise linear on the mesh.

    `weight_fn` may be a single callable or a sequence of callables sharing the
    partition; apply() then returns one integral per weight on the last axis.
    """

    def __init__(self, mesh, t, weight_fn, weight_breaks=()):
        edges = _segment_points(mesh, t)
        extra = [t - b for b in weight_breaks if 0.0 < t - b < t]
        if extra:
            edges = np.unique(np.concatenate([edges, extra]))
        self.t = t
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        x = np.concatenate([mid - half * _GL2_OFFSET, mid + half * _GL2_OFFSET])
        w = np.concatenate([half, half])
        self.points = x
        self._single = not isinstance(weight_fn, (list, tuple))
        fns = [weight_fn] if self._single else list(weight_fn)
        # coeff: (n_weights, n_points)
        self.coeff = np.stack([w * np.asarray(fn(t - x), dtype=float) for fn in fns])
        dt = mesh.dt
        idx = np.clip((x / dt).astype(int), 0, mesh.n - 1)
        self.idx = idx
        self.frac = x / dt - idx

    def apply(self, values):
        """Integrate node-value array(s); mesh nodes on the last axis of `values`.

        Returns shape values.shape[:-1] for a single weight, or
        values.shape[:-1] + (n_weights,) for a weight stack.
        """
        values = np.asarray(values)
        g = values[..., self.idx] * (1.0 - self.frac) + values[..., self.idx + 1] * self.frac
        out = g @ self.coeff.T
        return out[..., 0] if self._single else out
