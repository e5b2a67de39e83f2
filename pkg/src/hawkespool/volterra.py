"""Collocation solvers for the nonlinear transform equation and linear renewal equations.

Both solvers march forward on a uniform mesh with piecewise-linear collocation
and trapezoid convolution.  The nonlinear solver handles whole batches of
transform arguments at once: the inner fixed-point iteration is vectorized over
the batch, which is what makes Laplace-inversion sweeps affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MeshTooCoarseError, SolverDivergenceError
from .model import HawkesModel, kernel_is_zero

BOUND_TOL = 1e-8
DEFAULT_NODES_PER_UNIT = 25
DEFAULT_MIN_SUBINTERVALS = 150


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh on [0, horizon] with n subintervals."""

    horizon: float
    n: int

    def __post_init__(self):
        if self.horizon <= 0 or self.n < 2:
            raise ValueError("mesh needs horizon > 0 and n >= 2")

    @property
    def dt(self):
        return self.horizon / self.n

    @property
    def nodes(self):
        return np.linspace(0.0, self.horizon, self.n + 1)


def default_mesh(horizon, nodes_per_unit=DEFAULT_NODES_PER_UNIT):
    n = max(DEFAULT_MIN_SUBINTERVALS, int(math.ceil(nodes_per_unit * horizon)))
    return Mesh(float(horizon), n)


@dataclass
class TransformSolution:
    """Values of the fixed-point functional F on the mesh, for one (theta1, theta2)."""

    mesh: Mesh
    values: np.ndarray
    theta1: complex
    theta2: complex

    def __call__(self, t):
        nodes = self.mesh.nodes
        re = np.interp(t, nodes, self.values.real)
        im = np.interp(t, nodes, self.values.imag)
        return re + 1j * im


@dataclass
class RenewalSolution:
    mesh: Mesh
    values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.mesh.nodes, self.values)


def _check_theta(theta, name):
    theta = np.asarray(theta, dtype=complex)
    if np.any(theta.real < -1e-12):
        raise ValueError(f"{name} must have nonnegative real part")
    return theta


def solve_transform_batch(
    model: HawkesModel,
    theta1,
    theta2,
    mesh: Mesh,
    *,
    tol=1e-12,
    max_iter=200,
    initial=None,
):
    """Solve F(t) = exp(-theta1) * mgf(-theta2 + int_0^t h(s)(F(t-s)-1) ds) on the mesh.

    theta1/theta2 broadcast against each other; returns a complex array of
    shape (batch, n + 1).  Each node is solved by damped fixed-point iteration
    on the implicit trapezoid endpoint, warm-started from the previous node
    (or from `initial` when given, which the uniqueness tests exercise).
    """
    th1, th2 = np.broadcast_arrays(_check_theta(theta1, "theta1"), _check_theta(theta2, "theta2"))
    th1 = np.atleast_1d(th1).ravel()
    th2 = np.atleast_1d(th2).ravel()
    B = th1.shape[0]
    n = mesh.n
    dt = mesh.dt
    marks = model.marks

    e1 = np.exp(-th1)
    if kernel_is_zero(model.kernel):
        flat = e1 * marks.mgf(-th2)
        return np.tile(flat[:, None], (1, n + 1))

    h = np.asarray(model.kernel(mesh.nodes), dtype=float)
    F = np.empty((B, n + 1), dtype=complex)
    F[:, 0] = e1 * marks.mgf(-th2)
    G = np.empty_like(F)  # F - 1, kept separately for the convolution dot products
    G[:, 0] = F[:, 0] - 1.0
    a_impl = 0.5 * dt * h[0]

    for i in range(1, n + 1):
        hist = G[:, 1:i] @ h[1:i][::-1] + 0.5 * h[i] * G[:, 0]
        base = -th2 + dt * hist
        x = F[:, i - 1].copy() if initial is None else np.full(B, initial, dtype=complex)
        prev_r = np.full(B, np.inf)
        for _ in range(max_iter):
            y = e1 * marks.mgf(base + a_impl * (x - 1.0))
            r = np.abs(y - x)
            if np.all(r <= tol):
                x = y
                break
            # damp entries that started oscillating; plain iteration otherwise
            osc = r > prev_r
            x = np.where(osc, 0.5 * (y + x), y)
            prev_r = r
        else:
            raise SolverDivergenceError(i)
        F[:, i] = x
        G[:, i] = x - 1.0

    peak = np.abs(F).max()
    if peak > 1.0 + BOUND_TOL:
        raise SolverDivergenceError(
            int(np.abs(F).max(axis=0).argmax()),
            f"transform bound violated: max |F| = {peak}",
        )
    return F


def solve_transform_equation(
    model: HawkesModel, theta1, theta2, mesh: Mesh, *, tol=1e-12, max_iter=200, initial=None
) -> TransformSolution:
    """Single-argument wrapper around :func:`solve_transform_batch`."""
    values = solve_transform_batch(
        model, complex(theta1), complex(theta2), mesh, tol=tol, max_iter=max_iter, initial=initial
    )[0]
    return TransformSolution(mesh, values, complex(theta1), complex(theta2))


def solve_renewal(forcing, weight, kernel, mesh: Mesh) -> RenewalSolution:
    """Solve psi(t) = forcing(t) + weight * int_0^t h(t-s) psi(s) ds on the mesh.

    `forcing` is a callable on times or an array of node values.  The single
    implicit trapezoid term is eliminated algebraically at each node.
    """
    if weight < 0:
        raise ValueError("weight must be >= 0")
    nodes = mesh.nodes
    f = np.asarray(forcing(nodes) if callable(forcing) else forcing, dtype=float)
    if f.shape != nodes.shape:
        raise ValueError("forcing values must match the mesh nodes")
    if not np.all(np.isfinite(f)):
        raise ValueError("forcing must be finite on the mesh")

    n = mesh.n
    dt = mesh.dt
    h = np.asarray(kernel(nodes), dtype=float)
    diag = 1.0 - weight * 0.5 * dt * h[0]
    if diag <= 0.0:
        raise MeshTooCoarseError(
            f"implicit diagonal 1 - weight*h(0)*dt/2 = {diag} <= 0; refine the mesh"
        )

    psi = np.empty(n + 1)
    psi[0] = f[0]
    for i in range(1, n + 1):
        conv = psi[1:i] @ h[1:i][::-1] + 0.5 * h[i] * psi[0]
        psi[i] = (f[i] + weight * dt * conv) / diag
    return RenewalSolution(mesh, psi)
