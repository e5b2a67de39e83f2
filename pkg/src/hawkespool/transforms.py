"""Laplace transforms and moments of the trade count and filled volume.

The joint transform at horizon T is  exp(int_0^T mu(T-s) (F(s) - 1) ds)  with F
from the collocation solver.  Moments come from the linear renewal equations;
the exponential-kernel ODE route is kept as an independent cross-check oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ExponentialKernel, HawkesModel
from .quadrature import WeightedMeshIntegral
from .volterra import Mesh, default_mesh, solve_renewal, solve_transform_batch


def baseline_weighted_integral(baseline, values, mesh, t):
    """int_0^t mu(t-s) g(s) ds for g given by node values (batch on last axis OK)."""
    quad = WeightedMeshIntegral(mesh, t, baseline, baseline.breakpoints)
    return quad.apply(values)


def joint_laplace(model: HawkesModel, theta1, theta2, T, mesh: Mesh | None = None) -> complex:
    """E[exp(-theta1 * N_T - theta2 * L_T)] for Re(theta_i) >= 0."""
    if T <= 0:
        raise ValueError("T must be > 0")
    mesh = mesh or default_mesh(T)
    F = solve_transform_batch(model, complex(theta1), complex(theta2), mesh)
    expo = baseline_weighted_integral(model.baseline, F - 1.0, mesh, T)
    return complex(np.exp(expo[0]))


def laplace_count(model, theta, T, mesh=None) -> complex:
    """E[exp(-theta * N_T)]: the joint transform with the volume argument dropped."""
    return joint_laplace(model, theta, 0.0, T, mesh)


def laplace_volume(model, theta, T, mesh=None) -> complex:
    """E[exp(-theta * L_T)]: the joint transform with the count argument dropped."""
    return joint_laplace(model, 0.0, theta, T, mesh)


# ---------------------------------------------------------------------------
# Exponential-kernel ODE oracle
# ---------------------------------------------------------------------------


@dataclass
class OdeReference:
    """Fine-grid solution of the Markovian ODE system for an exponential kernel.

    a_path holds A at the sample times, a_integral the running int_0^t A.
    The transform functional F along the path is exp(-theta1)*mgf(delta*A - theta2).
    """

    times: np.ndarray
    a_path: np.ndarray
    a_integral: np.ndarray
    delta: float
    kappa: float
    theta1: complex
    theta2: complex

    def transform_values(self, marks):
        return np.exp(-self.theta1) * marks.mgf(self.delta * self.a_path - self.theta2)


def exponential_kernel_ode_reference(
    delta, kappa, marks, theta1, theta2, T, *, step=1e-4, samples=None
) -> OdeReference:
    """Integrate A' = -kappa A - 1 + mgf(delta A - theta2) e^{-theta1}, A(0)=0 by RK4."""
    th1 = complex(theta1)
    th2 = complex(theta2)
    if th1.real < 0 or th2.real < 0:
        raise ValueError("theta arguments must have nonnegative real part")
    if samples is None:
        samples = max(1, int(math.ceil(T / 0.01)))
    sample_t = np.linspace(0.0, T, samples + 1)
    sub = max(1, int(math.ceil((T / samples) / step)))
    hstep = (T / samples) / sub
    e1 = np.exp(-th1)

    def rhs(a):
        return -kappa * a - 1.0 + e1 * marks.mgf(delta * a - th2)

    a = 0.0 + 0.0j
    ia = 0.0 + 0.0j
    a_path = np.empty(samples + 1, dtype=complex)
    a_int = np.empty(samples + 1, dtype=complex)
    a_path[0] = a
    a_int[0] = ia
    for i in range(samples):
        for _ in range(sub):
            k1 = rhs(a)
            k2 = rhs(a + 0.5 * hstep * k1)
            k3 = rhs(a + 0.5 * hstep * k2)
            k4 = rhs(a + hstep * k3)
            ia += hstep / 6.0 * (a + 2 * (a + 0.5 * hstep * k1) + 2 * (a + 0.5 * hstep * k2) + (a + hstep * k3))
            a += hstep / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not (np.isfinite(a.real) and np.isfinite(a.imag)):
            raise RuntimeError("ODE stepping became unstable")
        a_path[i + 1] = a
        a_int[i + 1] = ia
    return OdeReference(sample_t, a_path, a_int, float(delta), float(kappa), th1, th2)


def exponential_kernel_ode_transform(
    delta, kappa, mu, lambda0, marks, theta1, theta2, T, *, step=1e-4
) -> complex:
    """Joint transform for h(t)=delta e^{-kappa t}, baseline mu + e^{-kappa t}(lambda0 - mu).

    Independent of the collocation route: uses the Markovian ODE representation
    exp(mu * kappa * int_0^T A dt + lambda0 * A(T)).  Requires lambda0 >= mu >= 0,
    outside which this representation is not established.
    """
    if not (lambda0 >= mu >= 0):
        raise ValueError("ODE reference requires lambda0 >= mu >= 0")
    ref = exponential_kernel_ode_reference(delta, kappa, marks, theta1, theta2, T, step=step)
    return complex(np.exp(mu * kappa * ref.a_integral[-1] + lambda0 * ref.a_path[-1]))


def ode_reference_baseline(mu, lambda0, kappa):
    """The baseline mu + e^{-kappa t}(lambda0 - mu) expressed with model primitives."""
    from .model import AugmentedBaseline, ConstantBaseline

    if lambda0 == mu:
        return ConstantBaseline(mu)
    return AugmentedBaseline(ConstantBaseline(mu), lambda0 - mu, ExponentialKernel(1.0, kappa))


# ---------------------------------------------------------------------------
# Moments via renewal equations
# ---------------------------------------------------------------------------


def count_response(model, mesh) -> np.ndarray:
    """psi_1 on the mesh: unit forcing, weight E[l]."""
    return solve_renewal(np.ones(mesh.n + 1), model.marks.mean(), model.kernel, mesh).values


def mean_count(model, T, mesh=None) -> float:
    """E[N_T]."""
    if T <= 0:
        raise ValueError("T must be > 0")
    mesh = mesh or default_mesh(T)
    psi1 = count_response(model, mesh)
    return float(baseline_weighted_integral(model.baseline, psi1, mesh, T))


def mean_volume(model, T, mesh=None) -> float:
    """E[L_T] = E[l] * E[N_T]."""
    return model.marks.mean() * mean_count(model, T, mesh)


def second_moment_count(model, T, mesh=None) -> float:
    """E[N_T^2]."""
    if T <= 0:
        raise ValueError("T must be > 0")
    mesh = mesh or default_mesh(T)
    psi1 = count_response(model, mesh)
    psi2 = solve_renewal(psi1**2, model.marks.mean(), model.kernel, mesh).values
    m1 = baseline_weighted_integral(model.baseline, psi1, mesh, T)
    return float(baseline_weighted_integral(model.baseline, psi2, mesh, T) + m1**2)


def second_moment_volume(model, T, mesh=None) -> float:
    """E[L_T^2]."""
    if T <= 0:
        raise ValueError("T must be > 0")
    mesh = mesh or default_mesh(T)
    marks = model.marks
    psi1 = count_response(model, mesh)
    psi3 = solve_renewal(marks.second_moment() * psi1**2, marks.mean(), model.kernel, mesh).values
    m1 = baseline_weighted_integral(model.baseline, psi1, mesh, T)
    return float(baseline_weighted_integral(model.baseline, psi3, mesh, T) + (marks.mean() * m1) ** 2)


def variance_count(model, T, mesh=None) -> float:
    mesh = mesh or default_mesh(T)
    return second_moment_count(model, T, mesh) - mean_count(model, T, mesh) ** 2
