"""Exponential time differencing for the stabilized Allen-Cahn system

    dU_i/dt + L_h U_i = N(U_i),   L_h = -2 eps D_h + S,
    N(U_i) = S U_i - w(U_i)/eps - f_i(U, C).

All ``n`` phase fields advance together; within a step every force uses the
fields from the start of that step (Jacobi coupling).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model
from .spectral import SpectralPlan, dct2_forward, dct2_inverse

SCHEMES = ("etd1", "etdrk2")
MBP_SLACK = 1e-12


class NonFiniteError(FloatingPointError):
    """A non-finite value appeared in the phase fields."""


def make_plan(shape, params: model.ModelParams, n_channels: int) -> SpectralPlan:
    return SpectralPlan(tuple(shape), params.h, params.effective_S(n_channels),
                        params.epsilon, params.dt)


def nonlinear_term(i: int, U, C, image, params: model.ModelParams, S: float) -> np.ndarray:
    """N(U_i) = S U_i - w(U_i)/eps - f_i with the other fields frozen."""
    U = np.asarray(U, dtype=float)
    f = model.force(i, U, C, image, params.lam, params.eps1)
    return S * U[i] - model.double_well_deriv(U[i]) / params.epsilon - f


def nonlinear_stack(U, C, image, params: model.ModelParams, S: float, residuals=None) -> np.ndarray:
    """N for every field at once; pass ``residuals`` to reuse them across steps."""
    U = np.asarray(U, dtype=float)
    if residuals is None:
        f = model.forces(U, C, image, params.lam, params.eps1)
    else:
        f = model.force_stack(U, residuals, params.lam, params.eps1)
    return S * U - model.double_well_deriv(U) / params.epsilon - f


def etd1_update(plan: SpectralPlan, U, NU) -> np.ndarray:
    """phi_0(dt L) U + dt phi_1(dt L) N."""
    m0, m1, _ = plan.multipliers
    return dct2_inverse(m0 * dct2_forward(U) + plan.dt * m1 * dct2_forward(NU))


def etd_step(U, nonlinear, plan: SpectralPlan, scheme: str = "etdrk2") -> np.ndarray:
    """One step for a generic nonlinearity ``nonlinear(U) -> array like U``.

    The ETDRK2 corrector is ``U_hat + dt phi_2(dt L)(N(U_hat) - N(U))``,
    which keeps steady states of the semi-discrete system fixed.
    """
    U = np.asarray(U, dtype=float)
    plan.check(U)
    NU = nonlinear(U)
    U_hat = etd1_update(plan, U, NU)
    if scheme == "etd1":
        return U_hat
    if scheme != "etdrk2":
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    m2 = plan.multipliers[2]
    return U_hat + dct2_inverse(plan.dt * m2 * dct2_forward(nonlinear(U_hat) - NU))


def etd1_step(U, C, image, plan: SpectralPlan, params: model.ModelParams) -> np.ndarray:
    return etd_step(U, lambda V: nonlinear_stack(V, C, image, params, plan.S), plan, "etd1")


def etdrk2_step(U, C, image, plan: SpectralPlan, params: model.ModelParams) -> np.ndarray:
    return etd_step(U, lambda V: nonlinear_stack(V, C, image, params, plan.S), plan, "etdrk2")


@dataclass
class SolveReport:
    """Diagnostics of one steady-state solve.

    ``mins``/``maxs`` have shape ``(iterations + 1, n)``; row 0 is the input.
    ``mbp_violations`` counts steps with any value outside [0, 1] beyond
    ``MBP_SLACK``.
    """

    iterations: int = 0
    converged: bool = False
    final_change: float = np.inf
    S: float = 0.0
    mins: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    maxs: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    mbp_violations: int = 0
    energies: list = field(default_factory=list)


def solve_to_steady(U0, C, image, params: model.ModelParams, scheme: str = "etdrk2",
                    plan: SpectralPlan | None = None, track_energy: bool = False):
    """Iterate the chosen scheme until ``max_i ||U^{k+1}_i - U^k_i||_inf <= tol_steady``
    or ``max_inner`` steps.  Returns ``(U, SolveReport)``."""
    U = np.array(U0, dtype=float, copy=True)
    image = np.asarray(image, dtype=float)
    if plan is None:
        plan = make_plan(image.shape[:2], params, image.shape[2])
    if not np.all(np.isfinite(U)):
        raise NonFiniteError("initial phase fields contain non-finite values")

    mins, maxs = [U.min(axis=(1, 2))], [U.max(axis=(1, 2))]
    report = SolveReport(S=plan.S)
    if track_energy:
        report.energies.append(model.discrete_energy(U, C, image, params))

    residuals = model.squared_residuals(np.asarray(C, dtype=float), image)

    def nonlinear(V):
        return nonlinear_stack(V, C, image, params, plan.S, residuals)

    for k in range(1, params.max_inner + 1):
        U_new = etd_step(U, nonlinear, plan, scheme)
        if not np.all(np.isfinite(U_new)):
            bad = [int(x) for x in np.argwhere(~np.isfinite(U_new))[0]]
            raise NonFiniteError(
                f"non-finite value at field {bad[0]}, pixel {tuple(bad[1:])} after {k} "
                f"{scheme} steps (dt={params.dt}, S={plan.S})")
        change = float(np.abs(U_new - U).max())
        U = U_new
        lo, hi = U.min(axis=(1, 2)), U.max(axis=(1, 2))
        mins.append(lo)
        maxs.append(hi)
        if lo.min() < -MBP_SLACK or hi.max() > 1 + MBP_SLACK:
            report.mbp_violations += 1
        if track_energy:
            report.energies.append(model.discrete_energy(U, C, image, params))
        report.iterations = k
        report.final_change = change
        if change <= params.tol_steady:
            report.converged = True
            break
    report.mins = np.array(mins)
    report.maxs = np.array(maxs)
    return U, report
