"""Codepoint selection: KL projection of a cell onto the model family.

The optimal codepoint of a cell with summary (q, S) minimizes the KL
divergence of the normalized cell distribution from the family, which is the
same as maximizing

    f(theta) = eta(theta)' S - q A(eta(theta)).

For full-rank families the stationarity condition collapses to moment
matching, grad A(eta*) = S / q, solved by Newton iteration on eta.  The
generic path maximizes f directly (damped Newton with a golden-section or
trust-region fallback) and is exercised by curved reparameterizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .codebook import CellSummary
from .errors import NonConvergenceError
from .models import EPS_CLAMP, ExponentialFamily

__all__ = [
    "ProjectionResult",
    "mean_to_natural",
    "moment_match",
    "kl_projection",
]


@dataclass(frozen=True)
class ProjectionResult:
    theta: np.ndarray
    achieved_kl: float
    iterations: int
    converged: bool
    boundary: bool
    foc_residual: float


def mean_to_natural(
    model: ExponentialFamily,
    mean: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> np.ndarray:
    """Invert grad A: find eta with grad A(eta) = mean.

    Damped Newton with the log-partition Hessian.  Iterates well past the
    contract tolerance (toward machine precision) because downstream
    codepoint identities are checked at the 1e-12 level.
    """
    mu = np.asarray(mean, dtype=float)
    scale = max(1.0, float(np.max(np.abs(mu))))
    target = 1e-14 * scale
    eta = model.natural_map(model.theta_from_mean(mu))
    resid = model.log_partition_grad(eta) - mu
    norm = float(np.linalg.norm(resid))
    for iteration in range(max_iter):
        if norm <= target:
            break
        hess = model.log_partition_hess(eta)
        try:
            step = np.linalg.solve(hess, resid)
        except np.linalg.LinAlgError:
            raise NonConvergenceError(
                "singular log-partition Hessian in mean inversion",
                residual=norm,
            )
        damp = 1.0
        for _ in range(40):
            trial = eta - damp * step
            trial_resid = model.log_partition_grad(trial) - mu
            trial_norm = float(np.linalg.norm(trial_resid))
            if np.isfinite(trial_norm) and trial_norm < norm:
                break
            damp *= 0.5
        else:
            break  # no further progress possible
        eta, resid, norm = trial, trial_resid, trial_norm
    if norm > tol * scale:
        raise NonConvergenceError(
            f"mean inversion stalled at residual {norm:.3e}", residual=norm
        )
    return eta


def _achieved_kl(
    model: ExponentialFamily, cell: CellSummary, theta: np.ndarray
) -> float:
    log_p = model.log_pmf_stats(theta, cell.stats, cell.log_base)
    kl = float(cell.weights @ (cell.log_pbar - log_p))
    return max(kl, 0.0)


def _foc_residual(
    model: ExponentialFamily, cell: CellSummary, theta: np.ndarray
) -> float:
    eta = model.natural_map(theta)
    g = model.natural_jacobian(theta).T @ (
        cell.stat_sum - cell.q * model.log_partition_grad(eta)
    )
    return float(np.linalg.norm(g))


def moment_match(
    cell: CellSummary,
    model: ExponentialFamily,
    eps_clamp: float = EPS_CLAMP,
) -> ProjectionResult:
    """Codepoint with mean matched to the cell barycenter S / q.

    Barycenters on the boundary of the mean domain are clamped eps_clamp
    inside (per-observation coordinates) and flagged.
    """
    mu = cell.stat_sum / cell.q
    mu, boundary = model.clamp_mean(mu, eps_clamp)
    eta = mean_to_natural(model, mu)
    theta = model.theta_from_natural(eta)
    return ProjectionResult(
        theta=theta,
        achieved_kl=_achieved_kl(model, cell, theta),
        iterations=0,
        converged=True,
        boundary=bool(boundary),
        foc_residual=_foc_residual(model, cell, theta),
    )


def _mean_domain_bracket(model: ExponentialFamily, eps_clamp: float):
    """Interior bracket of the parameter region via the clamped mean ends."""
    lo_mu, _ = model.clamp_mean(np.full(model.dim_stat, -1e300), eps_clamp)
    hi_mu, _ = model.clamp_mean(np.full(model.dim_stat, 1e300), eps_clamp)
    lo = model.theta_from_mean(lo_mu)
    hi = model.theta_from_mean(hi_mu)
    return np.minimum(lo, hi), np.maximum(lo, hi)


def kl_projection(
    cell: CellSummary,
    model: ExponentialFamily,
    eps_clamp: float = EPS_CLAMP,
    max_iter: int = 200,
) -> ProjectionResult:
    """KL-optimal codepoint for a cell.

    Full-rank families delegate to moment matching.  Otherwise a damped
    Newton ascent of f(theta) = eta(theta)'S - q A(eta(theta)) runs from the
    mean-value heuristic start, falling back to golden-section (p = 1) or
    gradient-based trust-region descent when curvature misbehaves.
    """
    if model.supports_moment_match:
        return moment_match(cell, model, eps_clamp)

    q, s = cell.q, cell.stat_sum

    def value(theta):
        eta = model.natural_map(theta)
        return float(eta @ s - q * model.log_partition(eta))

    def grad(theta):
        eta = model.natural_map(theta)
        return model.natural_jacobian(theta).T @ (
            s - q * model.log_partition_grad(eta)
        )

    def hess(theta):
        eta = model.natural_map(theta)
        jac = model.natural_jacobian(theta)
        h = -q * jac.T @ model.log_partition_hess(eta) @ jac
        d2 = model.natural_hessian(theta)
        if d2 is not None:
            h = h + np.tensordot(
                s - q * model.log_partition_grad(eta), d2, axes=1
            )
        return h

    mu0, boundary = model.clamp_mean(s / q, eps_clamp)
    theta = model.theta_from_mean(mu0)
    lo, hi = _mean_domain_bracket(model, eps_clamp)
    f = value(theta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = grad(theta)
        if float(np.linalg.norm(g)) <= 1e-11 * max(1.0, abs(f)):
            converged = True
            break
        h = hess(theta)
        use_newton = False
        try:
            step = np.linalg.solve(h, -g)
            use_newton = float(step @ g) > 0.0  # ascent direction only
        except np.linalg.LinAlgError:
            pass
        if not use_newton:
            step = g / max(1.0, float(np.linalg.norm(g)))
        damp = 1.0
        improved = False
        for _ in range(40):
            trial = np.clip(theta + damp * step, lo, hi)
            ft = value(trial)
            if np.isfinite(ft) and ft > f:
                theta, f, improved = trial, ft, True
                break
            damp *= 0.5
        if not improved:
            break
    if not converged:
        # derivative-free fallbacks on the bracketed interior
        if model.dim_theta == 1:
            res = optimize.minimize_scalar(
                lambda t: -value(np.array([t])),
                bounds=(float(lo[0]), float(hi[0])),
                method="bounded",
                options={"xatol": 1e-12, "maxiter": max_iter},
            )
            cand = np.array([res.x])
        else:
            res = optimize.minimize(
                lambda t: -value(t),
                theta,
                jac=lambda t: -grad(t),
                method="trust-constr",
                bounds=optimize.Bounds(lo, hi),
                options={"maxiter": max_iter, "gtol": 1e-12},
            )
            cand = np.asarray(res.x)
        if value(cand) >= f:
            theta = cand
        converged = float(np.linalg.norm(grad(theta))) <= 1e-9
    if not converged and not boundary:
        raise NonConvergenceError(
            "projection failed to reach stationarity",
            residual=float(np.linalg.norm(grad(theta))),
        )
    return ProjectionResult(
        theta=theta,
        achieved_kl=_achieved_kl(model, cell, theta),
        iterations=iterations,
        converged=bool(converged),
        boundary=bool(boundary),
        foc_residual=_foc_residual(model, cell, theta),
    )
