"""Minimization of the planar Moser-Trudinger-type functional and the
second-variation eigenvalue check certifying lambda_1 * Vol >= 8 pi.

The functional (against the volume-normalized background e^{2v} g) is

    J(u) = (1/4 pi) u' S u + 2 <w, u> - log <w, e^{2u}>,

with S the conformally invariant stiffness and w the normalized background
vertex weights e^{2v} area_v.  J is invariant under u -> u + const; flows
keep the gauge <w, e^{2u}> = 1.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from . import eig, fem, heat
from .errors import NoConvergence

EIGHT_PI = 8.0 * math.pi


@dataclass
class MTOptions:
    tol: float = 1e-8            # gradNorm target (EL residual norm)
    max_iterations: int = 200
    armijo_c1: float = 1e-4
    max_halvings: int = 50
    eig_m: int = 6
    eig_tol: float = 1e-9
    seed: int = 0


@dataclass
class MTState:
    u: np.ndarray
    v: np.ndarray
    J: float
    grad_norm: float
    J_history: list
    iterations: int
    converged: bool
    rigidity_scope: bool         # False on genus-0 meshes


def _background_weights(mesh, v):
    """Normalized lumped weights of the metric e^{2v} g (unit volume)."""
    w = np.exp(2.0 * np.asarray(v, dtype=float)) * mesh.vertex_areas
    return w / w.sum()


def _log_partition(u, w):
    m = 2.0 * u.max()
    return m + math.log(float(w @ np.exp(2.0 * u - m)))


def mt_value(u, v, mesh):
    """J(u) against the e^{2v}-weighted, volume-normalized background."""
    u = np.asarray(u, dtype=float)
    S = heat.get_background(mesh).S
    w = _background_weights(mesh, v)
    return (S.energy(u) / (4.0 * math.pi) + 2.0 * float(w @ u)
            - _log_partition(u, w))


def mt_gradient(u, v, mesh):
    """Functional gradient of J; matches finite differences of mt_value."""
    u = np.asarray(u, dtype=float)
    S = heat.get_background(mesh).S
    w = _background_weights(mesh, v)
    density = w * np.exp(2.0 * u - _log_partition(u, w))
    return (S.matrix @ u) / (2.0 * math.pi) + 2.0 * w - 2.0 * density


def el_residual(u, v, mesh):
    """Pointwise residual of the critical-point equation, zero at minima.

    In the normalized gauge this is (S u)_x / w_x + 4 pi (1 - e^{2u}), the
    discrete form of the conformal-factor equation.
    """
    u = np.asarray(u, dtype=float)
    S = heat.get_background(mesh).S
    w = _background_weights(mesh, v)
    rel = np.exp(2.0 * u - _log_partition(u, w))
    return (S.matrix @ u) / w + 4.0 * math.pi * (1.0 - rel)


def _grad_norm(u, v, mesh):
    w = _background_weights(mesh, v)
    F = el_residual(u, v, mesh)
    return math.sqrt(float(w @ F ** 2))


def mt_flow(mesh, v=None, init_u=None, options=None):
    """Line-searched descent of J to a critical conformal factor.

    Direction solves the stiffness-plus-density preconditioner (a Newton
    approximation ignoring the rank-one log-partition term); Armijo
    backtracking keeps J nonincreasing.  The gauge <w, e^{2u}> = 1 is
    restored after every accepted step.
    """
    opts = options or MTOptions()
    v = np.zeros(mesh.n_vertices) if v is None else np.asarray(v, dtype=float)
    u = (np.zeros(mesh.n_vertices) if init_u is None
         else np.asarray(init_u, dtype=float).copy())
    S = heat.get_background(mesh).S
    w = _background_weights(mesh, v)

    u = u - 0.5 * _log_partition(u, w)   # enter the normalized gauge
    J = mt_value(u, v, mesh)
    history = [J]
    gnorm = _grad_norm(u, v, mesh)

    it = 0
    while gnorm > opts.tol and it < opts.max_iterations:
        it += 1
        g = mt_gradient(u, v, mesh)
        density = w * np.exp(2.0 * u - _log_partition(u, w))
        B = (S.matrix / (2.0 * math.pi) + diags(4.0 * density)).tocsc()
        d = -splu(B).solve(g)
        slope = float(g @ d)
        if slope >= 0:
            d, slope = -g, -float(g @ g)
        step, accepted = 1.0, False
        for _ in range(opts.max_halvings):
            u_try = u + step * d
            u_try = u_try - 0.5 * _log_partition(u_try, w)
            J_try = mt_value(u_try, v, mesh)
            if J_try <= J + opts.armijo_c1 * step * slope:
                u, J, accepted = u_try, J_try, True
                break
            step *= 0.5
        if not accepted:
            raise NoConvergence(
                "line search failed to descend",
                diagnostics={"grad_norm": gnorm, "J": J})
        history.append(J)
        gnorm = _grad_norm(u, v, mesh)

    return MTState(u=u, v=v, J=J, grad_norm=gnorm, J_history=history,
                   iterations=it, converged=gnorm <= opts.tol,
                   rigidity_scope=mesh.genus > 0)


@dataclass(frozen=True)
class SecondVariationReport:
    lambda1_vol: float
    passed: bool
    margin: float
    spectrum_excludes_8pi: bool
    rigidity_scope: bool


def second_variation_check(state, mesh, tol=0.02, options=None):
    """Eigenvalue form of the nonnegative-second-variation condition.

    Computes lambda_1 of the metric e^{2(u+v)} g (unit volume, so the
    reported value is already lambda_1 * Vol) and passes when it clears
    8 pi (1 - tol).  The margin over 8 pi is strict off the sphere.
    """
    opts = options or MTOptions()
    rho = fem.ConformalDensity.normalized(
        mesh, np.exp(2.0 * (state.u + state.v)))
    S = heat.get_background(mesh).S
    M = fem.mass(mesh, rho)
    sd = eig.solve_spectrum(S, M, m=opts.eig_m, tol=opts.eig_tol,
                            seed=opts.seed)
    lam1 = float(sd.eigenvalues[1])
    excluded = bool(np.min(np.abs(sd.eigenvalues[1:] - EIGHT_PI))
                    > 1e-3 * EIGHT_PI)
    return SecondVariationReport(
        lambda1_vol=lam1,
        passed=lam1 >= EIGHT_PI * (1.0 - tol),
        margin=lam1 - EIGHT_PI,
        spectrum_excludes_8pi=excluded,
        rigidity_scope=state.rigidity_scope,
    )


@dataclass(frozen=True)
class PerturbResult:
    best_v: np.ndarray
    best_margin: float
    best_report: SecondVariationReport
    margins: list


def _random_smooth_fields(mesh, count, radius, seed, n_modes=8):
    """Low-frequency random fields with sup norm equal to ``radius``."""
    S = heat.get_background(mesh).S
    M = fem.MassForm(weights=mesh.vertex_areas.copy())
    sd = eig.solve_spectrum(S, M, m=n_modes, tol=1e-8, seed=seed)
    modes = sd.eigenvectors[:, 1:]
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(count):
        v = modes @ rng.standard_normal(modes.shape[1])
        sup = np.abs(v).max()
        fields.append(radius * v / sup if sup > 0 else v)
    return fields


def perturb_search(mesh, trials=8, radius=0.05, seed=0, options=None):
    """Random search over smooth background perturbations v.

    Runs the flow plus the second-variation check for v = 0 and for
    ``trials - 1`` random low-frequency fields of sup-norm ``radius``;
    returns the candidate with the largest strictness margin.  This is a
    heuristic witness generator, not a genericity proof.
    """
    opts = options or MTOptions()
    candidates = [np.zeros(mesh.n_vertices)]
    if trials > 1 and radius > 0:
        candidates += _random_smooth_fields(mesh, trials - 1, radius, seed)
    else:
        candidates += [np.zeros(mesh.n_vertices)] * (trials - 1)

    best = None
    margins = []
    for v in candidates:
        state = mt_flow(mesh, v=v, options=opts)
        report = second_variation_check(state, mesh, options=opts)
        margins.append(report.margin)
        if best is None or report.margin > best[1]:
            best = (v, report.margin, report)
    return PerturbResult(best_v=best[0], best_margin=best[1],
                         best_report=best[2], margins=margins)
