"""Heat-regularized maximization of the first eigenvalue over vertex
probability measures, with an epsilon continuation toward the conformal
supremum.

At fixed epsilon the objective is nu -> lambda_1(K_eps[nu] g).  Its one-sided
derivative toward a point mass at x is lambda * s(x) with the directional
score s(x) = 1 - lambda_max(A(x)), A(x) the matrix of smoothed eigenfunction
products over the first-eigenvalue cluster; mass moves toward positive-score
vertices under monotone backtracking.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds, certify, eig, fem, heat
from .errors import AmbiguousCluster, ConfigError, StallDetected


@dataclass
class OptOptions:
    slack_tol: float = 1e-3
    max_iterations: int = 150
    step0: float = 0.5
    backtrack_tol: float = 1e-9
    max_halvings: int = 30
    support_size: int = 16       # vertices fed by one ascent step
    eig_m: int = 10
    eig_tol: float = 1e-9
    cluster_rtol: float = 1e-5
    multiplicity_cap: int = 8
    certificate_tol: float = 5e-3
    seed: int = 0


@dataclass
class OptState:
    """One coherent snapshot of the fixed-epsilon maximization."""

    mesh: object
    epsilon: float
    nu: heat.VertexMeasure
    rho: fem.ConformalDensity
    frame: eig.EigenspaceFrame
    lam: float
    spectrum: eig.SpectralData
    K: heat.HeatOperator
    S: fem.StiffnessForm
    M: fem.MassForm
    history: list = field(default_factory=list)
    converged: bool = False
    stalled: bool = False


def _solve_frame(S, M, opts, warm=None):
    m = opts.eig_m
    for attempt in range(3):
        sd = eig.solve_spectrum(S, M, m=m, tol=opts.eig_tol,
                                seed=opts.seed, x0=warm)
        rtol = opts.cluster_rtol
        for _ in range(4):
            try:
                return sd, eig.first_eigenspace(
                    sd, cluster_rtol=rtol,
                    multiplicity_cap=opts.multiplicity_cap)
            except AmbiguousCluster as exc:
                if "past the computed" in str(exc):
                    break  # need more eigenpairs, not a looser tolerance
                rtol *= 10.0
                if rtol > 3e-2:
                    raise
        m *= 2
    raise AmbiguousCluster("cluster did not resolve after enlarging m")


def build_state(mesh, epsilon, nu, opts=None, K=None, warm=None,
                history=None):
    """Assemble a coherent OptState for the measure nu at this epsilon."""
    opts = opts or OptOptions()
    K = K or heat.heat_operator(mesh, epsilon)
    rho = K.apply_measure(nu)
    S = heat.get_background(mesh).S
    M = fem.mass(mesh, rho)
    sd, frame = _solve_frame(S, M, opts, warm=warm)
    return OptState(mesh=mesh, epsilon=epsilon, nu=nu, rho=rho, frame=frame,
                    lam=frame.lam, spectrum=sd, K=K, S=S, M=M,
                    history=list(history or []))


def directional_scores(state):
    """Score s(x) = 1 - lambda_max(A(x)) for every vertex x.

    Positive score at x means first-order ascent by moving measure mass
    toward x; at an epsilon-maximizer all scores are nonpositive.
    """
    A = certify.eigenspace_products(state.K, state.frame.Phi)
    if state.frame.k == 1:
        return 1.0 - A[:, 0, 0]
    return 1.0 - np.linalg.eigvalsh(A)[:, -1]


def directional_score(state, x):
    """Score of a single vertex (see directional_scores)."""
    return float(directional_scores(state)[x])


def _support_measure(scores, size):
    """Uniform probability on the highest-scoring vertices (ties resolved
    toward the lowest index), restricted to positive scores."""
    order = np.lexsort((np.arange(len(scores)), -scores))
    top = order[:size]
    top = top[scores[top] > 0.0]
    if len(top) == 0:
        return None
    w = np.zeros(len(scores))
    w[top] = 1.0 / len(top)
    return heat.VertexMeasure.from_weights(w)


def ascent_step(state, stepsize, opts=None, scores=None):
    """One monotone ascent step nu <- (1 - t) nu + t mu_hat.

    The target measure mu_hat sits on the top-scoring vertices; t starts at
    ``stepsize`` and halves until lambda_1 does not decrease (beyond the
    backtracking tolerance).

    Raises
    ------
    StallDetected
        No positive-score vertex, or no halving level improved.
    """
    opts = opts or OptOptions()
    if stepsize == 0.0:
        return state
    if not 0.0 < stepsize <= 1.0:
        raise ValueError("stepsize must lie in (0, 1]")
    if scores is None:
        scores = directional_scores(state)
    mu_hat = _support_measure(scores, opts.support_size)
    if mu_hat is None:
        raise StallDetected("no vertex with positive directional score")

    floor = state.lam * (1.0 - opts.backtrack_tol)
    t = stepsize
    for _ in range(opts.max_halvings):
        w = (1.0 - t) * state.nu.nu + t * mu_hat.nu
        nu_t = heat.VertexMeasure.from_weights(w)
        cand = build_state(state.mesh, state.epsilon, nu_t, opts,
                           K=state.K, warm=state.frame.Phi,
                           history=state.history)
        if cand.lam >= floor:
            cand.history = state.history
            return cand
        t *= 0.5
    raise StallDetected("backtracking found no non-decreasing step")


def maximize_at_epsilon(mesh, epsilon, init=None, opts=None, K=None):
    """Run the fixed-epsilon maximization to stationarity.

    Stops when the largest directional score drops below ``slack_tol`` (no
    first-order ascent left), on stall, or at the iteration cap.
    """
    opts = opts or OptOptions()
    if epsilon < heat.epsilon_floor(mesh):
        raise ConfigError("epsilon below the mesh resolution floor h^2")
    nu = init or heat.VertexMeasure.uniform(mesh)
    state = build_state(mesh, epsilon, nu, opts, K=K)

    step = opts.step0
    for it in range(opts.max_iterations):
        scores = directional_scores(state)
        slack = float(scores.max())
        state.history.append({"iteration": it, "lambda": state.lam,
                              "step": step, "slack": slack})
        if slack <= opts.slack_tol:
            state.converged = True
            break
        try:
            new_state = ascent_step(state, step, opts, scores=scores)
        except StallDetected:
            state.stalled = True
            state.converged = True  # terminal: no ascent available
            break
        # reuse the last accepted contraction as the next trial step
        gain = new_state.lam - state.lam
        state = new_state
        if gain <= opts.backtrack_tol * abs(state.lam):
            step = max(step * 0.5, 1.0 / 1024.0)
        else:
            step = min(1.0, step * 1.5)
    return state


@dataclass
class OptReport:
    """End-to-end record of an epsilon-continuation run."""

    mesh_hash: str
    genus: int
    schedule: list
    lambda_per_epsilon: list
    Lambda1_estimate: float
    nu: np.ndarray
    rho: np.ndarray
    frame_k: int
    certificate: object
    yang_yau: float
    known_exact: float | None
    within_yang_yau: bool
    seed: int
    final_state: OptState


def optimize_conformal(mesh, schedule, opts=None):
    """Epsilon continuation of the regularized maximization.

    Each epsilon warm-starts from the previous maximizing measure; the
    final state is certified with the optimality-condition solver.
    """
    opts = opts or OptOptions()
    schedule = list(schedule)
    if len(schedule) == 0:
        raise ConfigError("empty epsilon schedule")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigError("epsilon schedule must be strictly decreasing")
    floor = heat.epsilon_floor(mesh)
    if schedule[-1] < floor:
        raise ConfigError(
            f"schedule bottom {schedule[-1]:g} is below the mesh floor "
            f"h^2 = {floor:g}")

    nu = heat.VertexMeasure.uniform(mesh)
    per_eps = []
    state = None
    for eps in schedule:
        state = maximize_at_epsilon(mesh, eps, init=nu, opts=opts)
        nu = state.nu
        per_eps.append({
            "epsilon": eps,
            "lambda": state.lam,
            "iterations": len(state.history),
            "max_score": state.history[-1]["slack"] if state.history else None,
            "converged": state.converged,
            "frame_k": state.frame.k,
        })

    cert = certify.el_certificate(state, tol=opts.certificate_tol)
    yy = bounds.yang_yau(mesh.genus)
    exact = bounds.known_exact(mesh.genus)
    return OptReport(
        mesh_hash=mesh.content_hash(),
        genus=mesh.genus,
        schedule=schedule,
        lambda_per_epsilon=per_eps,
        Lambda1_estimate=state.lam,
        nu=state.nu.nu,
        rho=state.rho.rho,
        frame_k=state.frame.k,
        certificate=cert,
        yang_yau=yy,
        known_exact=exact[0] if exact else None,
        within_yang_yau=state.lam <= yy * 1.05,
        seed=opts.seed,
        final_state=state,
    )


def halving_schedule(start, stop):
    """Strictly decreasing epsilon schedule: start, start/2, ..., >= stop."""
    if start <= 0 or stop <= 0 or stop > start:
        raise ConfigError("need 0 < stop <= start")
    out = [start]
    while out[-1] / 2.0 >= stop * (1.0 - 1e-12):
        out.append(out[-1] / 2.0)
    return out
