"""Optimality certificates and the diagnostic battery for converged states.

The certificate realizes the stationarity conditions of the regularized
maximization: a positive-semidefinite, unit-trace Gram matrix Q over the
first-eigenvalue cluster whose smoothed quadratic F_Q = K_eps[sum Q_ij
phi_i phi_j] is >= 1 everywhere and = 1 on the support of the maximizing
measure.  Diagnostics cover nodal counts, mass/gradient non-concentration
profiles, and the harmonic-map structure of the extremal density.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import fem
from .errors import CertificateSolveFailure, NotCertified

SUPPORT_THRESHOLD_SCALE = 1e-6   # nu_x > scale / V counts as support


def eigenspace_products(K, Phi):
    """Smoothed symmetric products A(x)_ij = K_eps[phi_i phi_j](x).

    Returns a (V, k, k) stack; k(k+1)/2 heat applications.
    """
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float).T).T
    V, k = Phi.shape
    pairs = [(i, j) for i in range(k) for j in range(i, k)]
    prods = np.column_stack([Phi[:, i] * Phi[:, j] for i, j in pairs])
    smoothed = K.apply(prods)
    A = np.empty((V, k, k))
    for col, (i, j) in enumerate(pairs):
        A[:, i, j] = smoothed[:, col]
        A[:, j, i] = smoothed[:, col]
    return A


def _project_spectrahedron(Q):
    """Projection onto {Q >= 0, tr Q = 1} by eigenvalue simplex projection."""
    vals, vecs = np.linalg.eigh(0.5 * (Q + Q.T))
    # project the eigenvalue vector onto the probability simplex
    u = np.sort(vals)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, len(u) + 1)
    rho = np.max(np.nonzero(u + (1.0 - css) / idx > 0)[0]) + 1
    shift = (1.0 - css[rho - 1]) / rho
    lam = np.maximum(vals + shift, 0.0)
    lam = lam / lam.sum()
    return (vecs * lam) @ vecs.T


@dataclass(frozen=True)
class ELCertificate:
    """Best found stationarity certificate for a converged state."""

    Q: np.ndarray
    slack_field: np.ndarray      # F_Q - 1 per vertex
    support_set: np.ndarray      # vertex indices with nu above threshold
    max_violation: float         # max(0, 1 - min_x F_Q)
    support_equality: float      # max_{support} |F_Q - 1|
    certified: bool
    tol: float
    planes: int


def el_certificate(state, tol=5e-3, max_planes=200, inner_iterations=60):
    """Solve for the certificate Gram matrix by cutting planes.

    Outer loop adds the currently worst vertex as a plane (capped at
    ``max_planes``); the inner loop runs projected supergradient ascent of
    min over active planes of tr(Q A(x)), with projection onto the PSD
    unit-trace set by eigenvalue clipping.
    """
    frame = state.frame
    A = eigenspace_products(state.K, frame.Phi)
    V, k = len(A), frame.k
    nu = state.nu.nu
    support = np.flatnonzero(nu > SUPPORT_THRESHOLD_SCALE / V)

    def evaluate(Q):
        return np.einsum("vij,ij->v", A, Q)

    if k == 1:
        Q = np.array([[1.0]])
        F = evaluate(Q)
        planes = 0
    else:
        Q = np.eye(k) / k
        F = evaluate(Q)
        best_Q, best_min = Q, F.min()
        active = [int(np.argmin(F))]
        planes = 1
        for outer in range(max_planes):
            step_scale = 0.5 / k
            for inner in range(1, inner_iterations + 1):
                F_active = np.einsum("vij,ij->v", A[active], Q)
                worst = active[int(np.argmin(F_active))]
                Q = _project_spectrahedron(
                    Q + (step_scale / np.sqrt(inner)) * A[worst])
            F = evaluate(Q)
            if not np.isfinite(F).all():
                raise CertificateSolveFailure(
                    "certificate iteration produced non-finite values",
                    diagnostics={"planes": planes})
            if F.min() > best_min:
                best_Q, best_min = Q, F.min()
            x_star = int(np.argmin(F))
            if best_min >= 1.0 - 0.25 * tol:
                break
            if x_star not in active:
                active.append(x_star)
                planes += 1
        Q = best_Q
        F = evaluate(Q)

    slack = F - 1.0
    max_violation = float(max(0.0, -slack.min()))
    support_equality = float(np.abs(slack[support]).max())
    return ELCertificate(
        Q=Q, slack_field=slack, support_set=support,
        max_violation=max_violation, support_equality=support_equality,
        certified=(max_violation <= tol and support_equality <= tol),
        tol=tol, planes=planes)


def nodal_domains(mesh, f):
    """Number of connected components of {f > 0} union {f < 0}.

    Zeros separate: they belong to neither side.
    """
    f = np.asarray(f, dtype=float)
    adj = mesh.adjacency(weighted=False)
    count = 0
    for mask in (f > 0, f < 0):
        idx = np.flatnonzero(mask)
        if len(idx) == 0:
            continue
        sub = adj[idx][:, idx]
        n, _ = csgraph.connected_components(sub, directed=False)
        count += n
    return count


@dataclass(frozen=True)
class NonconcentrationProfile:
    radii: np.ndarray
    max_ball_mass: np.ndarray
    fit_values: np.ndarray       # fitted C1 / log(1/r)
    C1: float
    flagged: bool


def nonconcentration_profile(mesh, rho, radii, max_centers=256):
    """Worst ball mass per radius against the 1/log(1/r) law.

    Balls are graph-Dijkstra balls around a farthest-point sample of
    centers.  Flagged when the implied constant mass * log(1/r) grows by
    more than a factor 2 from the largest to the smallest radius.
    """
    radii = np.asarray(radii, dtype=float)
    if (np.diff(radii) >= 0).any():
        raise ValueError("radii must be strictly decreasing")
    if radii.max() >= 1.0:
        raise ValueError("non-concentration law needs radii < 1")
    centers = mesh.farthest_point_sample(min(max_centers, mesh.n_vertices))
    dist = mesh.geodesic_distances(centers)
    vw = rho.rho * mesh.vertex_areas
    max_mass = np.array([(dist <= r).astype(float) @ vw for r in radii]).max(axis=1)

    x = 1.0 / np.log(1.0 / radii)
    C1 = float((max_mass @ x) / (x @ x))
    implied = max_mass * np.log(1.0 / radii)
    flagged = bool(implied[-1] > 2.0 * implied[0])
    return NonconcentrationProfile(radii=radii, max_ball_mass=max_mass,
                                   fit_values=C1 * x, C1=C1, flagged=flagged)


@dataclass(frozen=True)
class GradientProfile:
    radii: np.ndarray
    max_ball_energy: np.ndarray
    flagged: bool


def gradient_nonconcentration(mesh, frame, radii, max_centers=256):
    """Worst ball Dirichlet energy of the frame against the 1/sqrt(log) law."""
    radii = np.asarray(radii, dtype=float)
    if (np.diff(radii) >= 0).any():
        raise ValueError("radii must be strictly decreasing")
    if radii.max() >= 1.0:
        raise ValueError("non-concentration law needs radii < 1")
    energy_f = fem.face_energy_density(mesh, frame.Phi) * mesh.face_areas
    centers = mesh.farthest_point_sample(min(max_centers, mesh.n_vertices))
    dist = mesh.geodesic_distances(centers)
    face_dist = dist[:, mesh.faces].max(axis=2)   # ball contains whole face
    max_energy = np.array([(face_dist <= r).astype(float) @ energy_f
                           for r in radii]).max(axis=1)
    implied = max_energy * np.sqrt(np.log(1.0 / radii))
    flagged = bool(implied[-1] > 2.0 * implied[0])
    return GradientProfile(radii=radii, max_ball_energy=max_energy,
                           flagged=flagged)


@dataclass(frozen=True)
class HarmonicMapReport:
    norm_field: np.ndarray           # |Phi| per vertex after Q-weighting
    norm_deviation: float            # max | |Phi| - 1 |
    energy_density: np.ndarray       # per-face |grad Phi|^2
    harmonic_residual: np.ndarray    # per-vertex ||Delta Phi - |grad|^2 Phi||
    conical_candidates: np.ndarray   # face indices
    candidates_isolated: bool
    measure_match: float             # L1 gap between Lambda rho and energy


def harmonic_map_report(state, certificate):
    """Extract the limiting sphere-valued harmonic map data from a
    certified state.

    The frame is combined through the certificate Gram matrix, so the map
    is Q^{1/2} Phi; its squared norm is the certificate quadratic before
    smoothing.
    """
    if certificate is None or not certificate.certified:
        raise NotCertified("harmonic map extraction needs a certified state")
    mesh = state.mesh
    Phi = state.frame.Phi
    Q = certificate.Q
    vals, vecs = np.linalg.eigh(Q)
    root = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
    mapped = Phi @ root                         # (V, k)

    norm_field = np.sqrt(np.einsum("vi,ij,vj->v", Phi, Q, Phi))
    energy_density = fem.face_energy_density(mesh, Phi, Q)

    areas = mesh.vertex_areas
    vertex_energy = np.zeros(mesh.n_vertices)
    np.add.at(vertex_energy, mesh.faces.ravel(),
              np.repeat(energy_density * mesh.face_areas / 3.0, 3))
    vertex_energy /= areas

    laplace = (state.S.matrix @ mapped) / areas[:, None]
    residual = np.linalg.norm(
        laplace - vertex_energy[:, None] * mapped, axis=1)

    median = float(np.median(energy_density))
    candidates = np.flatnonzero(energy_density < 1e-3 * median)
    isolated = True
    if len(candidates) > 1:
        cand_faces = mesh.faces[candidates]
        edges = np.concatenate([cand_faces[:, [0, 1]], cand_faces[:, [1, 2]],
                                cand_faces[:, [2, 0]]])
        keys = (np.minimum(edges[:, 0], edges[:, 1]) * mesh.n_vertices
                + np.maximum(edges[:, 0], edges[:, 1]))
        _, counts = np.unique(keys, return_counts=True)
        isolated = not (counts > 1).any()

    lam = state.lam
    measure_match = float(
        np.abs(vertex_energy - lam * state.rho.rho) @ areas / lam)
    return HarmonicMapReport(
        norm_field=norm_field,
        norm_deviation=float(np.abs(norm_field - 1.0).max()),
        energy_density=energy_density,
        harmonic_residual=residual,
        conical_candidates=candidates,
        candidates_isolated=isolated,
        measure_match=measure_match,
    )
