"""Generalized symmetric eigensolver for the pencil (S, M) = (stiffness, mass).

The solver is a deflated block shift-invert iteration with Rayleigh-Ritz
extraction: the pencil is reduced to standard form with the diagonal mass,
the constant mode is projected out exactly, and a sparse LU of the shifted
operator drives the inverse iteration.  Start vectors come from a seeded
generator, so results are deterministic for a fixed seed.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import identity as sparse_identity
from scipy.sparse.linalg import splu

from .errors import AmbiguousCluster, NoConvergence

DEFAULT_MULTIPLICITY_CAP = 8
DEFAULT_CLUSTER_RTOL = 1e-5


@dataclass(frozen=True)
class SpectralData:
    """Lowest eigenpairs of the pencil, M-orthonormal, nondecreasing.

    ``eigenvalues[0]`` is the exactly-deflated constant mode (0 by
    construction), so ``residuals[0]`` is reported as 0.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int


@dataclass(frozen=True)
class EigenspaceFrame:
    """M-orthonormal basis of the first-eigenvalue cluster."""

    k: int
    Phi: np.ndarray          # (V, k)
    lam: float               # cluster representative (mean)
    eigenvalues: np.ndarray  # the k cluster members
    capped: bool = False


def solve_spectrum(S, M, m, tol=1e-9, seed=0, x0=None, max_iterations=300):
    """Compute the m+1 lowest eigenpairs of S phi = lambda M phi.

    Parameters
    ----------
    S : StiffnessForm
    M : MassForm
    m : int
        Number of nonconstant eigenpairs wanted (m >= 2).
    tol : float
        Relative residual target ||S phi - lambda M phi|| <= tol ||S phi||.
    seed : int
        Seed for the start block when no warm start is given.
    x0 : (V, j) ndarray, optional
        Warm-start eigenvectors (in pencil coordinates).

    Raises
    ------
    NoConvergence
        Iteration budget exhausted; diagnostics carry the best residuals.
    """
    if m < 2:
        raise ValueError("need at least two nonconstant eigenpairs")
    a = M.weights
    sqrt_a = np.sqrt(a)
    n = len(a)
    inv_sqrt = 1.0 / sqrt_a

    Dl = inv_sqrt[:, None]
    S_hat = S.matrix.multiply(inv_sqrt[None, :]).multiply(Dl).tocsc()
    psi0 = sqrt_a / np.linalg.norm(sqrt_a)

    diag_scale = float(np.mean(S_hat.diagonal()))
    alpha = 1e-3 * diag_scale
    lu = splu((S_hat + alpha * sparse_identity(n, format="csc")).tocsc())

    block = min(n - 1, m + max(4, m // 2))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, block))
    if x0 is not None:
        warm = sqrt_a[:, None] * np.asarray(x0, dtype=float)
        j = min(warm.shape[1], block)
        X[:, :j] = warm[:, :j]

    def deflate(Y):
        return Y - np.outer(psi0, psi0 @ Y)

    theta = None
    rel = np.full(m, np.inf)
    for it in range(1, max_iterations + 1):
        X = deflate(X)
        X, _ = np.linalg.qr(X)
        SX = S_hat @ X
        T = X.T @ SX
        theta, C = np.linalg.eigh(0.5 * (T + T.T))
        X = X @ C
        SX = SX @ C
        R = SX[:, :m] - X[:, :m] * theta[:m]
        denom = np.maximum(np.linalg.norm(SX[:, :m], axis=0), 1e-300)
        rel = np.linalg.norm(R, axis=0) / denom
        if (rel <= tol).all():
            break
        X = lu.solve(deflate(X))
    else:
        raise NoConvergence(
            "eigensolver iteration budget exhausted",
            diagnostics={"residuals": rel.tolist(),
                         "eigenvalues": theta[:m].tolist()})

    phi = inv_sqrt[:, None] * X[:, :m]
    vals = np.concatenate([[0.0], theta[:m]])
    const = np.full(n, 1.0 / np.linalg.norm(sqrt_a))
    vecs = np.column_stack([const, phi])
    residuals = np.concatenate([[0.0], rel])
    return SpectralData(eigenvalues=vals, eigenvectors=vecs,
                        residuals=residuals, iterations=it)


def first_eigenspace(sd, cluster_rtol=DEFAULT_CLUSTER_RTOL,
                     multiplicity_cap=DEFAULT_MULTIPLICITY_CAP):
    """Detect the first-eigenvalue cluster of a computed spectrum.

    The cluster is the maximal set {lambda_i : lambda_i - lambda_1 <=
    cluster_rtol * lambda_1}.  A gap of at least 2 * cluster_rtol *
    lambda_1 must separate it from the rest, else AmbiguousCluster is
    raised (refine the solver tolerance or the cluster tolerance).
    """
    lam = sd.eigenvalues
    if len(lam) < 3:
        raise AmbiguousCluster("need at least two nonconstant eigenpairs")
    lam1 = lam[1]
    if lam1 <= 0:
        raise AmbiguousCluster("first nonzero eigenvalue is not positive")
    k = int(np.sum(lam[1:] - lam1 <= cluster_rtol * lam1))
    capped = False
    if k > multiplicity_cap:
        k, capped = multiplicity_cap, True
    elif k == len(lam) - 1:
        raise AmbiguousCluster(
            "cluster extends past the computed spectrum; increase m")
    if not capped:
        gap = lam[k + 1] - lam[k]
        if gap <= 2.0 * cluster_rtol * lam1:
            raise AmbiguousCluster(
                f"no 2*cluster_rtol gap above the cluster (gap {gap:.3e})")
    return EigenspaceFrame(k=k, Phi=sd.eigenvectors[:, 1:k + 1],
                           lam=float(np.mean(lam[1:k + 1])),
                           eigenvalues=lam[1:k + 1].copy(), capped=capped)


def dense_pencil_eigh(S, M):
    """Full spectrum of the pencil by dense symmetric decomposition.

    Returns M-orthonormal eigenvectors; used for the background heat
    semigroup where the whole basis is needed once per mesh.
    """
    a = M.weights
    inv_sqrt = 1.0 / np.sqrt(a)
    S_hat = (S.matrix.multiply(inv_sqrt[None, :])
             .multiply(inv_sqrt[:, None])).toarray()
    vals, vecs = np.linalg.eigh(0.5 * (S_hat + S_hat.T))
    vals[0] = max(vals[0], 0.0)  # constant mode, clip fp negatives
    return vals, inv_sqrt[:, None] * vecs
