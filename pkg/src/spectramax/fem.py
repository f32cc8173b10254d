"""Discrete Dirichlet energy and density-weighted mass forms.

The conformal eigenvalue problem lambda_1(e^{2u} g) becomes the generalized
symmetric pencil  S f = lambda M f  with S the cotangent stiffness of the
background metric (conformally invariant) and M the lumped vertex mass
weighted by the density e^{2u}.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DimensionMismatch, ZeroNorm


@dataclass(frozen=True)
class ConformalDensity:
    """Per-vertex positive density representing the conformal factor e^{2u}.

    ``total_volume`` caches sum(rho * vertex_area); the optimization pipeline
    keeps densities normalized to unit total volume.
    """

    rho: np.ndarray
    total_volume: float

    def __post_init__(self):
        if (self.rho <= 0).any():
            raise ValueError("conformal density must be strictly positive")

    @classmethod
    def from_field(cls, mesh, rho):
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (mesh.n_vertices,):
            raise DimensionMismatch("density does not match mesh vertices")
        return cls(rho=rho, total_volume=float(rho @ mesh.vertex_areas))

    @classmethod
    def normalized(cls, mesh, rho):
        """Rescale so the total volume is exactly 1."""
        d = cls.from_field(mesh, rho)
        return cls(rho=d.rho / d.total_volume, total_volume=1.0)

    @classmethod
    def uniform(cls, mesh):
        """Unit-volume uniform density (rho = 1/area)."""
        return cls.normalized(mesh, np.ones(mesh.n_vertices))


@dataclass(frozen=True)
class StiffnessForm:
    """Cotangent stiffness: symmetric, PSD, constants in the kernel."""

    matrix: sparse.csr_matrix

    def energy(self, f, g=None):
        g = f if g is None else g
        return float(f @ (self.matrix @ g))


@dataclass(frozen=True)
class MassForm:
    """Lumped (diagonal) mass with weights rho_v * area_v."""

    weights: np.ndarray

    @property
    def trace(self):
        return float(self.weights.sum())

    def inner(self, f, g=None):
        g = f if g is None else g
        return float(f @ (self.weights * g))


def stiffness(mesh):
    """Assemble the cotangent stiffness form of the background metric.

    Obtuse triangles are allowed; their weights simply come out negative.
    Invariant under uniform rescaling of the vertex positions.
    """
    c = mesh.face_corners
    f = mesh.faces
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = (k + 1) % 3, (k + 2) % 3, k
        e1 = c[:, i] - c[:, o]
        e2 = c[:, j] - c[:, o]
        # cot(angle at o) = <e1, e2> / |e1 x e2|
        cross = np.linalg.norm(np.cross(e1, e2), axis=1)
        cot = np.einsum("ij,ij->i", e1, e2) / cross
        w = 0.5 * cot
        rows += [f[:, i], f[:, j], f[:, i], f[:, j]]
        cols += [f[:, j], f[:, i], f[:, i], f[:, j]]
        vals += [-w, -w, w, w]
    mat = sparse.coo_matrix(
        (np.concatenate(vals),
         (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_vertices,) * 2).tocsr()
    mat.sum_duplicates()
    return StiffnessForm(matrix=mat)


def mass(mesh, density):
    """Lumped mass form for the given conformal density."""
    if density.rho.shape != (mesh.n_vertices,):
        raise DimensionMismatch("density does not match mesh vertices")
    return MassForm(weights=density.rho * mesh.vertex_areas)


def rayleigh(S, M, f):
    """Rayleigh quotient (f'Sf)/(f'Mf) for a vertex field f."""
    f = np.asarray(f, dtype=float)
    denom = M.inner(f)
    if denom <= 0.0:
        raise ZeroNorm("field has non-positive M-norm")
    return S.energy(f) / denom


def face_gradients(mesh, f):
    """Per-face gradient vectors of the piecewise-linear interpolant of f.

    grad f = sum_k f_k (n x e_k) / (2 A)  with e_k the edge opposite
    corner k and n the unit face normal.
    """
    c = mesh.face_corners
    fv = np.asarray(f)[mesh.faces]  # (F, 3)
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    two_a = np.linalg.norm(n, axis=1)
    n = n / two_a[:, None]
    grad = np.zeros((mesh.n_faces, 3))
    for k in range(3):
        e_opp = c[:, (k + 2) % 3] - c[:, (k + 1) % 3]
        grad += fv[:, k, None] * np.cross(n, e_opp)
    return grad / two_a[:, None]


def face_energy_density(mesh, fields, Q=None):
    """Per-face Dirichlet energy density sum_ij Q_ij <grad f_i, grad f_j>.

    ``fields`` is (V, k); Q defaults to the identity.
    """
    fields = np.atleast_2d(np.asarray(fields, dtype=float).T).T
    grads = np.stack([face_gradients(mesh, fields[:, i])
                      for i in range(fields.shape[1])], axis=1)  # (F, k, 3)
    gram = np.einsum("fia,fja->fij", grads, grads)
    if Q is None:
        return np.einsum("fii->f", gram)
    return np.einsum("ij,fij->f", Q, gram)
