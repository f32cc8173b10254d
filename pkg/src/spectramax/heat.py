"""Discrete heat semigroup of the background metric.

K_eps smooths vertex measures into positive unit-volume densities and vertex
fields into vertex fields.  Two interchangeable backends:

* ``spectral`` (default): full eigendecomposition of the background pencil,
  computed once per mesh and reused for every epsilon.  Gives the exact
  discrete semigroup (self-adjoint, K_eps o K_eps = K_{2 eps}).
* ``implicit``: sub-stepped implicit Euler ``(I + (eps/s) M^-1 S)^-s``,
  the fallback for meshes too large to decompose densely.
"""

import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from . import eig, fem
from .errors import ConfigError, DimensionMismatch, PositivityBreach

DENSE_BACKEND_MAX_VERTICES = 4200


@dataclass(frozen=True)
class VertexMeasure:
    """Probability weights on vertices (the measure being optimized)."""

    nu: np.ndarray

    def __post_init__(self):
        if (self.nu < 0).any():
            raise ValueError("measure weights must be nonnegative")
        if abs(self.nu.sum() - 1.0) > 1e-12:
            raise ValueError("measure weights must sum to 1")

    @classmethod
    def from_weights(cls, weights):
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if total <= 0:
            raise ValueError("measure needs positive total weight")
        w = w / total
        w = w / w.sum()  # exact renormalization
        return cls(nu=w)

    @classmethod
    def uniform(cls, mesh):
        return cls.from_weights(mesh.vertex_areas)

    @classmethod
    def dirac(cls, mesh, vertex):
        w = np.zeros(mesh.n_vertices)
        w[vertex] = 1.0
        return cls(nu=w)


class Background:
    """Background (rho = 1) stiffness/mass forms plus the dense spectrum."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.S = fem.stiffness(mesh)
        self.M = fem.MassForm(weights=mesh.vertex_areas.copy())
        self._evals = None
        self._evecs = None

    @property
    def spectrum(self):
        if self._evals is None:
            if self.mesh.n_vertices > DENSE_BACKEND_MAX_VERTICES:
                raise ConfigError(
                    "mesh too large for the dense spectral backend; "
                    "use backend='implicit'")
            self._evals, self._evecs = eig.dense_pencil_eigh(self.S, self.M)
        return self._evals, self._evecs


_background_cache = weakref.WeakKeyDictionary()


def get_background(mesh):
    bg = _background_cache.get(mesh)
    if bg is None:
        bg = Background(mesh)
        _background_cache[mesh] = bg
    return bg


def epsilon_floor(mesh):
    """Smallest resolvable time, h^2 with h the mean edge length."""
    return mesh.mean_edge_length ** 2


def gaussian_reference(d, epsilon):
    """Euclidean short-time heat kernel (1/(4 pi eps)) exp(-d^2/(4 eps))."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    d = np.asarray(d, dtype=float)
    return np.exp(-(d ** 2) / (4.0 * epsilon)) / (4.0 * np.pi * epsilon)


@dataclass
class HeatOperator:
    """Heat semigroup K_eps of the background metric at a fixed time.

    Symmetric in the background mass inner product, preserves constants and
    total integral, and is positivity-preserving up to floating-point noise
    on meshes with nonnegative cotangent weights.
    """

    mesh: object
    epsilon: float
    backend: str = "spectral"
    modes: int | None = None      # spectral truncation, default full
    substeps: int = 64            # implicit-Euler substep count
    _impl: object = field(default=None, repr=False)

    def __post_init__(self):
        floor = epsilon_floor(self.mesh)
        if self.epsilon < floor:
            raise ConfigError(
                f"epsilon {self.epsilon:g} below mesh floor h^2 = {floor:g}")
        bg = get_background(self.mesh)
        if self.backend == "auto":
            self.backend = ("spectral"
                            if self.mesh.n_vertices <= DENSE_BACKEND_MAX_VERTICES
                            else "implicit")
        if self.backend == "spectral":
            evals, evecs = bg.spectrum
            if self.modes is not None:
                evals, evecs = evals[:self.modes], evecs[:, :self.modes]
            decay = np.exp(-evals * self.epsilon)
            self._impl = (evals, evecs, decay, bg.M.weights)
        elif self.backend == "implicit":
            tau = self.epsilon / self.substeps
            a = bg.M.weights
            op = (diags(a) + tau * bg.S.matrix).tocsc()
            self._impl = (splu(op), a)
        else:
            raise ConfigError(f"unknown heat backend {self.backend!r}")

    def apply(self, f):
        """Smooth a vertex field."""
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.mesh.n_vertices:
            raise DimensionMismatch("field does not match mesh vertices")
        if self.backend == "spectral":
            evals, evecs, decay, a = self._impl
            coeff = evecs.T @ (a * f if f.ndim == 1 else a[:, None] * f)
            return evecs @ (decay * coeff if f.ndim == 1
                            else decay[:, None] * coeff)
        lu, a = self._impl
        g = f
        for _ in range(self.substeps):
            g = lu.solve(a * g if g.ndim == 1 else a[:, None] * g)
        return g

    def apply_measure(self, measure):
        """Smooth a vertex measure into a unit-volume conformal density.

        Mass is conserved exactly; values below the positivity floor
        (1e-12 of the mean) are clamped, and a genuinely negative density
        raises PositivityBreach (epsilon too small for the mesh).
        """
        nu = measure.nu
        areas = self.mesh.vertex_areas
        if self.backend == "spectral":
            evals, evecs, decay, _ = self._impl
            rho = evecs @ (decay * (evecs.T @ nu))
        else:
            rho = self.apply(nu / areas)
        mean = rho @ areas / self.mesh.area
        if rho.min() < -1e-8 * rho.max():
            raise PositivityBreach(
                f"smoothed density reached {rho.min():.3e}; "
                "epsilon too small for this mesh")
        rho = np.maximum(rho, 1e-12 * mean)
        return fem.ConformalDensity.normalized(self.mesh, rho)


def heat_operator(mesh, epsilon, backend="auto", **kwargs):
    return HeatOperator(mesh=mesh, epsilon=epsilon, backend=backend, **kwargs)


def heat_apply(K, f):
    return K.apply(f)


def heat_of_measure(K, nu):
    return K.apply_measure(nu)
