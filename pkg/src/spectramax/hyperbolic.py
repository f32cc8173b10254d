"""Collar-cylinder geometry, explicit test functions, and the degeneration
experiment driving the first eigenvalue toward its 8 pi floor.

Everything here works in flat (t, theta) coordinates on the truncated
cylinder: Dirichlet energies are conformally invariant, so the flat closed
forms are exact for the hyperbolic collar metric as well.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateMass,
    DomainViolation,
    NoConvergence,
    OutOfDomain,
)

TWO_PI = 2.0 * math.pi


def collar_mu(l):
    """Collar half-length mu(l) = (pi/l)(pi - 2 arctan(sinh(l/2)))."""
    if l <= 0:
        raise ValueError("geodesic length must be positive")
    return (math.pi / l) * (math.pi - 2.0 * math.atan(math.sinh(0.5 * l)))


@dataclass(frozen=True)
class CollarCylinder:
    """Truncated hyperbolic cylinder around a closed geodesic of length l.

    mu is derived from l; the grid pair sets the default quadrature
    resolution over (-mu, mu) x [0, 2 pi).
    """

    l: float
    mu: float = field(init=False)
    grid: tuple = (2049, 64)

    def __post_init__(self):
        object.__setattr__(self, "mu", collar_mu(self.l))

    def conformal_factor(self, t):
        """Metric factor (l / (2 pi cos(l t / 2 pi)))^2 at height t."""
        t = np.asarray(t, dtype=float)
        if (np.abs(t) >= self.mu).any():
            raise OutOfDomain("t outside (-mu, mu)")
        return (self.l / (TWO_PI * np.cos(self.l * t / TWO_PI))) ** 2

    def t_nodes(self):
        return np.linspace(-self.mu, self.mu, self.grid[0])


def cylinder_conformal_factor(cylinder, t):
    return cylinder.conformal_factor(t)


# -- explicit test functions -------------------------------------------------

_RAMP_COUNT = {
    "psi": 2,
    "phi_l": 1,
    "phi_r": 1,
    "theta_l": 2,
    "theta_r": 2,
    "phi_section4": 2,
    "phi_double": 2,
}


@dataclass(frozen=True)
class TestFunctionFamily:
    """Piecewise-linear cutoff profile on a collar cylinder.

    ``kind`` selects the profile; ``a`` is the ramp width (the role of the
    paper-agnostic cutoff scale).  Values are in [0, 1] and continuous.
    """

    kind: str
    a: float
    cylinder: CollarCylinder

    def __post_init__(self):
        if self.kind not in _RAMP_COUNT:
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.a <= 0:
            raise DomainViolation("ramp width must be positive")
        mu = self.cylinder.mu
        need = 3.0 * self.a if self.kind == "phi_section4" else 2.0 * self.a
        if need >= mu:
            raise DomainViolation(
                f"ramps of width {self.a:g} do not fit in half-length {mu:g}")

    def values(self, t):
        t = np.asarray(t, dtype=float)
        mu, a = self.cylinder.mu, self.a
        if self.kind == "psi":
            up = np.clip((t + mu - a) / a, 0.0, 1.0)
            down = np.clip((mu - a - t) / a, 0.0, 1.0)
            return np.minimum(up, down)
        if self.kind == "phi_l":
            return np.clip((2 * a - mu - t) / a, 0.0, 1.0)
        if self.kind == "phi_r":
            return np.clip((2 * a - mu + t) / a, 0.0, 1.0)
        if self.kind == "theta_l":
            up = np.clip((t + mu) / a, 0.0, 1.0)
            down = np.clip((4 * a - mu - t) / a, 0.0, 1.0)
            return np.minimum(up, down)
        if self.kind == "theta_r":
            up = np.clip((mu - t) / a, 0.0, 1.0)
            down = np.clip((4 * a - mu + t) / a, 0.0, 1.0)
            return np.minimum(up, down)
        if self.kind == "phi_section4":
            up = np.clip((t + mu - 2 * a) / a, 0.0, 1.0)
            down = np.clip((mu - 2 * a - t) / a, 0.0, 1.0)
            return np.minimum(up, down)
        # phi_double: the two one-sided ramps together
        left = np.clip((2 * a - mu - t) / a, 0.0, 1.0)
        right = np.clip((2 * a - mu + t) / a, 0.0, 1.0)
        return left + right


def test_energy(f):
    """Exact flat Dirichlet energy of a test function: 2 pi / a per ramp."""
    return _RAMP_COUNT[f.kind] * TWO_PI / f.a


def dichotomy_energies(l, b, component_boundary_count, genus=None):
    """Energy pair (4 pi / b, 2 pi m / b) of the cylinder/component cutoffs.

    With a genus, the boundary count is checked against its maximum
    2(3 genus - 3).
    """
    m = component_boundary_count
    if m < 1:
        raise DomainViolation("component must have at least one boundary")
    if 3.0 * b >= collar_mu(l):
        raise DomainViolation("cutoff width too large for this collar")
    if genus is not None and m > 2 * (3 * genus - 3):
        raise DomainViolation(
            f"boundary count {m} exceeds 2(3 genus - 3) for genus {genus}")
    return 4.0 * math.pi / b, TWO_PI * m / b


# -- sphere maps and balancing ----------------------------------------------


def stereo_map(t, theta):
    """Conformal cylinder-to-sphere map (sech t cos th, sech t sin th, tanh t)."""
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sech = 1.0 / np.cosh(t)
    return np.stack([sech * np.cos(theta), sech * np.sin(theta),
                     np.tanh(t)], axis=-1)


@dataclass(frozen=True)
class MobiusTransform:
    """Conformal dilation of the sphere toward ``center`` plus a rotation.

    Identity when center = 0 and rotation = I; always a bijection of the
    sphere.
    """

    center: np.ndarray
    rotation: np.ndarray = field(
        default_factory=lambda: np.eye(3))

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (3,) or np.linalg.norm(c) >= 1.0:
            raise ValueError("center must lie in the open unit ball")
        object.__setattr__(self, "center", c)

    def apply(self, points):
        x = np.asarray(points, dtype=float)
        c = self.center
        k = c @ c
        s = x @ c
        denom = (1.0 + 2.0 * s + k)[..., None]
        y = ((1.0 - k) * x + 2.0 * (1.0 + s)[..., None] * c) / denom
        return y @ self.rotation.T


def _center_of_mass(center, points, weights):
    k = center @ center
    s = points @ center
    denom = 1.0 + 2.0 * s + k
    y = ((1.0 - k) * points + 2.0 * (1.0 + s)[:, None] * center)
    return (weights / denom) @ y


def hersch_balance(points, weights, tol=1e-10, max_iterations=500):
    """Find the conformal dilation zeroing the weighted center of mass.

    Damped Newton iteration on the center parameter (finite-difference
    Jacobian, step halving).  Existence away from half-concentrated
    weights is the classical balancing lemma.

    Raises
    ------
    DegenerateMass
        More than half of the total weight on a single point.
    NoConvergence
        Stagnated before reaching ``tol``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    w = np.asarray(weights, dtype=float).ravel()
    if (w < 0).any() or w.sum() <= 0:
        raise DegenerateMass("weights must be nonnegative with positive sum")
    w = w / w.sum()
    if w.max() > 0.5 + 1e-12:
        raise DegenerateMass("more than half of the mass at a single point")

    c = np.zeros(3)
    m = _center_of_mass(c, pts, w)
    for _ in range(max_iterations):
        if np.linalg.norm(m) <= tol:
            return MobiusTransform(center=c.copy())
        h = 1e-7
        J = np.empty((3, 3))
        for d in range(3):
            cd = c.copy()
            cd[d] += h
            if np.linalg.norm(cd) >= 1.0:
                cd[d] -= 2 * h
                J[:, d] = (m - _center_of_mass(cd, pts, w)) / h
            else:
                J[:, d] = (_center_of_mass(cd, pts, w) - m) / h
        try:
            delta = np.linalg.solve(J, -m)
        except np.linalg.LinAlgError:
            delta = -m
        step = 1.0
        improved = False
        for _ in range(60):
            cand = c + step * delta
            norm = np.linalg.norm(cand)
            if norm >= 1.0:
                cand = cand * ((1.0 - 1e-9) / norm)
            m_cand = _center_of_mass(cand, pts, w)
            if np.linalg.norm(m_cand) < np.linalg.norm(m):
                c, m, improved = cand, m_cand, True
                break
            step *= 0.5  # damped step factor
        if not improved:
            raise NoConvergence(
                "balancing stagnated",
                diagnostics={"residual": float(np.linalg.norm(m))})
    raise NoConvergence(
        "balancing iteration budget exhausted",
        diagnostics={"residual": float(np.linalg.norm(m))})


# -- degeneration experiment --------------------------------------------------


def sphere_limit_profile(t):
    """Mass profile of the degenerate extremal: pullback of the round
    sphere area element, density sech^2(t) per dt dtheta (up to scale)."""
    return 1.0 / np.cosh(np.asarray(t, dtype=float)) ** 2


def cylinder_uniform_profile(l, a, margin=3.0):
    """Flat (t, theta)-uniform probability density on the inner region
    |t| <= mu - margin * a."""
    cut = collar_mu(l) - margin * a

    def profile(t):
        t = np.asarray(t, dtype=float)
        return (np.abs(t) <= cut).astype(float)

    return profile


@dataclass(frozen=True)
class DegenerationBound:
    """Rayleigh upper bound extracted from a balanced coordinate function."""

    l: float
    a: float
    bound: float
    coordinate: int
    energy: float
    l2_mass: float
    eta_energy: float
    mass_outside: float
    deficit_constant: float      # observed D with mass_outside = D / a
    excess_constant: float       # observed C with bound <= 8 pi + C / a
    balance_residual: float


def _cylinder_t_grid(mu, a, core_halfwidth=15.0, core_points=3001):
    """t-nodes refined near the waist and at each cutoff ramp."""
    core = min(core_halfwidth, mu - 3.0 * a)
    pieces = [np.linspace(-core, core, core_points)]
    for lo, hi, n in [(mu - 3 * a, mu - a, 129), (mu - a, mu, 65)]:
        if hi > lo:
            seg = np.linspace(lo, hi, n)
            pieces += [seg, -seg]
    if mu - 3 * a > core:
        filler = np.linspace(core, mu - 3 * a, 257)
        pieces += [filler, -filler]
    t = np.unique(np.concatenate(pieces))
    return t


def _trapezoid_weights(t):
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def degeneration_bound(l, a, mass_profile=sphere_limit_profile, n_theta=64):
    """Upper bound for lambda_1 from the balanced cutoff coordinate function.

    Builds the width-``a`` cutoff on the collar of a length-``l`` geodesic,
    maps the cylinder to the sphere, balances the cutoff-weighted mass
    profile with a conformal dilation, and returns energy / L2-mass for the
    selected coordinate (largest mass; near-ties resolved toward the larger
    quotient so the reported bound stays conservative).

    ``mass_profile`` is a callable t -> density per dt dtheta; it is
    normalized on the quadrature grid.
    """
    mu = collar_mu(l)
    if 3.0 * a >= mu:
        raise DomainViolation("need 3a < mu(l)")

    t = _cylinder_t_grid(mu, a)
    wt = _trapezoid_weights(t)
    theta = TWO_PI * np.arange(n_theta) / n_theta
    dtheta = TWO_PI / n_theta

    p = np.asarray(mass_profile(t), dtype=float)
    if (p < 0).any():
        raise DegenerateMass("mass profile must be nonnegative")
    total = (p @ wt) * TWO_PI
    if total <= 0:
        raise DegenerateMass("mass profile vanishes on the cylinder")
    p = p / total

    eta = np.clip((mu - np.abs(t)) / a, 0.0, 1.0)
    inner = np.abs(t) <= mu - a
    mass_outside = float(((1.0 - inner) * p) @ wt * TWO_PI)

    pts = stereo_map(t[:, None], theta[None, :])          # (nt, ntheta, 3)
    w_balance = (eta * p * wt)[:, None] * np.full(n_theta, dtheta)
    transform = hersch_balance(pts.reshape(-1, 3), w_balance.ravel())
    mapped = transform.apply(pts)

    u = eta[:, None, None] * mapped                       # (nt, ntheta, 3)
    # flat Dirichlet energy: slopes per t-interval, per theta-interval
    dt = np.diff(t)
    slope_t = (u[1:] - u[:-1]) / dt[:, None, None]
    energy_t = np.einsum("i,ijc->c", dt, slope_t ** 2) * dtheta
    slope_th = (np.roll(u, -1, axis=1) - u) / dtheta
    energy_th = np.einsum("i,ijc->c", wt, slope_th ** 2) * dtheta

    energies = energy_t + energy_th
    cell = (p * wt)[:, None] * dtheta
    masses = np.einsum("ij,ijc->c", cell, u ** 2)
    moments = np.einsum("ij,ijc->c", cell, u)
    quotients = energies / (masses - moments ** 2)

    best_mass = masses.max()
    tied = masses >= best_mass * (1.0 - 1e-3)
    coord = int(np.flatnonzero(tied)[np.argmax(quotients[tied])])

    bound = float(quotients[coord])
    eight_pi = 8.0 * math.pi
    return DegenerationBound(
        l=l, a=a, bound=bound, coordinate=coord,
        energy=float(energies[coord]), l2_mass=float(masses[coord]),
        eta_energy=4.0 * math.pi / a, mass_outside=mass_outside,
        deficit_constant=mass_outside * a,
        excess_constant=max(0.0, bound - eight_pi) * a,
        balance_residual=float(np.linalg.norm(
            _center_of_mass(transform.center, pts.reshape(-1, 3),
                            w_balance.ravel() / w_balance.sum()))),
    )


def degeneration_sweep(l, a_values, mass_profile=sphere_limit_profile,
                       n_theta=64):
    """Run degeneration_bound over a cutoff schedule, widest ramp last."""
    return [degeneration_bound(l, a, mass_profile, n_theta)
            for a in a_values]
