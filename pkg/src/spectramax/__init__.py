"""Numerical toolkit for maximizing the first Laplace eigenvalue over
discrete conformal classes on closed surfaces."""

from . import bounds, certify, eig, fem, heat, hyperbolic, maximize, mesh, \
    mosertrudinger
from .mesh import TriMesh, genus, load_mesh, make_flat_torus, \
    make_genus2, make_icosphere
from .fem import ConformalDensity, MassForm, StiffnessForm, mass, rayleigh, \
    stiffness
from .eig import EigenspaceFrame, SpectralData, first_eigenspace, \
    solve_spectrum
from .heat import HeatOperator, VertexMeasure, gaussian_reference, \
    heat_apply, heat_of_measure, heat_operator
from .maximize import OptOptions, OptReport, OptState, ascent_step, \
    directional_score, directional_scores, maximize_at_epsilon, \
    optimize_conformal
from .certify import ELCertificate, el_certificate, gradient_nonconcentration, \
    harmonic_map_report, nodal_domains, nonconcentration_profile
from .hyperbolic import CollarCylinder, MobiusTransform, TestFunctionFamily, \
    collar_mu, cylinder_conformal_factor, degeneration_bound, \
    dichotomy_energies, hersch_balance, stereo_map, test_energy
from .mosertrudinger import MTOptions, MTState, mt_flow, mt_gradient, \
    mt_value, perturb_search, second_variation_check
from .bounds import known_exact, lower_bound, yang_yau

__version__ = "0.1.0"
