"""Elastic surface waves in stratified anisotropic media.

Modules
-------
model      stiffness profiles, validation, model files
acoustic   acoustic triple, limiting velocity, sextic roots
spectrum   discrete spectrum of the depth operator, dispersion
impedance  surface impedance, Barnett-Lothe condition, secular root
weyl       phase-space areas and eigenvalue counts
raytrace   Hamiltonian rays, phase and transport amplitude
modes      normal-mode catalogs of radial models
cli        command-line interface
"""

from .acoustic import acoustic_triple, limiting_velocity, sextic
from .errors import *  # noqa: F401,F403
from .impedance import barnett_lothe, impedance_derivative, root_matrix, secular_root
from .model import MaterialModel, layered_isotropic, load_model, model_from_dict, validate
from .modes import ModeEntry, asymptotic_mode_solution, mode_catalog
from .raytrace import (HamiltonianField, RayState, build_hamiltonian, group_and_phase_velocity, trace_ray,
                       transport_amplitude)
from .spectrum import (counting_function, discrete_spectrum, dispersion_curve, love_spectrum,
                       monoclinic_spectrum, rayleigh_spectrum, ti_spectrum)
from .weyl import monte_carlo_area, phase_space_volume, weyl_check

__version__ = "0.1.0"
