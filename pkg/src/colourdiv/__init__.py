"""Cavity-method population dynamics for the colour diversity problem.

Nodes of a sparse random graph take one of Q colours; each node pays the sum
of squared colour multiplicities over its closed neighbourhood.  The package
solves the replica-symmetric cavity equations by population dynamics, with
closed-form paramagnetic solutions and brute-force instance oracles for
cross-checks.
"""
__version__ = "0.1.0"

from .model import ModelParams, EnsembleSpec, ensemble_from_mean, phi, phi_lambda, min_phi
from .population import Population, init_population, sweep, sweep_sequential, sweep_layered
from .observables import ObservableRecord, measure
from .paramagnet import z_update, z_population, paramagnetic_thermodynamics, \
    paramagnetic_entropy_zero_T, find_zero_entropy_temperature

__all__ = [
    "ModelParams", "EnsembleSpec", "ensemble_from_mean", "phi", "phi_lambda", "min_phi",
    "Population", "init_population", "sweep", "sweep_sequential", "sweep_layered",
    "ObservableRecord", "measure", "z_update", "z_population",
    "paramagnetic_thermodynamics", "paramagnetic_entropy_zero_T",
    "find_zero_entropy_temperature",
]
