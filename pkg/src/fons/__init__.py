"""Singular-set diagnostics for energy conservation of rough vector fields
on the periodic torus."""

from .grid import Field, InvalidFieldError, PeriodicGrid, TimeField
from .sets import SingularSet, SingularSetFamily, minkowski_dimension, uniform_minkowski_dimension
from .synthesis import SynthesisSpec, singular_field, smooth_field, weierstrass_field
from .besov import beta_model_zeta, beta_model_holder, sharp_gamma, effective_exponent
from .flux import commutator, energy_flux, flux_split, mollify
from .harness import ExperimentConfig, gamma_threshold, run_experiment, threshold_sweep

__version__ = "0.1.0"

__all__ = [
    "Field", "InvalidFieldError", "PeriodicGrid", "TimeField",
    "SingularSet", "SingularSetFamily", "minkowski_dimension", "uniform_minkowski_dimension",
    "SynthesisSpec", "singular_field", "smooth_field", "weierstrass_field",
    "beta_model_zeta", "beta_model_holder", "sharp_gamma", "effective_exponent",
    "commutator", "energy_flux", "flux_split", "mollify",
    "ExperimentConfig", "gamma_threshold", "run_experiment", "threshold_sweep",
]
