from .ac import (AcFieldModel, AcFieldParams, AcModelConfig, bessel_j0_series,
                 filter_amplitude, fixed_phase_probability, likelihood_ac, simulate_shot_ac)
from .base import EPS, SensingModel
from .nuclear import (NuclearModelConfig, NuclearSpinModel, NuclearSpinParams, echo_signal,
                      likelihood_nuclear, simulate_shot_nuclear, spin_factors)
from .oracle import oracle_xy84_population, phase_average_quadrature
from .readout import ReadoutFidelity, apply_readout_noise

__all__ = [
    "AcFieldModel", "AcFieldParams", "AcModelConfig", "EPS", "NuclearModelConfig",
    "NuclearSpinModel", "NuclearSpinParams", "ReadoutFidelity", "SensingModel",
    "apply_readout_noise", "bessel_j0_series", "echo_signal", "filter_amplitude",
    "fixed_phase_probability", "likelihood_ac", "likelihood_nuclear",
    "oracle_xy84_population", "phase_average_quadrature", "simulate_shot_ac",
    "simulate_shot_nuclear", "spin_factors",
]
