"""Polarizability of trapped Rydberg ions from motion-dependent line shifts."""

from .errors import (AmbiguousFit, ConfigError, InconsistentFrequencies, InvalidSideband,
                     MissingInput, NonConvergence, RydpolError, TruncationOverflow,
                     UnconfinedTrap)
from .inference import (FitResult, fit_coherent_alpha, fit_spectrum_pair, fit_thermal_sidebands,
                        power_law_exponent, weighted_average)
from .kick import KickModel, kick_to_alpha
from .lineshape import (ModeSpec, SpectrumDataset, SpectrumModel, VoigtParams, simulate_spectrum,
                        spectrum, spectrum_centroid)
from .phonon_stats import PhononDistribution, coherent_pmf, thermal_pmf, truncation_bound
from .sideband_dynamics import (RabiDataset, RabiModel, excitation_probability,
                                lamb_dicke_parameter, rabi_frequency, simulate_dataset)
from .trap_model import (TrapParameters, calibrate_gradients, line_shift_per_phonon,
                         paper_trap, secular_frequencies)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousFit", "ConfigError", "FitResult", "InconsistentFrequencies", "InvalidSideband",
    "KickModel", "MissingInput", "ModeSpec", "NonConvergence", "PhononDistribution",
    "RabiDataset", "RabiModel", "RydpolError", "SpectrumDataset", "SpectrumModel",
    "TrapParameters", "TruncationOverflow", "UnconfinedTrap", "VoigtParams",
    "calibrate_gradients", "coherent_pmf", "excitation_probability", "fit_coherent_alpha",
    "fit_spectrum_pair", "fit_thermal_sidebands", "kick_to_alpha", "lamb_dicke_parameter",
    "line_shift_per_phonon", "paper_trap", "power_law_exponent", "rabi_frequency",
    "secular_frequencies", "simulate_dataset", "simulate_spectrum", "spectrum",
    "spectrum_centroid", "thermal_pmf", "truncation_bound", "weighted_average",
]
