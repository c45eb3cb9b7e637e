from .jumps import (BatchResult, TrajectoryResult, bin_events, compile_timeline,
                    simulate_batch, simulate_trajectory)
from .qubit import (QubitState, apply_pulse, born_sample, draw_shot_detunings,
                    sample_shot_detuning)
from .rates import (DarkStateFactor, RateMatrix, binned_emission, build_rate_matrix,
                    evolve_populations, evolve_timeline, excited_population, interval_rate_matrix,
                    photon_rate_vector, pump_rate, scattering_rate, steady_state)

__all__ = [
    "BatchResult", "TrajectoryResult", "bin_events", "compile_timeline", "simulate_batch",
    "simulate_trajectory", "QubitState", "apply_pulse", "born_sample", "draw_shot_detunings",
    "sample_shot_detuning", "RateMatrix", "binned_emission", "build_rate_matrix",
    "evolve_populations", "evolve_timeline", "excited_population", "interval_rate_matrix",
    "photon_rate_vector", "pump_rate", "scattering_rate", "steady_state",
    "DarkStateFactor",
]
