"""Single-excitation simulator of synthetic frequency lattices."""
from .model import (
    DriveTone,
    ModeLattice,
    QubitCoupler,
    SingleExcitationState,
    build_lab_hamiltonian,
    build_rwa_hamiltonian,
    dispersion_analytic,
    effective_flux,
)
from .evolution import DecoherenceParams, Schedule, Segment, evolve_static, run_schedule
from .protocols import (
    DoubleTone,
    ExperimentConfig,
    Reversal,
    SingleSitePrep,
    SingleTone,
    WavePacketPrep,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "DecoherenceParams", "DoubleTone", "DriveTone", "ExperimentConfig", "ModeLattice",
    "QubitCoupler", "Reversal", "Schedule", "Segment", "SingleExcitationState",
    "SingleSitePrep", "SingleTone", "WavePacketPrep", "build_lab_hamiltonian",
    "build_rwa_hamiltonian", "dispersion_analytic", "effective_flux", "evolve_static",
    "run_experiment", "run_schedule", "__version__",
]
