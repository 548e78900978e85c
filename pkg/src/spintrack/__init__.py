"""spintrack: driven spin-qubit simulation and frequency-tracking analytics.

Submodules
----------
noise
    Composite one-sided noise spectra, trajectory synthesis, Welch estimation.
dynamics
    Rotating-frame Bloch evolution under pulse schedules with injected noise.
coherence
    Analytic decoherence envelopes, decay fitting, noise-spectroscopy inversion.
estimator
    Grid Bayesian frequency tracking and the probe/update/wait/target loop.
benchmarking
    Single-qubit randomized benchmarking over simulated noisy gates.
presets
    Ready-made noise models and device parameters for the shipped scenarios.
scenarios / cli
    Scenario runner producing CSV bundles, plot scripts, and summaries.
"""

from . import benchmarking, coherence, dynamics, estimator, noise, presets
from .noise import (
    ConfigurationError,
    NoiseTrajectory,
    PowerLawTerm,
    SpectralPeak,
    SpectrumModel,
    correlator_variance,
    derive_larmor_frequencies,
    estimate_psd,
    psd_eval,
    synthesize_trajectory,
)
from .dynamics import (
    BlochState,
    DeviceParams,
    ExperimentSchedule,
    PulseSegment,
    evolve,
    microwave_shift,
    sample_readout,
    simulate_chevron,
    simulate_rabi_trace,
    simulate_ramsey_shot,
)
from .coherence import (
    DecayFit,
    FitError,
    RotatingFrameRates,
    calibrate_A_from_t2star,
    decoherence_function,
    extract_S_at_frabi,
    fit_decay,
    free_decay_envelope,
    rabi_envelope_general,
    rabi_static_envelope,
    rabi_zero_detuning_envelope,
    rotating_frame_rates,
    sigma2_band,
    sigma_from_t2star,
    t2star_from_sigma,
)
from .estimator import (
    EstimatorConfig,
    PosteriorGrid,
    bayes_update,
    estimate_detuning,
    latency_sweep,
    run_feedback_loop,
    run_probe_step,
)
from .benchmarking import (
    CliffordElement,
    RBResult,
    clifford_group,
    generate_rb_sequence,
    simulate_rb,
)

__version__ = "0.1.0"
