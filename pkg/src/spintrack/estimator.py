"""Grid Bayesian tracking of the qubit frequency and the feedback loop.

The probe step samples single-shot Ramsey outcomes at t_R = 2, 4, ... 300 ns
with the drive at f_est + Delta_p and updates a discretized posterior over the
detuning delta_f = f_qubit - f_est with the likelihood

    P(up | delta_f, t_k) = 1/2 [1 + alpha + beta_vis cos(2 pi (Delta_p - delta_f) t_k)]

Probe and target Ramsey shots default to ideal pi/2 rotations so the forward
model matches this likelihood exactly; finite-burst pulses are available via
``ideal_pulses=False`` (they add a detuning-dependent fringe phase that the
fixed likelihood does not model).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import dynamics
from .noise import (
    ConfigurationError,
    NoiseTrajectory,
    SpectrumModel,
    correlator_variance,
    synthesize_trajectory,
)

#: Per-shot wall time of one Ramsey sequence slot (init + bursts + readout).
DEFAULT_SHOT_SPACING = 31.71e-6


def _default_schedule() -> tuple[float, ...]:
    return tuple(np.arange(1, 151) * 2e-9)


@dataclass(frozen=True)
class EstimatorConfig:
    """Probe-step protocol parameters; defaults follow the hardware protocol."""

    n_shots: int = 150
    t_r_schedule: tuple[float, ...] = field(default_factory=_default_schedule)
    delta_p: float = 50e6
    bin_width: float = 0.25e6
    grid_halfspan: float = 25e6
    alpha: float = 0.25
    beta_vis: float = 0.67
    envelope_t2star: float | None = None
    fresh_prior: bool = True
    prior_drift_sigma: float | None = None  # blur width when carrying the prior

    def __post_init__(self):
        object.__setattr__(self, "t_r_schedule", tuple(self.t_r_schedule))
        if self.n_shots != len(self.t_r_schedule):
            raise ConfigurationError("n_shots must equal the length of the t_R schedule")
        if self.bin_width <= 0:
            raise ConfigurationError("bin_width must be > 0")
        if self.grid_halfspan < self.bin_width:
            raise ConfigurationError("grid_halfspan must cover at least one bin")
        if not 0 < self.beta_vis <= 1 or not 0 <= self.alpha + self.beta_vis <= 1:
            raise ConfigurationError("likelihood needs beta_vis > 0 and 0 <= alpha + beta_vis <= 1")

    def grid_centers(self) -> np.ndarray:
        m = int(round(self.grid_halfspan / self.bin_width))
        return self.bin_width * np.arange(-m, m + 1)


@dataclass(frozen=True)
class PosteriorGrid:
    """Discretized posterior over the frequency detuning."""

    centers: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.centers.shape != self.weights.shape:
            raise ValueError("centers and weights must have the same shape")
        if np.any(self.weights < 0):
            raise ValueError("posterior weights must be >= 0")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("posterior weights must sum to 1")

    @classmethod
    def uniform(cls, config: EstimatorConfig) -> "PosteriorGrid":
        centers = config.grid_centers()
        return cls(centers, np.full(centers.size, 1.0 / centers.size))


def _likelihood(centers: np.ndarray, outcome: int, t_k: float, config: EstimatorConfig) -> np.ndarray:
    r = 1.0 if outcome == dynamics.UP else -1.0
    vis = config.beta_vis
    if config.envelope_t2star is not None:
        vis = vis * math.exp(-((t_k / config.envelope_t2star) ** 2))
    return 0.5 * (1.0 + r * (config.alpha + vis * np.cos(2 * np.pi * (config.delta_p - centers) * t_k)))


def bayes_update(
    posterior: PosteriorGrid, outcome: int, t_k: float, config: EstimatorConfig
) -> PosteriorGrid:
    """One single-shot update; renormalized and underflow-protected."""
    w = posterior.weights * _likelihood(posterior.centers, outcome, t_k, config)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        warnings.warn("posterior vanished after update; reset to uniform", stacklevel=2)
        w = np.full(posterior.centers.size, 1.0)
        total = w.sum()
    return PosteriorGrid(posterior.centers, w / total)


def posterior_from_outcomes(
    outcomes, t_ks, config: EstimatorConfig, prior: PosteriorGrid | None = None
) -> PosteriorGrid:
    """Product of the per-shot likelihoods, accumulated in log space.

    Identical to folding :func:`bayes_update` over the shots (the likelihood
    product commutes); kept vectorized for the feedback loop's inner loop.
    """
    centers = config.grid_centers() if prior is None else prior.centers
    log_w = np.zeros(centers.size) if prior is None else np.log(np.maximum(prior.weights, 1e-300))
    outcomes = np.asarray(outcomes)
    t_ks = np.asarray(t_ks, dtype=float)
    r = np.where(outcomes == dynamics.UP, 1.0, -1.0)[:, None]
    vis = config.beta_vis
    if config.envelope_t2star is not None:
        vis = vis * np.exp(-((t_ks / config.envelope_t2star) ** 2))[:, None]
    phases = 2 * np.pi * t_ks[:, None] * (config.delta_p - centers[None, :])
    like = 0.5 * (1.0 + r * (config.alpha + vis * np.cos(phases)))
    log_w = log_w + np.sum(np.log(np.maximum(like, 1e-300)), axis=0)
    log_w -= log_w.max()
    w = np.exp(log_w)
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        warnings.warn("posterior vanished; reset to uniform", stacklevel=2)
        w = np.full(centers.size, 1.0)
        total = w.sum()
    return PosteriorGrid(centers, w / total)


def estimate_detuning(posterior: PosteriorGrid) -> float:
    """Bin center of the posterior maximum; ties break toward smallest |delta_f|."""
    wmax = posterior.weights.max()
    tied = np.nonzero(posterior.weights >= wmax * (1.0 - 1e-12))[0]
    best = tied[np.argmin(np.abs(posterior.centers[tied]))]
    return float(posterior.centers[best])


def carry_prior(posterior: PosteriorGrid, applied_shift: float, config: EstimatorConfig) -> PosteriorGrid:
    """Posterior re-centered after the controller applied ``applied_shift``.

    Used with ``fresh_prior=False``: the weights are rolled by the applied
    bins, blurred by a drift kernel of width ``prior_drift_sigma`` (default
    one bin), and mixed with a small uniform floor so the tracker can always
    escape a stale mode.
    """
    bins = int(round(applied_shift / config.bin_width))
    w = np.roll(posterior.weights, -bins)
    if bins > 0:
        w[-bins:] = 0.0
    elif bins < 0:
        w[:-bins] = 0.0
    drift = config.prior_drift_sigma if config.prior_drift_sigma is not None else config.bin_width
    if drift > 0:
        half = max(1, int(math.ceil(4 * drift / config.bin_width)))
        x = np.arange(-half, half + 1) * config.bin_width
        kernel = np.exp(-0.5 * (x / drift) ** 2)
        kernel /= kernel.sum()
        w = np.convolve(w, kernel, mode="same")
    w = w + 1e-3 / w.size * max(w.sum(), 1e-300)
    return PosteriorGrid(posterior.centers, w / w.sum())


# -- probe step -----------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    detuning_estimate: float
    shots_used: int
    elapsed: float
    posterior: PosteriorGrid
    outcomes: np.ndarray


def run_probe_step(
    traj: NoiseTrajectory,
    params: dynamics.DeviceParams,
    config: EstimatorConfig,
    rng: np.random.Generator,
    start: float = 0.0,
    f_est_offset: float = 0.0,
    shot_spacing: float = DEFAULT_SHOT_SPACING,
    ideal_pulses: bool = True,
    prior: PosteriorGrid | None = None,
) -> ProbeResult:
    """One Bayesian probe: n_shots Ramsey outcomes against the evolving trajectory.

    Shot k starts at ``start + k * shot_spacing`` and sees the frozen
    trajectory value of its slot; the drive is at f_est + Delta_p where f_est
    = f_qubit_0 + ``f_est_offset``.  Elapsed time is n_shots * shot_spacing.
    """
    t_ks = np.asarray(config.t_r_schedule)
    n = t_ks.size
    t_end = start + n * shot_spacing
    if t_end > traj.duration + traj.dt * 1e-6:
        raise ValueError("trajectory does not span the probe step")
    shot_times = start + np.arange(n) * shot_spacing
    delta_fs = traj.value_at(shot_times)
    f_mw = params.f_qubit_0 + f_est_offset + config.delta_p
    if ideal_pulses:
        dq = (f_est_offset + config.delta_p) - delta_fs
        z = dynamics._ramsey_z_constant(dq, t_ks, params.rabi_per_amplitude, f_mw, params, True)
        p_up = dynamics.readout_probability(
            np.stack([np.zeros(n), np.zeros(n), z], axis=-1), params
        )
        outcomes = (rng.random(n) < p_up).astype(int)
    else:
        outcomes = np.empty(n, dtype=int)
        for k, t_k in enumerate(t_ks):
            outcomes[k] = dynamics.simulate_ramsey_shot(
                t_k, f_mw, traj, params, rng, start=shot_times[k], ideal_pulses=False
            )
    posterior = posterior_from_outcomes(
        outcomes, t_ks, config, prior if prior is not None and not config.fresh_prior else None
    )
    return ProbeResult(
        detuning_estimate=estimate_detuning(posterior),
        shots_used=n,
        elapsed=n * shot_spacing,
        posterior=posterior,
        outcomes=outcomes,
    )


# -- feedback loop ----------------------------------------------------------------

@dataclass(frozen=True)
class FeedbackTiming:
    """Cycle timing; the latency is always recomputed from the parts."""

    shot_spacing: float = DEFAULT_SHOT_SPACING
    t_wait: float = 2e-3
    t_target: float | None = None  # None: same duration as the probe

    def __post_init__(self):
        if self.t_wait < 0:
            raise ConfigurationError("t_wait must be >= 0")
        if self.shot_spacing <= 0:
            raise ConfigurationError("shot_spacing must be > 0")

    def t_probe(self, config: EstimatorConfig) -> float:
        return config.n_shots * self.shot_spacing

    def target_duration(self, config: EstimatorConfig) -> float:
        return self.t_probe(config) if self.t_target is None else self.t_target

    def delta_t(self, config: EstimatorConfig) -> float:
        """Feedback latency T_p/2 + T_w + T_t/2 (probe midpoint to target midpoint)."""
        return 0.5 * self.t_probe(config) + self.t_wait + 0.5 * self.target_duration(config)


@dataclass
class FeedbackState:
    """Controller state while looping probe / update / wait / target."""

    config: EstimatorConfig
    timing: FeedbackTiming
    f_est_offset: float = 0.0
    phase: str = "probe"
    history: list = field(default_factory=list)

    @property
    def delta_t(self) -> float:
        return self.timing.delta_t(self.config)


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    time: float  # target midpoint, s
    delta_f_true: float  # f_qubit - f_qubit_0 at target midpoint, Hz
    delta_f_est: float  # controller estimate of the same, Hz
    residual: float  # delta_f_true - delta_f_est, Hz
    measured_residual: float  # target-step Bayesian re-measurement, Hz


@dataclass(frozen=True)
class FeedbackResult:
    records: tuple[CycleRecord, ...]
    sigma2: float  # mean squared true residual, Hz^2
    sigma2_measured: float
    trajectory: NoiseTrajectory
    timing: FeedbackTiming
    config: EstimatorConfig
    target_outcomes: np.ndarray  # (n_cycles, n_shots) raw target-step outcomes

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.residual for r in self.records])


def run_feedback_loop(
    model: SpectrumModel,
    params: dynamics.DeviceParams,
    config: EstimatorConfig,
    n_cycles: int,
    t_wait: float,
    t_target: float | None = None,
    seed: int = 0,
    shot_spacing: float = DEFAULT_SHOT_SPACING,
    feedback_on: bool = True,
    ideal_pulses: bool = True,
    trajectory: NoiseTrajectory | None = None,
    start_time: float = 0.0,
) -> FeedbackResult:
    """Probe / update / wait / target over one continuous noise trajectory.

    The target step re-measures the residual detuning with the same Ramsey
    protocol; the true residual is read off the trajectory at the target
    midpoint.  sigma2 is the mean squared true residual over cycles.
    """
    if n_cycles < 10:
        raise ValueError("n_cycles must be >= 10")
    timing = FeedbackTiming(shot_spacing=shot_spacing, t_wait=t_wait, t_target=t_target)
    t_probe = timing.t_probe(config)
    t_targ = timing.target_duration(config)
    cycle_time = t_probe + timing.t_wait + t_targ
    if trajectory is None:
        n_samples = int(math.ceil((start_time + n_cycles * cycle_time) / shot_spacing)) + config.n_shots + 4
        trajectory = synthesize_trajectory(model, shot_spacing, n_samples, seed)
    rng = np.random.default_rng([seed, 0xFEEDBAC])
    state = FeedbackState(config=config, timing=timing)
    records = []
    target_outcomes = []
    t = start_time
    target_shots = max(1, int(round(t_targ / shot_spacing)))
    target_config = config if target_shots == config.n_shots else None
    prior: PosteriorGrid | None = None
    for cycle in range(n_cycles):
        state.phase = "probe"
        probe = run_probe_step(
            trajectory, params, config, rng,
            start=t, f_est_offset=state.f_est_offset,
            shot_spacing=shot_spacing, ideal_pulses=ideal_pulses,
            prior=prior,
        )
        t += t_probe
        state.phase = "update"
        if feedback_on:
            state.f_est_offset += probe.detuning_estimate
            if not config.fresh_prior:
                prior = carry_prior(probe.posterior, probe.detuning_estimate, config)
        state.phase = "wait"
        t += timing.t_wait
        state.phase = "target"
        tgt_cfg = target_config or _clipped_config(config, target_shots)
        target = run_probe_step(
            trajectory, params, tgt_cfg, rng,
            start=t, f_est_offset=state.f_est_offset,
            shot_spacing=shot_spacing, ideal_pulses=ideal_pulses,
        )
        t_mid = t + 0.5 * t_targ
        true_now = float(trajectory.value_at(t_mid))
        rec = CycleRecord(
            cycle=cycle,
            time=t_mid,
            delta_f_true=true_now,
            delta_f_est=state.f_est_offset,
            residual=true_now - state.f_est_offset,
            measured_residual=target.detuning_estimate,
        )
        records.append(rec)
        state.history.append((cycle, rec.delta_f_true, rec.delta_f_est))
        target_outcomes.append(target.outcomes)
        t += t_targ
    residuals = np.array([r.residual for r in records])
    measured = np.array([r.measured_residual for r in records])
    return FeedbackResult(
        records=tuple(records),
        sigma2=float(np.mean(residuals**2)),
        sigma2_measured=float(np.mean(measured**2)),
        trajectory=trajectory,
        timing=timing,
        config=config,
        target_outcomes=np.array(target_outcomes),
    )


def _clipped_config(config: EstimatorConfig, n_shots: int) -> EstimatorConfig:
    """Probe config truncated/extended to n_shots by cycling the t_R schedule."""
    sched = list(config.t_r_schedule)
    reps = (n_shots + len(sched) - 1) // len(sched)
    return EstimatorConfig(
        n_shots=n_shots,
        t_r_schedule=tuple((sched * reps)[:n_shots]),
        delta_p=config.delta_p,
        bin_width=config.bin_width,
        grid_halfspan=config.grid_halfspan,
        alpha=config.alpha,
        beta_vis=config.beta_vis,
        envelope_t2star=config.envelope_t2star,
        fresh_prior=config.fresh_prior,
    )


# -- latency sweep ------------------------------------------------------------------

@dataclass(frozen=True)
class LatencySweepResult:
    t_waits: np.ndarray
    delta_ts: np.ndarray
    sigma2: np.ndarray
    sigma_b2: np.ndarray
    diffusion: float  # D in sigma^2 = D dt^alpha + floor^2
    alpha: float
    floor: float
    covariance: np.ndarray


def latency_sweep(
    model: SpectrumModel,
    params: dynamics.DeviceParams,
    config: EstimatorConfig,
    t_wait_values,
    seed: int = 0,
    n_cycles: int = 40,
    t_target: float | None = None,
    shot_spacing: float = DEFAULT_SHOT_SPACING,
) -> LatencySweepResult:
    """Closed-loop residual variance versus latency, with the power-law fit.

    All T_w points run back to back along one continuous seeded trajectory
    (latency effects hinge on noise correlation across delta_t, and sharing
    the record keeps the long-memory scatter common to sigma^2 and sigma_B^2);
    sigma_B^2 is the frequency correlator of that trajectory at each latency.
    The rows are fit to sigma^2 = D * delta_t^alpha + floor^2.
    """
    t_waits = np.asarray(t_wait_values, dtype=float)
    if np.any(t_waits < 0):
        raise ValueError("T_w values must be >= 0")
    timing_probe = FeedbackTiming(shot_spacing=shot_spacing, t_wait=0.0, t_target=t_target)
    t_probe = timing_probe.t_probe(config)
    t_targ = timing_probe.target_duration(config)
    total = sum(n_cycles * (t_probe + tw + t_targ) for tw in t_waits)
    n_samples = int(math.ceil(total / shot_spacing)) + config.n_shots + 8
    trajectory = synthesize_trajectory(model, shot_spacing, n_samples, seed)
    delta_ts, sig2, sigb2 = [], [], []
    t_cursor = 0.0
    for tw in t_waits:
        run = run_feedback_loop(
            model, params, config, n_cycles, tw, t_target,
            seed=seed, shot_spacing=shot_spacing,
            trajectory=trajectory, start_time=t_cursor,
        )
        t_cursor += n_cycles * (t_probe + tw + t_targ)
        dt_lat = run.timing.delta_t(config)
        delta_ts.append(dt_lat)
        sig2.append(run.sigma2)
        sigb2.append(correlator_variance(trajectory, dt_lat))
    delta_ts = np.array(delta_ts)
    sig2 = np.array(sig2)
    sigb2 = np.array(sigb2)

    def law(dt_lat, d, alpha, floor):
        return d * dt_lat**alpha + floor**2

    floor0 = math.sqrt(max(sig2[0] - sigb2[0], (config.bin_width / math.sqrt(12.0)) ** 2))
    d0 = max((sig2.max() - sig2.min()) / (delta_ts.max() ** 0.84), 1e-12)
    # variance estimates carry errors proportional to their value
    popt, pcov = optimize.curve_fit(
        law, delta_ts, sig2, p0=[d0, 0.84, floor0], sigma=sig2, absolute_sigma=False,
        bounds=([0.0, 0.05, 0.0], [np.inf, 2.5, np.inf]), maxfev=20000,
    )
    return LatencySweepResult(
        t_waits=t_waits,
        delta_ts=delta_ts,
        sigma2=sig2,
        sigma_b2=sigb2,
        diffusion=float(popt[0]),
        alpha=float(popt[1]),
        floor=float(popt[2]),
        covariance=pcov,
    )
