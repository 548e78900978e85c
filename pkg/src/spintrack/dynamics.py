"""Rotating-frame qubit dynamics under pulse schedules and injected noise.

State convention: Bloch vector with the prepared (up) spin at z = +1.  A
segment's ``frequency`` is the rotating-frame reference f_MW; during a drive
the spin rotates about (f_rabi cos(phase), f_rabi sin(phase), Delta_q(t)) with
Delta_q(t) = f_MW - (f_qubit_0 + delta_f(t) + microwave_shift).  Off-resonant
segments apply the amplitude-induced shift but no rotation term; idle segments
apply neither.  The readout signal is P(up) = [1 + alpha + beta_vis*(-z)]/2,
so a flipped spin (z = -1) gives the maximal up-spin signal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .noise import ConfigurationError, NoiseTrajectory, SpectrumModel, psd_eval

UP, DOWN = 1, 0


@dataclass(frozen=True)
class DeviceParams:
    """Static device calibration.

    rabi_per_amplitude converts drive amplitude (arbitrary units) to f_rabi in
    Hz; shift_coeff/shift_exponent give the microwave-induced frequency shift
    c * amplitude**p in Hz; gamma_1 is the longitudinal relaxation rate (1/s);
    readout_alpha/readout_beta_vis parameterize the single-shot visibility.
    shift_settling_time > 0 makes the induced shift settle exponentially with
    cumulative microwave-on time instead of instantaneously.
    """

    f_qubit_0: float
    rabi_per_amplitude: float
    b_ext: float = 1.01
    b_mm_z: float = 0.070
    shift_coeff: float = 0.0
    shift_exponent: float = 2.0
    gamma_1: float = 0.0
    readout_alpha: float = 0.25
    readout_beta_vis: float = 0.67
    shift_settling_time: float = 0.0

    def __post_init__(self):
        if self.rabi_per_amplitude <= 0:
            raise ConfigurationError("rabi_per_amplitude must be > 0")
        if self.gamma_1 < 0:
            raise ConfigurationError("gamma_1 must be >= 0")
        a, b = self.readout_alpha, self.readout_beta_vis
        if not (b > 0 and 0.0 <= a + b <= 1.0):
            raise ConfigurationError("readout must satisfy beta_vis > 0 and 0 <= alpha + beta_vis <= 1")

    @property
    def b_total(self) -> float:
        return self.b_ext + self.b_mm_z


@dataclass(frozen=True)
class PulseSegment:
    kind: str  # "drive" | "off_resonant" | "idle"
    frequency: float  # rotating-frame reference f_MW, Hz
    amplitude: float
    phase: float
    duration: float

    def __post_init__(self):
        if self.kind not in ("drive", "off_resonant", "idle"):
            raise ConfigurationError(f"unknown segment kind {self.kind!r}")
        if self.duration < 0 or self.amplitude < 0:
            raise ConfigurationError("duration and amplitude must be >= 0")


@dataclass(frozen=True)
class ExperimentSchedule:
    """Ordered microwave segments followed by a projective readout."""

    segments: tuple[PulseSegment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.total_duration <= 0:
            raise ConfigurationError("schedule must have positive total duration")

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass(frozen=True)
class BlochState:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.norm() > 1 + 1e-9:
            raise ValueError("Bloch vector norm exceeds 1")

    @classmethod
    def up(cls) -> "BlochState":
        return cls(0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, v) -> "BlochState":
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def norm(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)


def microwave_shift(params: DeviceParams, amplitude: float) -> float:
    """Amplitude-induced qubit-frequency shift c * amplitude**p, Hz."""
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if amplitude == 0:
        return 0.0
    return params.shift_coeff * amplitude**params.shift_exponent


def rotate(vecs: np.ndarray, axes: np.ndarray, durations) -> np.ndarray:
    """Rodrigues rotation of Bloch vectors about axes (Hz) for given durations.

    Rotation angle is 2*pi*|axis|*duration, right-handed.  Shapes broadcast:
    vecs (..., 3), axes (..., 3), durations (...).
    """
    vecs = np.asarray(vecs, dtype=float)
    axes = np.asarray(axes, dtype=float)
    norm = np.linalg.norm(axes, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    k = axes / safe
    ang = 2 * np.pi * norm[..., 0] * np.asarray(durations)
    c = np.cos(ang)[..., None]
    s = np.sin(ang)[..., None]
    dot = np.sum(k * vecs, axis=-1, keepdims=True)
    out = vecs * c + np.cross(k, vecs) * s + k * dot * (1 - c)
    return np.where(norm > 0, out, vecs)


def _relax(vecs: np.ndarray, gamma_1: float, duration) -> np.ndarray:
    """Transverse shrink at gamma_1/2 and z relaxation toward +1 at gamma_1."""
    if gamma_1 == 0:
        return vecs
    duration = np.asarray(duration)
    et = np.exp(-gamma_1 * duration)
    ett = np.exp(-0.5 * gamma_1 * duration)
    out = np.array(vecs, copy=True)
    out[..., 0] *= ett
    out[..., 1] *= ett
    out[..., 2] = 1.0 + (out[..., 2] - 1.0) * et
    return out


def _iter_pieces(traj: NoiseTrajectory, start: float, duration: float):
    """Yield (sample_index, piece_length) covering [start, start+duration)."""
    if duration <= 0:
        return
    eps = traj.dt * 1e-9
    t_end = start + duration
    if t_end > traj.duration + eps:
        raise ValueError("segment extends beyond the noise trajectory")
    t = start
    n = traj.samples.size
    while t_end - t > eps:
        i = min(int((t + eps) / traj.dt), n - 1)
        t_next = min((i + 1) * traj.dt, t_end)
        yield i, t_next - t
        t = t_next


def _segment_terms(segment: PulseSegment, params: DeviceParams):
    """(rabi_x, rabi_y, shift) for a segment; shift applies to any microwave kind."""
    if segment.kind == "idle":
        return 0.0, 0.0, 0.0
    shift = microwave_shift(params, segment.amplitude)
    if segment.kind == "off_resonant":
        return 0.0, 0.0, shift
    f_rabi = params.rabi_per_amplitude * segment.amplitude
    return f_rabi * math.cos(segment.phase), f_rabi * math.sin(segment.phase), shift


def _shift_factor(params: DeviceParams, on_time) -> float | np.ndarray:
    if params.shift_settling_time <= 0:
        return 1.0
    return 1.0 - np.exp(-np.asarray(on_time) / params.shift_settling_time)


def evolve(
    state: BlochState,
    segment: PulseSegment,
    traj: NoiseTrajectory,
    params: DeviceParams,
    start: float = 0.0,
    mw_on_before: float = 0.0,
) -> BlochState:
    """Propagate through one segment with zero-order-hold noise.

    Each noise sample overlapped by the segment contributes one exact
    axis-angle rotation about (f_rabi cos phi, f_rabi sin phi, Delta_q);
    relaxation is applied per piece as a split step.  Over a constant noise
    slice with gamma_1 = 0 the result is exact for any trajectory dt;
    otherwise dt should satisfy dt <= 1/(20 max(f_rabi, |Delta_q|)).

    ``start`` is the segment's offset into the trajectory, ``mw_on_before``
    the cumulative continuous microwave-on time before this segment (only
    relevant when shift_settling_time > 0).
    """
    rx, ry, shift = _segment_terms(segment, params)
    v = state.array()
    idx = [i for i, _ in _iter_pieces(traj, start, segment.duration)]
    if not idx:
        return state
    values = traj.samples[idx]
    constant = np.ptp(values) == 0.0 and params.shift_settling_time <= 0
    if constant and params.gamma_1 == 0:
        dq = segment.frequency - (params.f_qubit_0 + values[0] + shift)
        v = rotate(v, np.array([rx, ry, dq]), segment.duration)
        return BlochState.from_array(v)
    if not constant:
        _check_step_size(traj.dt, rx, ry, segment, params, values)
    elapsed = 0.0
    for i, length in _iter_pieces(traj, start, segment.duration):
        factor = 1.0
        if params.shift_settling_time > 0 and segment.kind != "idle":
            factor = _shift_factor(params, mw_on_before + elapsed + 0.5 * length)
        dq = segment.frequency - (params.f_qubit_0 + traj.samples[i] + shift * factor)
        v = rotate(v, np.array([rx, ry, dq]), length)
        v = _relax(v, params.gamma_1, length)
        elapsed += length
    return BlochState.from_array(v)


def _check_step_size(dt, rx, ry, segment, params, values):
    f_rabi = math.hypot(rx, ry)
    dq_max = abs(segment.frequency - params.f_qubit_0) + float(np.max(np.abs(values)))
    fmax = max(f_rabi, dq_max)
    if fmax > 0 and dt > 1.0 / (20.0 * fmax):
        warnings.warn(
            f"trajectory dt={dt:g} s is coarse for max(f_rabi, |Delta_q|)={fmax:g} Hz; "
            "accuracy degrades beyond dt = 1/(20 f)",
            stacklevel=3,
        )


def run_schedule(
    state: BlochState,
    schedule: ExperimentSchedule,
    traj: NoiseTrajectory,
    params: DeviceParams,
    start: float = 0.0,
) -> BlochState:
    """Propagate through all segments in order (no readout)."""
    t = start
    mw_on = 0.0
    for seg in schedule.segments:
        state = evolve(state, seg, traj, params, start=t, mw_on_before=mw_on)
        t += seg.duration
        mw_on = mw_on + seg.duration if seg.kind != "idle" else 0.0
    return state


def readout_probability(state: BlochState | np.ndarray, params: DeviceParams):
    """P(up-signal) = [1 + alpha + beta_vis * (-z)] / 2."""
    z = state.z if isinstance(state, BlochState) else np.asarray(state)[..., 2]
    p = 0.5 * (1.0 + params.readout_alpha + params.readout_beta_vis * (-z))
    if np.any(p < -1e-9) or np.any(p > 1 + 1e-9):
        raise ConfigurationError("readout probability escaped [0, 1]; check alpha/beta_vis")
    return np.clip(p, 0.0, 1.0)


def sample_readout(state: BlochState, params: DeviceParams, rng: np.random.Generator) -> int:
    """Draw one projective outcome: 1 = up-signal, 0 = down."""
    return UP if rng.random() < readout_probability(state, params) else DOWN


# -- Ramsey -------------------------------------------------------------------

def ramsey_sequence(
    t_r: float,
    f_mw: float,
    params: DeviceParams,
    amplitude: float = 1.0,
    off_resonant_compensation: bool = False,
    preburst: float = 200e-9,
) -> ExperimentSchedule:
    """pi/2 - idle(t_r) - pi/2, with optional off-resonant fill and pre-burst.

    The pi/2 bursts last (4 f_rabi)^-1.  With compensation the idle interval
    carries an off-resonant burst of equal amplitude (same induced shift, no
    rotation) and an off-resonant pre-burst precedes the first pulse.
    """
    f_rabi = params.rabi_per_amplitude * amplitude
    tau = 1.0 / (4.0 * f_rabi)
    pulse = PulseSegment("drive", f_mw, amplitude, 0.0, tau)
    segs = []
    if off_resonant_compensation and preburst > 0:
        segs.append(PulseSegment("off_resonant", f_mw, amplitude, 0.0, preburst))
    segs.append(pulse)
    if t_r > 0:
        kind = "off_resonant" if off_resonant_compensation else "idle"
        segs.append(PulseSegment(kind, f_mw, amplitude if off_resonant_compensation else 0.0, 0.0, t_r))
    segs.append(pulse)
    return ExperimentSchedule(tuple(segs))


def ramsey_final_state(
    t_r: float,
    f_mw: float,
    traj: NoiseTrajectory,
    params: DeviceParams,
    amplitude: float = 1.0,
    off_resonant_compensation: bool = False,
    ideal_pulses: bool = False,
    start: float = 0.0,
) -> BlochState:
    """Final Bloch state of one Ramsey sequence against the trajectory.

    With ideal_pulses the two pi/2 rotations are instantaneous exact rotations
    about +x (no trajectory time consumed), which makes the fringe match the
    textbook cos(2 pi Delta_q t_r) likelihood exactly.
    """
    if t_r < 0:
        raise ValueError("t_r must be >= 0")
    if not ideal_pulses:
        sched = ramsey_sequence(t_r, f_mw, params, amplitude, off_resonant_compensation)
        return run_schedule(BlochState.up(), sched, traj, params, start=start)
    v = rotate(BlochState.up().array(), np.array([1.0, 0.0, 0.0]), 0.25)
    if t_r > 0:
        kind = "off_resonant" if off_resonant_compensation else "idle"
        amp = amplitude if off_resonant_compensation else 0.0
        idle = PulseSegment(kind, f_mw, amp, 0.0, t_r)
        v = evolve(BlochState.from_array(v), idle, traj, params, start=start).array()
    v = rotate(v, np.array([1.0, 0.0, 0.0]), 0.25)
    return BlochState.from_array(v)


def simulate_ramsey_shot(
    t_r: float,
    f_mw: float,
    traj: NoiseTrajectory,
    params: DeviceParams,
    rng: np.random.Generator,
    amplitude: float = 1.0,
    off_resonant_compensation: bool = False,
    ideal_pulses: bool = False,
    start: float = 0.0,
) -> int:
    """One single-shot Ramsey outcome (1 = up-signal)."""
    state = ramsey_final_state(
        t_r, f_mw, traj, params, amplitude, off_resonant_compensation, ideal_pulses, start
    )
    return sample_readout(state, params, rng)


# -- Monte-Carlo traces -------------------------------------------------------

@dataclass(frozen=True)
class TraceResult:
    """Averaged up-signal probability versus a control variable."""

    times: np.ndarray
    p_up: np.ndarray
    stderr: np.ndarray


def _synthesize_matrix(
    model: SpectrumModel, dt: float, n: int, count: int, rng: np.random.Generator
) -> np.ndarray:
    """(count, n) independent realizations; same construction as synthesize_trajectory."""
    nyquist = 0.5 / dt
    if model.f_high > nyquist * (1 + 1e-12):
        raise ConfigurationError("Nyquist violation in batch synthesis")
    freqs = np.fft.rfftfreq(n, dt)
    df = 1.0 / (n * dt)
    sd = np.zeros(freqs.size)
    in_band = (freqs >= model.f_low) & (freqs <= model.f_high) & (freqs > 0)
    if np.any(in_band):
        sd[in_band] = np.sqrt(psd_eval(model, freqs[in_band]) * df)
    a = rng.normal(size=(count, freqs.size)) * sd
    b = rng.normal(size=(count, freqs.size)) * sd
    spec = (a - 1j * b) * (n / 2.0)
    spec[:, 0] = 0.0
    if n % 2 == 0:
        spec[:, -1] = a[:, -1] * n
    x = np.fft.irfft(spec, n=n, axis=1)
    if model.quasi_static_sigma > 0:
        x += rng.normal(0.0, model.quasi_static_sigma, size=(count, 1))
    return x


def _trace_dt(model: SpectrumModel, f_rabi: float, dq_scale: float) -> float:
    """Step size satisfying both the Nyquist bound and the 20-steps-per-period rule."""
    dt = 1.0 / (20.0 * max(f_rabi, dq_scale, 1.0))
    return min(dt, 0.5 / model.f_high)


def _drive_batch(
    states: np.ndarray,
    delta_f: np.ndarray,
    dq_static: np.ndarray | float,
    f_rabi: float,
    dt: float,
    gamma_1: float,
    record_times: np.ndarray,
):
    """Evolve a batch under constant drive with per-shot noise; record z at times.

    states (N, 3); delta_f (N, n_steps) zero-order-hold noise; dq_static is the
    deterministic part of the detuning.  Returns z (N, len(record_times)).
    """
    order = np.argsort(record_times)
    n_shots = states.shape[0]
    z_out = np.empty((n_shots, record_times.size))
    axes = np.empty((n_shots, 3))
    axes[:, 0] = f_rabi
    axes[:, 1] = 0.0
    t = 0.0
    eps = dt * 1e-9
    for j in order:
        t_target = record_times[j]
        while t_target - t > eps:
            i = int((t + eps) / dt)
            step = min((i + 1) * dt, t_target) - t
            axes[:, 2] = dq_static - delta_f[:, i]
            states = rotate(states, axes, step)
            if gamma_1:
                states = _relax(states, gamma_1, step)
            t += step
        z_out[:, j] = states[:, 2]
    return z_out


def simulate_rabi_trace(
    burst_durations,
    f_mw: float,
    model: SpectrumModel,
    params: DeviceParams,
    n_shots: int,
    seed: int,
    amplitude: float = 1.0,
) -> TraceResult:
    """Averaged Rabi trace: fresh noise realization per shot, exact per-shot P(up).

    Each shot draws one independent trajectory (quasi-static offset plus the
    in-band realization) and is evolved continuously; the up-signal
    probability is recorded at every requested burst duration.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    durations = np.asarray(burst_durations, dtype=float)
    f_rabi = params.rabi_per_amplitude * amplitude
    shift = microwave_shift(params, amplitude)
    dq0 = f_mw - params.f_qubit_0 - shift
    dt = _trace_dt(model, f_rabi, abs(dq0))
    n_steps = int(np.ceil(durations.max() / dt)) + 2
    rng = np.random.default_rng(seed)
    delta_f = _synthesize_matrix(model, dt, n_steps, n_shots, rng)
    states = np.tile([0.0, 0.0, 1.0], (n_shots, 1))
    z = _drive_batch(states, delta_f, dq0, f_rabi, dt, params.gamma_1, durations)
    p_shots = 0.5 * (1.0 + params.readout_alpha + params.readout_beta_vis * (-z))
    return TraceResult(
        times=durations,
        p_up=p_shots.mean(axis=0),
        stderr=p_shots.std(axis=0, ddof=1) / math.sqrt(n_shots) if n_shots > 1 else np.zeros_like(durations),
    )


def ramsey_trace(
    t_r_values,
    f_mw: float,
    model: SpectrumModel,
    params: DeviceParams,
    n_shots: int,
    seed: int,
    amplitude: float = 1.0,
    ideal_pulses: bool = False,
) -> TraceResult:
    """Averaged Ramsey trace with a fresh noise draw per shot.

    For purely quasi-static models every shot reduces to three exact rotations
    and the whole trace is vectorized; band-limited noise falls back to
    stepped evolution per shot.
    """
    t_r = np.asarray(t_r_values, dtype=float)
    rng = np.random.default_rng(seed)
    f_rabi = params.rabi_per_amplitude * amplitude
    has_band = (
        model.white_floor > 0
        or model.f_squared_coeff > 0
        or any(t.amplitude > 0 for t in model.power_laws)
        or any(p.height > 0 for p in model.peaks)
    )
    if not has_band:
        offsets = rng.normal(0.0, model.quasi_static_sigma, size=n_shots)
        dq = f_mw - params.f_qubit_0 - offsets  # no shift during idle
        z = _ramsey_z_constant(dq[:, None], t_r[None, :], f_rabi, f_mw, params, ideal_pulses)
    else:
        dt = _trace_dt(model, f_rabi, abs(f_mw - params.f_qubit_0) + 5 * model.quasi_static_sigma)
        tau = 0.0 if ideal_pulses else 1.0 / (4 * f_rabi)
        n_steps = int(np.ceil((t_r.max() + 2 * tau) / dt)) + 2
        delta_f = _synthesize_matrix(model, dt, n_steps, n_shots, rng)
        z = np.empty((n_shots, t_r.size))
        for s in range(n_shots):
            traj = NoiseTrajectory(dt=dt, samples=delta_f[s], seed=seed, model_tag=model.tag())
            for j, t in enumerate(t_r):
                st = ramsey_final_state(
                    t, f_mw, traj, params, amplitude, ideal_pulses=ideal_pulses
                )
                z[s, j] = st.z
    p_shots = 0.5 * (1.0 + params.readout_alpha + params.readout_beta_vis * (-z))
    return TraceResult(
        times=t_r,
        p_up=p_shots.mean(axis=0),
        stderr=p_shots.std(axis=0, ddof=1) / math.sqrt(n_shots) if n_shots > 1 else np.zeros(t_r.size),
    )


def _ramsey_z_constant(dq, t_r, f_rabi, f_mw, params, ideal_pulses):
    """Vectorized final z for constant per-shot detuning (broadcasting dq, t_r)."""
    dq, t_r = np.broadcast_arrays(dq, t_r)
    n = dq.shape
    if ideal_pulses:
        states = np.tile([0.0, 0.0, 1.0], n + (1,))
        states = rotate(states, np.array([1.0, 0.0, 0.0]), 0.25)
        axis_z = np.zeros(n + (3,))
        axis_z[..., 2] = dq
        states = rotate(states, axis_z, t_r)
        states = rotate(states, np.array([1.0, 0.0, 0.0]), 0.25)
        return states[..., 2]
    tau = 1.0 / (4 * f_rabi)
    pulse_axis = np.zeros(n + (3,))
    pulse_axis[..., 0] = f_rabi
    pulse_axis[..., 2] = dq
    states = np.tile([0.0, 0.0, 1.0], n + (1,))
    states = rotate(states, pulse_axis, tau)
    axis_z = np.zeros(n + (3,))
    axis_z[..., 2] = dq
    states = rotate(states, axis_z, t_r)
    states = rotate(states, pulse_axis, tau)
    return states[..., 2]


# -- chevron ------------------------------------------------------------------

@dataclass(frozen=True)
class ChevronResult:
    deltas: np.ndarray
    durations: np.ndarray
    p_up: np.ndarray  # shape (len(deltas), len(durations))


def simulate_chevron(
    delta_grid,
    durations,
    model: SpectrumModel,
    params: DeviceParams,
    n_shots: int,
    seed: int,
    amplitude: float = 1.0,
) -> ChevronResult:
    """2-D map of P(up) over (drive offset Delta, burst duration)."""
    deltas = np.asarray(delta_grid, dtype=float)
    rows = []
    for i, d in enumerate(deltas):
        trace = simulate_rabi_trace(
            durations,
            params.f_qubit_0 + d,
            model,
            params,
            n_shots,
            seed + 7919 * i,
            amplitude,
        )
        rows.append(trace.p_up)
    return ChevronResult(deltas=deltas, durations=np.asarray(durations, float), p_up=np.array(rows))


def chevron_symmetry_axis(result: ChevronResult, f_rabi: float) -> float:
    """Offset of the chevron symmetry axis, from the visibility-vs-Delta profile.

    The per-row contrast follows f_rabi^2 / (f_rabi^2 + (Delta - axis)^2); the
    axis is recovered by least squares.
    """
    from scipy.optimize import curve_fit

    contrast = result.p_up.max(axis=1) - result.p_up.min(axis=1)

    def profile(delta, axis, c0):
        return c0 * f_rabi**2 / (f_rabi**2 + (delta - axis) ** 2)

    p0 = [result.deltas[int(np.argmax(contrast))], contrast.max()]
    popt, _ = curve_fit(profile, result.deltas, contrast, p0=p0, maxfev=10000)
    return float(popt[0])
