"""Composite noise spectra and time-domain synthesis of qubit-frequency noise.

The spectral model is a one-sided power spectral density S(f), f > 0, in
Hz^2/Hz, so that the variance of the frequency fluctuation is
``sigma^2 = integral_0^inf S(f) df``.  Components: power-law terms A^2/f^beta,
a white floor, Gaussian peaks (nuclear Larmor lines), an optional f^2 rise,
and a quasi-static component that lives below the synthesis band and is drawn
once per realization as a constant offset.

Rotating-frame relaxation formulas elsewhere in this package are written with
the symmetric two-sided density S_L(f) = S(|f|)/2; conversions are documented
at each boundary (see :mod:`spintrack.coherence`).
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special


class ConfigurationError(ValueError):
    """A parameter set violates a structural precondition (not a math domain error)."""


#: Nuclear gyromagnetic ratios gamma/2pi in MHz/T.  The species are fixed by
#: the host material; the numbers are tabulated configuration constants.
GYROMAGNETIC_RATIOS_MHZ_PER_T = {
    "75As": 7.29,
    "69Ga": 10.22,
    "71Ga": 12.98,
}


@dataclass(frozen=True)
class PowerLawTerm:
    """One power-law component A^2/f^beta (one-sided), amplitude A in Hz."""

    amplitude: float
    exponent: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigurationError("power-law amplitude must be >= 0")
        if not 0.0 <= self.exponent <= 3.0:
            raise ConfigurationError("power-law exponent must lie in [0, 3]")


@dataclass(frozen=True)
class SpectralPeak:
    """Gaussian spectral line: height * exp(-(f - center)^2 / (2 width^2))."""

    center: float
    height: float
    width: float

    def __post_init__(self):
        if self.center <= 0 or self.height < 0 or self.width <= 0:
            raise ConfigurationError("peak requires center > 0, height >= 0, width > 0")


@dataclass(frozen=True)
class SpectrumModel:
    """One-sided composite noise PSD defined on the band [f_low, f_high].

    Parameters
    ----------
    power_laws : sequence of PowerLawTerm
    white_floor : float
        Frequency-independent density, Hz^2/Hz.
    peaks : sequence of SpectralPeak
    quasi_static_sigma : float
        Std (Hz) of the constant per-realization offset injected below the
        band by :func:`synthesize_trajectory`.
    f_low, f_high : float
        Band over which the model is defined and synthesized, Hz.  f_high may
        be ``math.inf`` for analytic work but must be finite to synthesize.
    f_squared_coeff : float
        Optional quadratic rise coeff * f^2 (Hz^2/Hz per Hz^2) standing in for
        the unresolved high-frequency mechanism above ~20 MHz.
    """

    power_laws: tuple[PowerLawTerm, ...] = ()
    white_floor: float = 0.0
    peaks: tuple[SpectralPeak, ...] = ()
    quasi_static_sigma: float = 0.0
    f_low: float = 1.0
    f_high: float = 1e7
    f_squared_coeff: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "power_laws", tuple(self.power_laws))
        object.__setattr__(self, "peaks", tuple(self.peaks))
        if self.f_low <= 0:
            raise ConfigurationError("f_low must be > 0")
        if not self.f_high > self.f_low:
            raise ConfigurationError("f_high must exceed f_low")
        if self.white_floor < 0 or self.quasi_static_sigma < 0 or self.f_squared_coeff < 0:
            raise ConfigurationError("densities and sigmas must be >= 0")

    def tag(self) -> str:
        """Compact provenance string for trajectories."""
        bits = [f"pl{t.exponent:g}A{t.amplitude:g}" for t in self.power_laws]
        if self.white_floor:
            bits.append(f"wf{self.white_floor:g}")
        for p in self.peaks:
            bits.append(f"pk{p.center:g}")
        if self.quasi_static_sigma:
            bits.append(f"qs{self.quasi_static_sigma:g}")
        if self.f_squared_coeff:
            bits.append(f"f2{self.f_squared_coeff:g}")
        band = f"[{self.f_low:g},{self.f_high:g}]"
        return "+".join(bits) + band if bits else "zero" + band


@dataclass(frozen=True)
class NoiseTrajectory:
    """Uniformly sampled realization of the frequency detuning delta-f(t), Hz."""

    dt: float
    samples: np.ndarray
    seed: int
    model_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.samples.size < 2:
            raise ValueError("a trajectory needs at least 2 samples")

    @property
    def duration(self) -> float:
        return self.samples.size * self.dt

    def value_at(self, t: float | np.ndarray) -> np.ndarray:
        """Zero-order-hold sample value at time(s) t in [0, duration)."""
        idx = np.minimum((np.asarray(t) / self.dt).astype(int), self.samples.size - 1)
        return self.samples[idx]


def psd_eval(model: SpectrumModel, f) -> np.ndarray | float:
    """Evaluate the one-sided model PSD at frequency f > 0 (Hz^2/Hz)."""
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr <= 0):
        raise ValueError("psd_eval requires f > 0")
    s = np.full_like(f_arr, model.white_floor)
    for term in model.power_laws:
        s += term.amplitude**2 / f_arr**term.exponent
    for peak in model.peaks:
        s += peak.height * np.exp(-((f_arr - peak.center) ** 2) / (2 * peak.width**2))
    if model.f_squared_coeff:
        s += model.f_squared_coeff * f_arr**2
    return s if np.ndim(f) else float(s)


def band_power(model: SpectrumModel, f1: float, f2: float) -> float:
    """Integral of the one-sided PSD over [f1, f2] (Hz^2), analytic per component.

    The quasi-static component is *not* included; it lives below f_low.
    """
    f1 = max(f1, model.f_low)
    f2 = min(f2, model.f_high)
    if not f2 > f1:
        return 0.0
    total = model.white_floor * (f2 - f1)
    for term in model.power_laws:
        b = term.exponent
        if abs(b - 1.0) < 1e-12:
            total += term.amplitude**2 * math.log(f2 / f1)
        else:
            total += term.amplitude**2 * (f2 ** (1 - b) - f1 ** (1 - b)) / (1 - b)
    for peak in model.peaks:
        w = peak.width * math.sqrt(2.0)
        total += (
            peak.height
            * peak.width
            * math.sqrt(math.pi / 2.0)
            * (math.erf((f2 - peak.center) / w) - math.erf((f1 - peak.center) / w))
        )
    if model.f_squared_coeff:
        total += model.f_squared_coeff * (f2**3 - f1**3) / 3.0
    return total


def synthesize_trajectory(
    model: SpectrumModel,
    dt: float,
    n: int,
    seed: int,
    include_quasi_static: bool = True,
) -> NoiseTrajectory:
    """Draw a stationary Gaussian realization whose one-sided PSD is psd_eval.

    Frequency-domain synthesis: every rfft bin inside [f_low, f_high] gets
    independent Gaussian quadratures with variance S(f_k) * df, which makes the
    expected periodogram equal to the model by construction.  The quasi-static
    component is one additional N(0, quasi_static_sigma) constant.

    Deterministic per (model, dt, n, seed).
    """
    if n < 2:
        raise ConfigurationError("n must be >= 2")
    if not math.isfinite(model.f_high):
        raise ConfigurationError("synthesis requires a finite f_high")
    nyquist = 0.5 / dt
    if model.f_high > nyquist * (1 + 1e-12):
        raise ConfigurationError(
            f"Nyquist violation: f_high={model.f_high:g} Hz exceeds 1/(2 dt)={nyquist:g} Hz"
        )
    if n * dt < 1.0 / model.f_low:
        warnings.warn(
            "trajectory shorter than 1/f_low; the band is not fully resolved",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    freqs = np.fft.rfftfreq(n, dt)
    df = 1.0 / (n * dt)
    sd = np.zeros(freqs.size)
    in_band = (freqs >= model.f_low) & (freqs <= model.f_high) & (freqs > 0)
    if np.any(in_band):
        sd[in_band] = np.sqrt(psd_eval(model, freqs[in_band]) * df)
    a = rng.normal(size=freqs.size) * sd
    b = rng.normal(size=freqs.size) * sd
    spec = (a - 1j * b) * (n / 2.0)
    spec[0] = 0.0
    if n % 2 == 0:
        # Nyquist bin contributes c * (-1)^j with c = spec[-1]/n; keep variance S*df
        spec[-1] = a[-1] * n
    x = np.fft.irfft(spec, n=n)
    if include_quasi_static and model.quasi_static_sigma > 0:
        x = x + rng.normal(0.0, model.quasi_static_sigma)
    return NoiseTrajectory(dt=dt, samples=x, seed=seed, model_tag=model.tag())


def estimate_psd(traj: NoiseTrajectory, segment_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Welch PSD of a trajectory: Hann window, 50% overlap, one-sided density.

    Returns (frequencies Hz, PSD Hz^2/Hz).  The integral of the estimate over
    frequency equals the sample variance (window-corrected) as long as the
    segments resolve the band, i.e. segment_len * dt >~ 1/f_low.
    """
    if segment_len > traj.samples.size:
        raise ValueError("segment_len exceeds the trajectory length")
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise ValueError("segment_len must be a power of two")
    freqs, psd = signal.welch(
        traj.samples,
        fs=1.0 / traj.dt,
        window="hann",
        nperseg=segment_len,
        noverlap=segment_len // 2,
        detrend="constant",
        return_onesided=True,
        scaling="density",
    )
    return freqs, psd


def correlator_variance(traj: NoiseTrajectory, delta_t: float) -> float:
    """Mean squared increment <(x(t + delta_t) - x(t))^2> at lag delta_t."""
    if delta_t < traj.dt:
        raise ValueError("lag must be at least one sample interval")
    m = int(round(delta_t / traj.dt))
    if m >= traj.samples.size:
        raise ValueError("lag exceeds the trajectory duration")
    if delta_t > traj.duration / 10:
        warnings.warn("lag exceeds a tenth of the trajectory; statistics are thin", stacklevel=2)
    d = traj.samples[m:] - traj.samples[:-m]
    return float(np.mean(d * d))


def derive_larmor_frequencies(
    b_total: float,
    ratios_mhz_per_t: dict[str, float] | None = None,
) -> dict[str, float]:
    """Nuclear Larmor frequencies f = (gamma/2pi) * B_total, Hz, per species."""
    if b_total < 0:
        raise ValueError("B_total must be >= 0")
    ratios = GYROMAGNETIC_RATIOS_MHZ_PER_T if ratios_mhz_per_t is None else ratios_mhz_per_t
    return {species: r * 1e6 * b_total for species, r in ratios.items()}


# -- key-value serialization ------------------------------------------------

def model_to_items(model: SpectrumModel) -> dict[str, str]:
    """Flatten a SpectrumModel into string key-value pairs."""
    items: dict[str, str] = {
        "white_floor": repr(model.white_floor),
        "quasi_static_sigma": repr(model.quasi_static_sigma),
        "f_low": repr(model.f_low),
        "f_high": repr(model.f_high),
        "f_squared_coeff": repr(model.f_squared_coeff),
    }
    for i, t in enumerate(model.power_laws):
        items[f"power_law.{i}.amplitude"] = repr(t.amplitude)
        items[f"power_law.{i}.exponent"] = repr(t.exponent)
    for i, p in enumerate(model.peaks):
        items[f"peak.{i}.center"] = repr(p.center)
        items[f"peak.{i}.height"] = repr(p.height)
        items[f"peak.{i}.width"] = repr(p.width)
    return items


def model_from_items(items: dict[str, str]) -> SpectrumModel:
    """Inverse of :func:`model_to_items`; raises ConfigurationError on bad fields."""
    def grab(prefix: str, fields: tuple[str, ...]):
        found: dict[int, dict[str, float]] = {}
        for key, val in items.items():
            parts = key.split(".")
            if len(parts) == 3 and parts[0] == prefix:
                try:
                    idx = int(parts[1])
                    found.setdefault(idx, {})[parts[2]] = float(val)
                except ValueError as exc:
                    raise ConfigurationError(f"bad value for {key}: {val!r}") from exc
        out = []
        for idx in sorted(found):
            entry = found[idx]
            missing = set(fields) - set(entry)
            if missing:
                raise ConfigurationError(f"{prefix}.{idx} is missing fields {sorted(missing)}")
            out.append(tuple(entry[f] for f in fields))
        return out

    def scalar(name: str, default: float) -> float:
        if name not in items:
            return default
        try:
            return float(items[name])
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {name}: {items[name]!r}") from exc

    try:
        return SpectrumModel(
            power_laws=tuple(PowerLawTerm(a, b) for a, b in grab("power_law", ("amplitude", "exponent"))),
            white_floor=scalar("white_floor", 0.0),
            peaks=tuple(SpectralPeak(c, h, w) for c, h, w in grab("peak", ("center", "height", "width"))),
            quasi_static_sigma=scalar("quasi_static_sigma", 0.0),
            f_low=scalar("f_low", 1.0),
            f_high=scalar("f_high", 1e7),
            f_squared_coeff=scalar("f_squared_coeff", 0.0),
        )
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
