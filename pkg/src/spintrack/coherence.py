"""Closed-form decoherence envelopes, decay fitting, and spectroscopy inversion.

Convention note.  The spectral model (:class:`~spintrack.noise.SpectrumModel`)
is one-sided, sigma^2 = integral_0^inf S df.  The rotating-frame relaxation
formulas in the literature are written with the symmetric two-sided density
S_L(f) = S(|f|)/2; functions here that quote those formulas (gamma_nu =
2 pi^2 S_L, extract_S_at_frabi, calibrate_A_from_t2star) take and return the
two-sided value.  :func:`s_l_two_sided` performs the mapping.  Both choices
give the same decoherence integral because
``integral_-inf^inf S_L sinc^2 = integral_0^inf S sinc^2``.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .noise import SpectrumModel, band_power, psd_eval


class FitError(RuntimeError):
    """Nonlinear fit failed to converge after bounded restarts."""


def s_l_two_sided(model: SpectrumModel, f) -> float | np.ndarray:
    """Two-sided density S_L(f) = S(|f|)/2 of a one-sided model."""
    return psd_eval(model, f) / 2.0


# -- decoherence function -----------------------------------------------------

def _sinc2_integral_white(level: float, f1: float, f2: float, t: float) -> float:
    """integral of level * sinc^2(pi f t) over [f1, f2]; f2 may be inf."""
    def g(z):
        # integral_0^z sinc^2(u) du = Si(2z) - sin(z)^2 / z
        if z == math.inf:
            return math.pi / 2
        if z == 0.0:
            return 0.0
        si, _ = special.sici(2 * z)
        return si - math.sin(z) ** 2 / z

    return level / (math.pi * t) * (g(math.pi * f2 * t) - g(math.pi * f1 * t))


def _sinc2_integral_f2(coeff: float, f1: float, f2: float, t: float) -> float:
    """integral of coeff * f^2 sinc^2(pi f t) = coeff/(pi t)^2 * sin^2(pi f t)."""
    if not math.isfinite(f2):
        raise ValueError("the f^2 component needs a finite f_high")
    term = 0.5 * (f2 - f1) - (math.sin(2 * math.pi * f2 * t) - math.sin(2 * math.pi * f1 * t)) / (
        4 * math.pi * t
    )
    return coeff / (math.pi * t) ** 2 * term


def _sinc2_integral_powerlaw(amp: float, beta: float, f1: float, f2: float, t: float) -> float:
    """integral of amp^2 f^-beta sinc^2(pi f t) over [f1, f2] via u = f t."""
    a, b = f1 * t, f2 * t
    head_end = min(b, 8.0)
    total = 0.0
    # log-spaced panels up to the first sinc zero, then one panel per zero
    edges = []
    if a < min(1.0, head_end):
        lo = math.log10(a)
        hi = math.log10(min(1.0, head_end))
        n_panels = max(2, int(math.ceil(4 * (hi - lo))))
        edges.extend(np.logspace(lo, hi, n_panels + 1).tolist())
    else:
        edges.append(a)
    k = max(1.0, math.floor(edges[-1]))
    while edges[-1] < head_end:
        k += 1.0
        edges.append(min(k, head_end))
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        val, _ = integrate.quad(
            lambda u: u**-beta * np.sinc(u) ** 2, lo, hi, epsabs=0.0, epsrel=1e-9, limit=200
        )
        total += val
    if b > 8.0:
        # tail: sinc^2(pi u) = (1 - cos 2 pi u) / (2 pi^2 u^2)
        p = beta + 2.0
        if math.isfinite(b):
            mono = (8.0 ** (1 - p) - b ** (1 - p)) / (p - 1)
        else:
            mono = 8.0 ** (1 - p) / (p - 1)
        osc, _ = integrate.quad(
            lambda u: u**-p,
            8.0,
            b,
            weight="cos",
            wvar=2 * math.pi,
            epsabs=1e-14,
            epsrel=1e-9,
            limit=400,
        )
        total += (mono - osc) / (2 * math.pi**2)
    return amp**2 * t ** (beta - 1.0) * total


def _sinc2_integral_peak(center, height, width, f1, f2, t) -> float:
    lo = max(f1, center - 10 * width)
    hi = min(f2, center + 10 * width)
    if hi <= lo:
        return 0.0
    # panel at every sinc zero k/t inside the support, capped for tiny 1/t
    n_zeros = int((hi - lo) * t)
    if n_zeros > 4000:
        # peak much wider than the oscillation: average sinc^2 analytically
        def mean_sinc2(f):
            return np.where(f * t < 8.0, np.sinc(f * t) ** 2, 1.0 / (2 * (np.pi * f * t) ** 2))

        val, _ = integrate.quad(
            lambda f: height * math.exp(-((f - center) ** 2) / (2 * width**2)) * mean_sinc2(f),
            lo,
            hi,
            epsabs=0.0,
            epsrel=1e-8,
            limit=800,
        )
        return val
    edges = [lo] + [k / t for k in range(int(lo * t) + 1, int(hi * t) + 1)] + [hi]
    total = 0.0
    for e1, e2 in zip(edges[:-1], edges[1:]):
        if e2 <= e1:
            continue
        val, _ = integrate.quad(
            lambda f: height
            * math.exp(-((f - center) ** 2) / (2 * width**2))
            * np.sinc(f * t) ** 2,
            e1,
            e2,
            epsabs=0.0,
            epsrel=1e-9,
            limit=200,
        )
        total += val
    return total


def filtered_band_power(
    model: SpectrumModel, t: float, f_min: float | None = None, f_max: float | None = None
) -> float:
    """integral S(f) sinc^2(pi f t) df over the model band (or an override), Hz^2.

    The quasi-static component (below the band, sinc = 1) is included only
    when no explicit f_min is given.
    """
    f1 = model.f_low if f_min is None else max(f_min, model.f_low)
    f2 = model.f_high if f_max is None else min(f_max, model.f_high)
    total = 0.0
    if f_min is None:
        total += model.quasi_static_sigma**2
    if f2 <= f1:
        return total
    if model.white_floor:
        total += _sinc2_integral_white(model.white_floor, f1, f2, t)
    for term in model.power_laws:
        if term.amplitude:
            total += _sinc2_integral_powerlaw(term.amplitude, term.exponent, f1, f2, t)
    for peak in model.peaks:
        if peak.height:
            total += _sinc2_integral_peak(peak.center, peak.height, peak.width, f1, f2, t)
    if model.f_squared_coeff:
        total += _sinc2_integral_f2(model.f_squared_coeff, f1, f2, t)
    return total


def decoherence_function(
    model: SpectrumModel, t: float, f_min: float | None = None, f_max: float | None = None
) -> float:
    """Gaussian-noise decoherence W(t) = exp(-(t^2/2)(2 pi)^2 integral S sinc^2).

    The integral runs over the one-sided band; the optional f_min/f_max
    restrict it (used for the high-frequency part of split envelopes, where
    the quasi-static component is excluded).  W(0) = 1 exactly.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        return 1.0
    for term in model.power_laws:
        if term.exponent >= 1.0 and model.f_low <= 0:
            raise ValueError("divergent power law requires an explicit positive f_low")
    i_total = filtered_band_power(model, t, f_min, f_max)
    return math.exp(-0.5 * t**2 * (2 * math.pi) ** 2 * i_total)


def static_sigma(model: SpectrumModel, t: float) -> float:
    """Std of the quasi-static noise at evolution time t: components below 1/t."""
    var = model.quasi_static_sigma**2 + band_power(model, model.f_low, 1.0 / t)
    return math.sqrt(var)


def free_decay_envelope(
    model: SpectrumModel, gamma_1: float, t: float, include_high: bool = False
) -> float:
    """Free-evolution decay: W_static * W_high * exp(-gamma_1 t / 2).

    The static part treats all noise below 1/t as a Gaussian constant
    (sinc -> 1); W_high defaults to 1 and can be switched on to integrate the
    band above 1/t.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        return 1.0
    sigma_t = static_sigma(model, t)
    w = math.exp(-0.5 * t**2 * (2 * math.pi * sigma_t) ** 2)
    if include_high:
        w *= decoherence_function(model, t, f_min=1.0 / t)
    return w * math.exp(-0.5 * gamma_1 * t)


def t2star_from_sigma(sigma: float) -> float:
    """Gaussian dephasing time T2* = 1 / (pi sqrt(2) sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    return 1.0 / (math.pi * math.sqrt(2.0) * sigma)


def sigma_from_t2star(t2star: float) -> float:
    """Inverse of :func:`t2star_from_sigma`."""
    if t2star <= 0:
        raise ValueError("T2* must be > 0")
    return 1.0 / (math.pi * math.sqrt(2.0) * t2star)


# -- rotating-frame rates -------------------------------------------------------

@dataclass(frozen=True)
class RotatingFrameRates:
    """Relaxation rates of the driven (dressed) qubit; all rates in 1/s."""

    eta: float
    f_r: float
    gamma_1: float
    gamma_nu: float
    gamma_1_tilde: float
    gamma_phi_tilde: float
    gamma_2_tilde: float

    def __post_init__(self):
        if min(self.gamma_1, self.gamma_nu, self.gamma_1_tilde, self.gamma_phi_tilde, self.gamma_2_tilde) < 0:
            raise ValueError("rates must be >= 0")
        resid = self.gamma_2_tilde - (0.5 * self.gamma_1_tilde + self.gamma_phi_tilde)
        scale = max(self.gamma_2_tilde, 1.0)
        if abs(resid) > 1e-12 * scale:
            raise ValueError("gamma_2_tilde must equal gamma_1_tilde/2 + gamma_phi_tilde")


def rotating_frame_rates(
    f_rabi: float, delta_q: float, gamma_1: float, s_l_at_fr: float
) -> RotatingFrameRates:
    """Dressed-frame rates for drive f_rabi at detuning delta_q.

    ``s_l_at_fr`` is the two-sided longitudinal density S_L at the dressed
    splitting f_R (pass ``s_l_two_sided(model, f_r)``); gamma_nu = 2 pi^2 S_L.
    """
    if f_rabi <= 0:
        raise ValueError("f_rabi must be > 0")
    eta = math.atan2(f_rabi, delta_q)
    f_r = math.hypot(f_rabi, delta_q)
    gamma_nu = 2 * math.pi**2 * s_l_at_fr
    sin2 = math.sin(eta) ** 2
    cos2 = math.cos(eta) ** 2
    g1t = sin2 * gamma_nu + 0.5 * (1 + cos2) * gamma_1
    gpt = 0.5 * gamma_1 * sin2
    g2t = 0.5 * g1t + gpt
    return RotatingFrameRates(
        eta=eta,
        f_r=f_r,
        gamma_1=gamma_1,
        gamma_nu=gamma_nu,
        gamma_1_tilde=g1t,
        gamma_phi_tilde=gpt,
        gamma_2_tilde=g2t,
    )


# -- driven-evolution envelopes -------------------------------------------------

def rabi_static_envelope(sigma: float, f_rabi: float, t) -> float | np.ndarray:
    """Quasi-static power-law Rabi envelope [1 + (2 pi sigma^2 t / f_rabi)^2]^(-1/4)."""
    if f_rabi <= 0:
        raise ValueError("f_rabi must be > 0")
    x = 2 * math.pi * sigma**2 * np.asarray(t, dtype=float) / f_rabi
    out = (1.0 + x**2) ** -0.25
    return out if np.ndim(t) else float(out)


def rabi_quasistatic_t2prime(sigma: float, f_rabi: float) -> float:
    """Initial-decay Gaussian timescale f_rabi / (pi sigma^2) of the static envelope."""
    if sigma <= 0 or f_rabi <= 0:
        raise ValueError("sigma and f_rabi must be > 0")
    return f_rabi / (math.pi * sigma**2)


def rabi_zero_detuning_envelope(
    sigma: float, f_rabi: float, gamma_1: float, gamma_nu: float, t
) -> float | np.ndarray:
    """Zero-detuning Rabi envelope: static power law times exp(-(3/4 G1 + G_nu/2) t)."""
    rate = 0.75 * gamma_1 + 0.5 * gamma_nu
    out = rabi_static_envelope(sigma, f_rabi, t) * np.exp(-rate * np.asarray(t, dtype=float))
    return out if np.ndim(t) else float(out)


def _scaled_model(model: SpectrumModel, factor: float) -> SpectrumModel:
    """Model with every density multiplied by factor (quasi-static left as is)."""
    root = math.sqrt(factor)
    return dataclasses.replace(
        model,
        power_laws=tuple(
            dataclasses.replace(p, amplitude=p.amplitude * root) for p in model.power_laws
        ),
        white_floor=model.white_floor * factor,
        peaks=tuple(dataclasses.replace(p, height=p.height * factor) for p in model.peaks),
        f_squared_coeff=model.f_squared_coeff * factor,
    )


def rabi_envelope_general(
    model: SpectrumModel, gamma_1: float, f_rabi: float, delta_q: float, t: float
) -> float:
    """Driven-evolution envelope W_static_rabi * W_high_rabi * exp(-gamma_2_tilde t).

    The high-frequency part is the decoherence function of the model scaled by
    cos^2(eta) with a low-frequency cutoff at 1/t; the static part uses the
    zero-detuning power law with the sub-1/t variance.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        return 1.0
    f_r = math.hypot(f_rabi, delta_q)
    s_l = s_l_two_sided(model, f_r) if model.f_low <= f_r <= model.f_high else 0.0
    rates = rotating_frame_rates(f_rabi, delta_q, gamma_1, s_l)
    sigma_t = static_sigma(model, t)
    w = rabi_static_envelope(sigma_t, f_rabi, t)
    cos2 = math.cos(rates.eta) ** 2
    if cos2 > 0:
        w *= decoherence_function(_scaled_model(model, cos2), t, f_min=1.0 / t)
    return float(w * math.exp(-rates.gamma_2_tilde * t))


# -- decay fitting ---------------------------------------------------------------

#: Supported fit kinds and their envelope in terms of (t, timescale).
_ENVELOPES = {
    "gaussian": lambda t, T: np.exp(-((t / T) ** 2)),
    "exponential": lambda t, T: np.exp(-t / T),
    "power_law_quarter": lambda t, T: (1.0 + (t / T) ** 2) ** -0.25,
}


@dataclass(frozen=True)
class DecayFit:
    """Fitted decaying oscillation (or RB exponential).

    For oscillatory kinds: value = offset + amplitude cos(2 pi f t + phase) *
    envelope(t; timescale).  For kind "rb_exponential": value = offset +
    amplitude * decay_base**m with timescale = -1/ln(decay_base).
    """

    model_kind: str
    frequency: float
    timescale: float
    amplitude: float
    offset: float
    phase: float
    covariance: np.ndarray
    rms_residual: float
    degenerate: bool = False
    decay_base: float | None = None

    def __post_init__(self):
        if self.timescale <= 0:
            raise ValueError("timescale must be > 0")


def _freq_candidates(times: np.ndarray, values: np.ndarray, n_cand: int = 3) -> list[float]:
    v = values - values.mean()
    dt = np.median(np.diff(times))
    spec = np.abs(np.fft.rfft(v))
    freqs = np.fft.rfftfreq(v.size, dt)
    order = np.argsort(spec[1:])[::-1] + 1
    return [float(freqs[i]) for i in order[:n_cand] if freqs[i] > 0] or [0.5 / (times[-1] - times[0])]


def _timescale_guess(times: np.ndarray, values: np.ndarray) -> float:
    env = np.abs(values - values.mean())
    peak = env.max()
    if peak == 0:
        return times[-1] if times[-1] > 0 else 1.0
    below = np.nonzero(env < peak / math.e)[0]
    if below.size:
        t0 = times[below[0]]
        if t0 > 0:
            return float(t0)
    return float(times[-1] if times[-1] > 0 else 1.0)


def fit_decay(times, values, model_kind: str, max_restarts: int = 8) -> DecayFit:
    """Least-squares fit of a decaying oscillation; see :class:`DecayFit`.

    Frequency is seeded from the trace periodogram, the timescale from the
    first 1/e crossing of the envelope; up to ``max_restarts`` jittered
    restarts are attempted before raising :class:`FitError`.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if model_kind == "rb_exponential":
        if times.size < 4:
            raise ValueError("need at least 4 sequence lengths to fit")
        return _fit_rb(times, values, max_restarts)
    if times.size < 10:
        raise ValueError("need at least 10 points to fit")
    if model_kind not in _ENVELOPES:
        raise ValueError(f"unknown model kind {model_kind!r}")
    env = _ENVELOPES[model_kind]

    def f(t, offset, amplitude, frequency, phase, timescale):
        return offset + amplitude * np.cos(2 * np.pi * frequency * t + phase) * env(t, timescale)

    if np.ptp(values) == 0.0:
        return DecayFit(
            model_kind, 0.0, max(times[-1], 1e-12), 0.0, float(values[0]), 0.0,
            np.zeros((5, 5)), 0.0, degenerate=True,
        )

    span = np.ptp(values)
    t_guess = _timescale_guess(times, values)
    attempts = []
    for f0 in _freq_candidates(times, values):
        for t_scale in (1.0, 0.3, 3.0):
            attempts.append((f0, t_guess * t_scale))
    best = None
    for f0, T0 in attempts[: max_restarts + 1]:
        vc = values - values.mean()
        cos_p = np.sum(vc * np.cos(2 * np.pi * f0 * times))
        sin_p = np.sum(vc * np.sin(2 * np.pi * f0 * times))
        phase0 = math.atan2(-sin_p, cos_p)
        p0 = [values.mean(), span / 2, f0, phase0, T0]
        try:
            popt, pcov = optimize.curve_fit(
                f, times, values, p0=p0,
                bounds=([-np.inf, -np.inf, 0.0, -2 * np.pi, 1e-15], [np.inf, np.inf, np.inf, 2 * np.pi, np.inf]),
                maxfev=20000,
            )
        except (RuntimeError, ValueError):
            continue
        ssr = float(np.sum((f(times, *popt) - values) ** 2))
        if best is None or ssr < best[0]:
            best = (ssr, popt, pcov)
    if best is None:
        raise FitError(
            f"{model_kind} fit did not converge after {max_restarts + 1} starts "
            f"(n={times.size}, span={span:g})"
        )
    ssr, popt, pcov = best
    rms = math.sqrt(ssr / times.size)
    offset, amplitude, frequency, phase, timescale = popt
    if amplitude < 0:
        amplitude, phase = -amplitude, phase + math.pi
    phase = math.remainder(phase, 2 * math.pi)
    degenerate = abs(amplitude) <= 3 * rms and abs(amplitude) < 0.05 * max(abs(offset), 1e-30)
    if degenerate:
        warnings.warn("fit amplitude indistinguishable from zero; flagged degenerate", stacklevel=2)
    return DecayFit(
        model_kind, float(frequency), float(abs(timescale)), float(amplitude),
        float(offset), float(phase), pcov, rms, degenerate=degenerate,
    )


def _fit_rb(m, values, max_restarts):
    def f(x, a, b, p):
        return a * p**x + b

    p0s = [[values[0] - values[-1], values[-1], 0.99]]
    for k in range(max_restarts):
        p0s.append([values[0] - values[-1], values[-1], 1.0 - 10 ** -(1 + k % 4)])
    best = None
    for p0 in p0s:
        try:
            popt, pcov = optimize.curve_fit(
                f, m, values, p0=p0, bounds=([-1.5, -0.5, 0.0], [1.5, 1.5, 1.0]), maxfev=20000
            )
        except (RuntimeError, ValueError):
            continue
        ssr = float(np.sum((f(m, *popt) - values) ** 2))
        if best is None or ssr < best[0]:
            best = (ssr, popt, pcov)
    if best is None:
        raise FitError("RB exponential fit did not converge")
    ssr, (a, b, p), pcov = best
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return DecayFit(
        "rb_exponential", 0.0, -1.0 / math.log(p), float(a), float(b), 0.0,
        pcov, math.sqrt(ssr / len(m)), decay_base=float(p),
    )


# -- spectroscopy inversion -------------------------------------------------------

def s_l_from_rate(rate: float, gamma_1: float = 0.0) -> float:
    """Two-sided S_L(f_rabi) from the zero-detuning exponential decay rate.

    Inverts rate = (3/4) gamma_1 + gamma_nu / 2 with gamma_nu = 2 pi^2 S_L.
    Negative results are floored at zero with a warning (relaxation-dominated).
    """
    s = (rate - 0.75 * gamma_1) / math.pi**2
    if s < 0:
        warnings.warn("decay is relaxation-dominated; S_L floored at 0", stacklevel=2)
        return 0.0
    return s


def extract_S_at_frabi(
    times,
    p_up,
    f_rabi: float,
    sigma: float,
    gamma_1: float = 0.0,
) -> tuple[float, DecayFit]:
    """Noise density at the Rabi frequency from a zero-detuning Rabi trace.

    The known quasi-static power-law prefactor (sigma from an independent
    measurement) is divided out pointwise, the residual is fit to an
    exponentially decaying oscillation, and the rate is inverted to the
    two-sided S_L(f_rabi).  Returns (S_L, residual fit).
    """
    times = np.asarray(times, dtype=float)
    p_up = np.asarray(p_up, dtype=float)
    rough = fit_decay(times, p_up, "exponential")
    prefactor = rabi_static_envelope(sigma, f_rabi, times)
    divided = rough.offset + (p_up - rough.offset) / prefactor
    fit = fit_decay(times, divided, "exponential")
    rate = 1.0 / fit.timescale
    if rate < 0.75 * gamma_1:
        warnings.warn("fitted rate below (3/4) gamma_1; relaxation-dominated", stacklevel=2)
    return s_l_from_rate(rate, gamma_1), fit


# -- 1/f calibration ---------------------------------------------------------------

def calibrate_A_from_t2star(t2star: float, f_c: float, t: float) -> float:
    """1/f amplitude (two-sided convention, S_L = A^2/f) from a measured T2*.

    Inverts 1/T2* = 2 pi A sqrt(ln(1/(f_c t))) with f_c the low-frequency
    cutoff and t the evolution time; requires f_c * t < 1.
    """
    if t2star <= 0 or f_c <= 0 or t <= 0:
        raise ValueError("arguments must be > 0")
    x = f_c * t
    if x >= 1:
        raise ValueError("f_c * t must be < 1 (log factor vanishes)")
    log = math.log(1.0 / x)
    if log < 1e-12:
        raise ValueError("f_c * t too close to 1; A diverges")
    return 1.0 / (2 * math.pi * t2star * math.sqrt(log))


def sigma2_band(a: float, f_c: float, t: float) -> float:
    """Quasi-static variance 2 A^2 ln(1/(f_c t)) of two-sided A^2/f between f_c and 1/t."""
    if f_c <= 0 or t <= 0:
        raise ValueError("f_c and t must be > 0")
    if f_c * t >= 1:
        raise ValueError("f_c * t must be < 1")
    return 2 * a**2 * math.log(1.0 / (f_c * t))
