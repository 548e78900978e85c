"""Ready-made noise models and device parameters for the shipped scenarios.

Amplitudes named ``a_two_sided`` follow the two-sided convention S_L = A^2/f
used by the coherence formulas; the stored one-sided model then carries
(sqrt(2) A)^2 / f.  See the convention note in :mod:`spintrack.coherence`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .coherence import sigma_from_t2star
from .dynamics import DeviceParams
from .noise import PowerLawTerm, SpectralPeak, SpectrumModel, band_power, derive_larmor_frequencies


def gaas_device(
    f_rabi: float = 10e6,
    gamma_1: float = 0.0,
    shift_coeff: float = 0.0,
    shift_exponent: float = 2.0,
) -> DeviceParams:
    """Single-spin device with unit drive amplitude giving the requested f_rabi."""
    return DeviceParams(
        f_qubit_0=5.5e9,
        rabi_per_amplitude=f_rabi,
        b_ext=1.01,
        b_mm_z=0.070,
        shift_coeff=shift_coeff,
        shift_exponent=shift_exponent,
        gamma_1=gamma_1,
    )


def quasi_static_model(sigma: float, f_low: float = 1.0, f_high: float = 1e4) -> SpectrumModel:
    """Pure quasi-static noise: one Gaussian constant of std sigma per realization."""
    return SpectrumModel(quasi_static_sigma=sigma, f_low=f_low, f_high=f_high)


def one_over_f_model(
    a_two_sided: float,
    f_low: float = 1e5,
    f_high: float = 4e7,
    quasi_static_sigma: float = 0.0,
) -> SpectrumModel:
    """S_L = A^2/f in the two-sided convention (one-sided 2 A^2 / f)."""
    return SpectrumModel(
        power_laws=(PowerLawTerm(math.sqrt(2.0) * a_two_sided, 1.0),),
        quasi_static_sigma=quasi_static_sigma,
        f_low=f_low,
        f_high=f_high,
    )


def driven_decay_model(
    t2_rabi: float = 1.26e-6,
    f_rabi: float = 33.64e6,
    a_two_sided: float = 0.6e6,
    f_low: float = 1e5,
    quasi_static_sigma: float = 0.294e6,
) -> SpectrumModel:
    """1/f background plus the high-frequency rise, tuned to a target Rabi decay.

    The quadratic term is chosen so the two-sided density at f_rabi equals the
    value implied by 1/t2_rabi = gamma_nu / 2 = pi^2 S_L(f_rabi); below
    ~20 MHz the 1/f part dominates.
    """
    s_l_target = 1.0 / (math.pi**2 * t2_rabi)
    s_l_oneoverf = a_two_sided**2 / f_rabi
    if s_l_target < s_l_oneoverf:
        raise ValueError("t2_rabi too long for the requested 1/f amplitude")
    c2_two_sided = (s_l_target - s_l_oneoverf) / f_rabi**2
    return SpectrumModel(
        power_laws=(PowerLawTerm(math.sqrt(2.0) * a_two_sided, 1.0),),
        f_squared_coeff=2.0 * c2_two_sided,
        quasi_static_sigma=quasi_static_sigma,
        f_low=f_low,
        f_high=1.5 * f_rabi,
    )


def sigma_b2_model(model: SpectrumModel, lag: float) -> float:
    """Ensemble frequency-correlator variance 2 int S(f)(1 - cos 2 pi f lag) df."""
    cos_part, _ = integrate.quad(
        lambda f: _psd_smooth(model, f),
        model.f_low,
        model.f_high,
        weight="cos",
        wvar=2 * math.pi * lag,
        epsabs=1e-12,
        epsrel=1e-8,
        limit=2000,
    )
    return 2.0 * (band_power(model, model.f_low, model.f_high) - cos_part)


def _psd_smooth(model: SpectrumModel, f: float) -> float:
    from .noise import psd_eval

    return psd_eval(model, f)


def subdiffusive_model(
    sigma_b_target: float = 0.08e6,
    lag: float = 4.8e-3,
    beta: float = 1.84,
    f_low: float = 0.5,
    f_high: float = 15e3,
    free_t2star: float = 28.4e-9,
) -> SpectrumModel:
    """Feedback preset: sigma_B^2 ~ dt^(beta-1) band plus a quasi-static constant.

    The band amplitude is calibrated so sigma_B(lag) = sigma_b_target; the
    quasi-static component carries the rest of the ensemble variance implied
    by the free-running T2*.
    """
    sigma_total = sigma_from_t2star(free_t2star)
    probe = SpectrumModel(power_laws=(PowerLawTerm(1.0, beta),), f_low=f_low, f_high=f_high)
    unit = sigma_b2_model(probe, lag)
    amp = math.sqrt(sigma_b_target**2 / unit)
    band = SpectrumModel(power_laws=(PowerLawTerm(amp, beta),), f_low=f_low, f_high=f_high)
    band_var = band_power(band, f_low, f_high)
    if band_var >= sigma_total**2:
        raise ValueError("band variance exceeds the total free-running variance")
    return SpectrumModel(
        power_laws=(PowerLawTerm(amp, beta),),
        quasi_static_sigma=math.sqrt(sigma_total**2 - band_var),
        f_low=f_low,
        f_high=f_high,
    )


def larmor_peak_model(
    b_total: float = 1.08,
    peak_height: float = 1e6,
    peak_width: float = 0.1e6,
    a_two_sided: float = 0.6e6,
    f_low: float = 1e5,
    f_high: float = 2e7,
) -> SpectrumModel:
    """1/f background with Gaussian lines at the three nuclear Larmor frequencies."""
    peaks = tuple(
        SpectralPeak(center=f_p, height=peak_height, width=peak_width)
        for f_p in derive_larmor_frequencies(b_total).values()
    )
    return SpectrumModel(
        power_laws=(PowerLawTerm(math.sqrt(2.0) * a_two_sided, 1.0),),
        peaks=peaks,
        f_low=f_low,
        f_high=f_high,
    )


def ramsey_t2star_sigma(t2star: float = 28.4e-9) -> float:
    """Quasi-static sigma reproducing a free-evolution Gaussian T2*."""
    return sigma_from_t2star(t2star)
