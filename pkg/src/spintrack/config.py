"""Key-value text configuration (INI) for models, devices, and scenarios.

Sections: [scenario] (name, seed, out), [spectrum], [device], [estimator],
[run] (scenario-specific overrides, kept as strings).  Every field error is
reported with its section-qualified path.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .dynamics import DeviceParams
from .estimator import EstimatorConfig
from .noise import ConfigurationError, SpectrumModel, model_from_items, model_to_items


@dataclass(frozen=True)
class ScenarioConfig:
    """Full specification of one scenario run; reproducible from (config, seed)."""

    name: str
    seed: int = 0
    out_dir: str = "out"
    spectrum: SpectrumModel | None = None
    device: DeviceParams | None = None
    estimator: EstimatorConfig | None = None
    options: dict = field(default_factory=dict)
    quiet: bool = False


_DEVICE_FIELDS = {
    "f_qubit_0": float,
    "rabi_per_amplitude": float,
    "b_ext": float,
    "b_mm_z": float,
    "shift_coeff": float,
    "shift_exponent": float,
    "gamma_1": float,
    "readout_alpha": float,
    "readout_beta_vis": float,
    "shift_settling_time": float,
}

_ESTIMATOR_FIELDS = {
    "n_shots": int,
    "delta_p": float,
    "bin_width": float,
    "grid_halfspan": float,
    "alpha": float,
    "beta_vis": float,
    "envelope_t2star": float,
    "fresh_prior": bool,
    "prior_drift_sigma": float,
}


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def device_from_items(items: dict[str, str], errors: list[str]) -> DeviceParams | None:
    kwargs = {}
    for key, raw in items.items():
        if key not in _DEVICE_FIELDS:
            errors.append(f"device.{key}: unknown field")
            continue
        try:
            kwargs[key] = _DEVICE_FIELDS[key](raw)
        except ValueError:
            errors.append(f"device.{key}: cannot parse {raw!r}")
    if errors:
        return None
    try:
        return DeviceParams(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"device: {exc}")
        return None


def estimator_from_items(items: dict[str, str], errors: list[str]) -> EstimatorConfig | None:
    kwargs = {}
    schedule = {}
    for key, raw in items.items():
        if key in ("t_r_start", "t_r_step"):
            try:
                schedule[key] = float(raw)
            except ValueError:
                errors.append(f"estimator.{key}: cannot parse {raw!r}")
            continue
        if key not in _ESTIMATOR_FIELDS:
            errors.append(f"estimator.{key}: unknown field")
            continue
        conv = _ESTIMATOR_FIELDS[key]
        try:
            kwargs[key] = _parse_bool(raw) if conv is bool else conv(raw)
        except ValueError:
            errors.append(f"estimator.{key}: cannot parse {raw!r}")
    if errors:
        return None
    n = kwargs.get("n_shots", 150)
    start = schedule.get("t_r_start", 2e-9)
    step = schedule.get("t_r_step", 2e-9)
    kwargs["t_r_schedule"] = tuple(start + step * k for k in range(n))
    try:
        return EstimatorConfig(**kwargs)
    except (TypeError, ConfigurationError, ValueError) as exc:
        errors.append(f"estimator: {exc}")
        return None


def spectrum_from_items(items: dict[str, str], errors: list[str]) -> SpectrumModel | None:
    try:
        model = model_from_items(items)
    except ConfigurationError as exc:
        errors.append(f"spectrum: {exc}")
        return None
    nyq_key = "synthesis_dt"
    if nyq_key in items:
        try:
            dt = float(items[nyq_key])
            if model.f_high > 0.5 / dt:
                errors.append(
                    f"spectrum.f_high: {model.f_high:g} Hz violates Nyquist 1/(2 dt) = {0.5 / dt:g} Hz "
                    f"for synthesis_dt = {dt:g} s"
                )
        except ValueError:
            errors.append(f"spectrum.{nyq_key}: cannot parse {items[nyq_key]!r}")
    return model


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse and validate; raises ConfigurationError listing every bad field."""
    cfg, errors = _load(path)
    if errors:
        raise ConfigurationError("; ".join(errors))
    return cfg


def validate_config(path: str | Path) -> list[str]:
    """Schema and invariant checks only; returns error strings (empty = ok)."""
    _, errors = _load(path)
    return errors


def _load(path: str | Path) -> tuple[ScenarioConfig | None, list[str]]:
    parser = configparser.ConfigParser()
    errors: list[str] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        return None, [f"cannot read {path}: {exc}"]
    except configparser.Error as exc:
        return None, [f"malformed config: {exc}"]

    name = parser.get("scenario", "name", fallback="")
    seed = 0
    if parser.has_option("scenario", "seed"):
        raw = parser.get("scenario", "seed")
        try:
            seed = int(raw)
        except ValueError:
            errors.append(f"scenario.seed: cannot parse {raw!r}")
    out_dir = parser.get("scenario", "out", fallback="out")
    quiet = False
    if parser.has_option("scenario", "quiet"):
        try:
            quiet = _parse_bool(parser.get("scenario", "quiet"))
        except ValueError:
            errors.append("scenario.quiet: not a boolean")

    spectrum = device = est = None
    if parser.has_section("spectrum"):
        spectrum = spectrum_from_items(dict(parser.items("spectrum")), errors)
    if parser.has_section("device"):
        device = device_from_items(dict(parser.items("device")), errors)
    if parser.has_section("estimator"):
        est = estimator_from_items(dict(parser.items("estimator")), errors)
    options = dict(parser.items("run")) if parser.has_section("run") else {}
    cfg = ScenarioConfig(
        name=name, seed=seed, out_dir=out_dir,
        spectrum=spectrum, device=device, estimator=est,
        options=options, quiet=quiet,
    )
    return cfg, errors


def spectrum_to_ini(model: SpectrumModel) -> str:
    """Render a SpectrumModel as an INI [spectrum] section."""
    parser = configparser.ConfigParser()
    parser["spectrum"] = model_to_items(model)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def device_to_items(params: DeviceParams) -> dict[str, str]:
    return {f.name: repr(getattr(params, f.name)) for f in fields(params)}
