"""Single-qubit randomized benchmarking over simulated noisy gates.

The 24 single-qubit Cliffords are represented as Bloch-sphere rotations
(SO(3), which is the unitary up to global phase) and decomposed into physical
generators {X+-90, X180, Y+-90, Y180} by breadth-first search, giving the
standard minimal-length table: 1 identity, 6 one-gate, 13 two-gate and 4
three-gate elements.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics
from .coherence import DecayFit, fit_decay
from .noise import SpectrumModel

_AXES = {"X": np.array([1.0, 0.0, 0.0]), "Y": np.array([0.0, 1.0, 0.0])}

#: Physical generator set: name -> (axis, angle).
GENERATORS = {
    "I": (_AXES["X"], 0.0),
    "X90": (_AXES["X"], math.pi / 2),
    "X-90": (_AXES["X"], -math.pi / 2),
    "X180": (_AXES["X"], math.pi),
    "Y90": (_AXES["Y"], math.pi / 2),
    "Y-90": (_AXES["Y"], -math.pi / 2),
    "Y180": (_AXES["Y"], math.pi),
}

_GEN_ORDER = ("X90", "X-90", "X180", "Y90", "Y-90", "Y180")


def _rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    k = axis / np.linalg.norm(axis)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * (kx @ kx)


def generator_matrix(name: str) -> np.ndarray:
    axis, angle = GENERATORS[name]
    return _rotation_matrix(axis, angle)


def _key(mat: np.ndarray) -> tuple:
    return tuple(np.round(mat, 9).ravel())


@dataclass(frozen=True)
class CliffordElement:
    """One of the 24 single-qubit Cliffords with its generator decomposition."""

    index: int
    gates: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))


@functools.lru_cache(maxsize=1)
def clifford_group() -> tuple[CliffordElement, ...]:
    """The 24 Cliffords in deterministic BFS order (index 0 = identity)."""
    elements = [CliffordElement(0, ("I",), np.eye(3))]
    seen = {_key(np.eye(3)): 0}
    frontier = [0]
    while frontier:
        nxt = []
        for idx in frontier:
            base = elements[idx]
            for gname in _GEN_ORDER:
                mat = generator_matrix(gname) @ base.matrix
                key = _key(mat)
                if key not in seen:
                    gates = (gname,) if base.gates == ("I",) else base.gates + (gname,)
                    seen[key] = len(elements)
                    elements.append(CliffordElement(len(elements), gates, mat))
                    nxt.append(seen[key])
        frontier = nxt
    assert len(elements) == 24
    return tuple(elements)


@functools.lru_cache(maxsize=1)
def _tables() -> tuple[np.ndarray, np.ndarray]:
    """(composition table [i applied first, then j] -> index, inverse table)."""
    group = clifford_group()
    index = {_key(el.matrix): el.index for el in group}
    comp = np.empty((24, 24), dtype=int)
    inv = np.empty(24, dtype=int)
    for i, a in enumerate(group):
        inv[i] = index[_key(a.matrix.T)]
        for j, b in enumerate(group):
            comp[i, j] = index[_key(b.matrix @ a.matrix)]
    return comp, inv


def compose(i: int, j: int) -> int:
    """Index of (apply Clifford i, then Clifford j)."""
    return int(_tables()[0][i, j])


def inverse(i: int) -> int:
    return int(_tables()[1][i])


def clifford_index_of(gates) -> int:
    """Group index of a generator word (applied left to right)."""
    mat = np.eye(3)
    for g in gates:
        mat = generator_matrix(g) @ mat
    group_index = {_key(el.matrix): el.index for el in clifford_group()}
    key = _key(mat)
    if key not in group_index:
        raise ValueError(f"word {gates!r} is not a Clifford under this generator set")
    return group_index[key]


@dataclass(frozen=True)
class RBSequence:
    clifford_indices: tuple[int, ...]
    interleaved: int | None
    recovery: int

    def gate_list(self) -> list[str]:
        """Flattened physical generators including the recovery Clifford."""
        group = clifford_group()
        gates: list[str] = []
        for idx in self.clifford_indices:
            gates.extend(group[idx].gates)
            if self.interleaved is not None:
                gates.extend(group[self.interleaved].gates)
        gates.extend(group[self.recovery].gates)
        return [g for g in gates if g != "I"] or ["I"]


def generate_rb_sequence(m: int, seed: int, interleaved: int | str | None = None) -> RBSequence:
    """m uniform Cliffords (each followed by the interleaved gate) plus recovery."""
    if m < 1:
        raise ValueError("m must be >= 1")
    inter = _resolve_gate(interleaved)
    rng = np.random.default_rng(seed)
    indices = tuple(int(i) for i in rng.integers(0, 24, size=m))
    net = 0
    for idx in indices:
        net = compose(net, idx)
        if inter is not None:
            net = compose(net, inter)
    return RBSequence(clifford_indices=indices, interleaved=inter, recovery=inverse(net))


def _resolve_gate(gate: int | str | None) -> int | None:
    if gate is None:
        return None
    if isinstance(gate, str):
        return clifford_index_of((gate,))
    if not 0 <= int(gate) < 24:
        raise ValueError("Clifford index out of range")
    return int(gate)


# -- error models ---------------------------------------------------------------

@dataclass(frozen=True)
class DepolarizingError:
    """Bloch vector shrinks by (1 - rate) per Clifford (or per generator)."""

    rate: float
    per: str = "clifford"

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise ValueError("rate must be in [0, 1)")
        if self.per not in ("clifford", "generator"):
            raise ValueError("per must be 'clifford' or 'generator'")


@dataclass(frozen=True)
class OverRotationError:
    """Every generator rotation angle is scaled by (1 + epsilon)."""

    epsilon: float


@dataclass(frozen=True)
class TrajectoryError:
    """Gates compiled to microwave bursts evolved against synthesized noise.

    The drive is calibrated to the shifted resonance (Delta_q = 0 hence ideal
    at zero noise); n_trajectories fresh noise draws average each sequence.
    """

    model: SpectrumModel
    params: dynamics.DeviceParams
    amplitude: float = 1.0
    n_trajectories: int = 12


ErrorModel = DepolarizingError | OverRotationError | TrajectoryError


def _survival_channel(seq: RBSequence, error: DepolarizingError | OverRotationError) -> float:
    group = clifford_group()
    v = np.array([0.0, 0.0, 1.0])
    if isinstance(error, DepolarizingError) and error.per == "clifford":
        order = list(seq.clifford_indices)
        if seq.interleaved is not None and seq.interleaved != 0:
            # interleaving the identity emits no pulse, so it carries no error
            order = [g for idx in order for g in (idx, seq.interleaved)]
        order.append(seq.recovery)
        for idx in order:
            v = group[idx].matrix @ v
            v = v * (1.0 - error.rate)
        return 0.5 * (1.0 + v[2])
    for g in seq.gate_list():
        axis, angle = GENERATORS[g]
        if isinstance(error, OverRotationError):
            v = _rotation_matrix(axis, angle * (1.0 + error.epsilon)) @ v
        else:
            v = _rotation_matrix(axis, angle) @ v
            v = v * (1.0 - error.rate)
    return 0.5 * (1.0 + v[2])


def _gate_segments(gates, f_mw: float, params: dynamics.DeviceParams, amplitude: float):
    f_rabi = params.rabi_per_amplitude * amplitude
    segs = []
    for g in gates:
        if g == "I":
            continue
        axis, angle = GENERATORS[g]
        phase = 0.0 if axis[0] else math.pi / 2
        if angle < 0:
            phase += math.pi
        duration = abs(angle) / (2 * math.pi * f_rabi)
        segs.append(dynamics.PulseSegment("drive", f_mw, amplitude, phase, duration))
    return segs


def _survival_trajectory(seq: RBSequence, error: TrajectoryError, rng: np.random.Generator) -> float:
    params = error.params
    f_mw = params.f_qubit_0 + dynamics.microwave_shift(params, error.amplitude)
    segs = _gate_segments(seq.gate_list(), f_mw, params, error.amplitude)
    total = sum(s.duration for s in segs)
    if total == 0.0:
        return 1.0
    f_rabi = params.rabi_per_amplitude * error.amplitude
    dt = dynamics._trace_dt(error.model, f_rabi, 0.0)
    n_steps = int(math.ceil(total / dt)) + 2
    delta_f = dynamics._synthesize_matrix(error.model, dt, n_steps, error.n_trajectories, rng)
    states = np.tile([0.0, 0.0, 1.0], (error.n_trajectories, 1))
    t = 0.0
    eps = dt * 1e-9
    axes = np.empty((error.n_trajectories, 3))
    for seg in segs:
        rx = f_rabi * math.cos(seg.phase)
        ry = f_rabi * math.sin(seg.phase)
        t_end = t + seg.duration
        while t_end - t > eps:
            i = min(int((t + eps) / dt), n_steps - 1)
            step = min((i + 1) * dt, t_end) - t
            axes[:, 0] = rx
            axes[:, 1] = ry
            axes[:, 2] = -delta_f[:, i]  # drive calibrated to the shifted resonance
            states = dynamics.rotate(states, axes, step)
            if params.gamma_1:
                states = dynamics._relax(states, params.gamma_1, step)
            t += step
    return float(np.mean(0.5 * (1.0 + states[:, 2])))


@dataclass(frozen=True)
class RBResult:
    lengths: np.ndarray
    mean_fidelity: np.ndarray
    stderr: np.ndarray
    n_sequences: int
    fit: DecayFit
    p: float
    f_avg: float
    f_avg_err: float
    interleaved: int | None = None


def simulate_rb(
    sequence_lengths,
    n_sequences: int,
    error: ErrorModel,
    seed: int,
    interleaved: int | str | None = None,
) -> RBResult:
    """Standard (or interleaved) RB: survival decay fit to A p^m + B.

    Survival is the exact return probability of the Bloch vector (readout
    imperfection only rescales A and B, so it is left out here).  F_avg =
    1 - (1 - p)/2.
    """
    lengths = np.asarray(sequence_lengths, dtype=int)
    if lengths.min() < 1:
        raise ValueError("sequence lengths must be >= 1")
    survivals = np.empty((lengths.size, n_sequences))
    for li, m in enumerate(lengths):
        for s in range(n_sequences):
            seq_seed = int(np.random.SeedSequence((seed, int(m), s)).generate_state(1)[0])
            seq = generate_rb_sequence(int(m), seq_seed, interleaved)
            if isinstance(error, TrajectoryError):
                rng = np.random.default_rng((seed, int(m), s, 1))
                survivals[li, s] = _survival_trajectory(seq, error, rng)
            else:
                survivals[li, s] = _survival_channel(seq, error)
    mean = survivals.mean(axis=1)
    stderr = survivals.std(axis=1, ddof=1) / math.sqrt(n_sequences) if n_sequences > 1 else np.zeros_like(mean)
    fit = fit_decay(lengths.astype(float), mean, "rb_exponential")
    p = fit.decay_base
    p_err = math.sqrt(max(fit.covariance[2, 2], 0.0)) if fit.covariance.size >= 9 else 0.0
    return RBResult(
        lengths=lengths,
        mean_fidelity=mean,
        stderr=stderr,
        n_sequences=n_sequences,
        fit=fit,
        p=p,
        f_avg=1.0 - (1.0 - p) / 2.0,
        f_avg_err=p_err / 2.0,
        interleaved=_resolve_gate(interleaved),
    )


def interleaved_gate_fidelity(reference: RBResult, interleaved: RBResult) -> tuple[float, float]:
    """F_gate = 1 - (1 - p_int/p_ref)/2, with the propagated fit uncertainty."""
    ratio = interleaved.p / reference.p
    f_gate = 1.0 - (1.0 - ratio) / 2.0
    rel = 0.0
    if reference.p > 0 and interleaved.p > 0:
        rel = math.hypot(
            2 * reference.f_avg_err / reference.p, 2 * interleaved.f_avg_err / interleaved.p
        )
    return f_gate, 0.5 * ratio * rel
