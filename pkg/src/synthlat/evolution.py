"""Time evolution of single-excitation states.

States handed between schedule segments live in the *ladder frame*: mode
``m`` rotates at its own frequency and the qubit at the frequency of mode 0.
Lab-frame matrices use the frame rotating at mode 0 for everything; the two
differ by the phase ``exp(-2j*pi*m*fsr*t)`` on mode ``m``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericalError
from .model import (
    TWO_PI,
    DriveTone,
    HamiltonianMatrix,
    ModeLattice,
    QubitCoupler,
    SingleExcitationState,
    build_rwa_hamiltonian,
    lab_modulation_operator,
    lab_static_part,
    modulation_amplitude,
)

#: Upper bound on the rotation angle ``||H|| * dt`` of one midpoint step.
MAX_STEP_PHASE = 0.1
MAX_STEPS = 5_000_000


class StaticPropagator:
    """Eigendecomposition of a static Hermitian matrix, reusable for any duration."""

    def __init__(self, h: HamiltonianMatrix | np.ndarray):
        entries = h.entries if isinstance(h, HamiltonianMatrix) else np.asarray(h)
        self.energies, self.vectors = np.linalg.eigh(entries)
        self.dimension = entries.shape[0]

    def matrix(self, duration: float) -> np.ndarray:
        phases = np.exp(-1j * self.energies * duration)
        return (self.vectors * phases) @ self.vectors.conj().T

    def apply(self, vec: np.ndarray, duration: float) -> np.ndarray:
        coeffs = self.vectors.conj().T @ vec
        return self.vectors @ (np.exp(-1j * self.energies * duration) * coeffs)

    def apply_many(self, vec: np.ndarray, durations) -> np.ndarray:
        """Rows are the evolved vector at each duration."""
        coeffs = self.vectors.conj().T @ vec
        phases = np.exp(-1j * np.outer(np.asarray(durations, dtype=float), self.energies))
        return (phases * coeffs) @ self.vectors.T


def _uses_qubit(state: SingleExcitationState, dim: int) -> bool:
    if dim == state.n_modes:
        return False
    if dim == state.n_modes + 1:
        return True
    raise DomainError(
        f"Hamiltonian dimension {dim} does not match a state with {state.n_modes} modes"
    )


def evolve_static(state: SingleExcitationState, h: HamiltonianMatrix,
                  duration: float) -> SingleExcitationState:
    """Apply ``exp(-i H duration)`` to the state."""
    if duration < 0:
        raise DomainError(f"duration must be >= 0, got {duration}")
    with_qubit = _uses_qubit(state, h.dimension)
    vec = StaticPropagator(h).apply(state.vector(with_qubit), duration)
    return state.with_vector(vec, with_qubit)


def default_dt(static: np.ndarray, tones: Sequence[DriveTone], duration: float) -> float:
    f_max = float(np.max(np.abs(np.diag(static)))) / TWO_PI
    f_max = max([f_max] + [abs(t.freq) for t in tones] + [1e-12])
    dt = 1.0 / (50.0 * f_max)
    if duration > 0:
        dt = min(dt, duration / 100.0)
    return dt


def evolve_time_dependent(state: SingleExcitationState, lattice: ModeLattice,
                          tones: Sequence[DriveTone] = (),
                          coupler: QubitCoupler | None = None,
                          t0: float = 0.0, duration: float = 0.0,
                          dt: float | None = None,
                          decay_rates: np.ndarray | None = None,
                          max_phase: float = MAX_STEP_PHASE,
                          max_steps: int = MAX_STEPS) -> SingleExcitationState:
    """Evolve under the modulated lab-frame Hamiltonian with midpoint exponentials.

    ``state`` and the result are in the lab frame rotating at mode 0.  Steps
    are subdivided until ``||H|| * dt < max_phase``.  ``decay_rates`` (1/us,
    one per basis component) damps amplitudes after each step, with the
    removed population added to ``p_lost``.
    """
    if duration < 0 or t0 < 0:
        raise DomainError("t0 and duration must be >= 0")
    if duration == 0:
        return state
    with_qubit = coupler is not None
    static = lab_static_part(lattice, coupler)
    vec = state.vector(with_qubit)
    if vec.size != static.shape[0]:
        raise DomainError("state and lattice dimensions differ")
    op = lab_modulation_operator(lattice, with_qubit)
    amp_max = sum(2.0 * t.strength for t in tones)
    norm_bound = np.linalg.norm(static, 2) + amp_max * np.linalg.norm(op, 2)

    if dt is None:
        dt = default_dt(static, tones, duration)
    if dt <= 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    n_steps = max(1, math.ceil(duration / dt - 1e-9))
    if norm_bound * duration / n_steps >= max_phase:
        n_steps = math.ceil(norm_bound * duration / max_phase * (1 + 1e-9))
    if n_steps > max_steps:
        raise NumericalError(
            f"time step needs {n_steps} subdivisions, limit is {max_steps}"
        )
    h_step = duration / n_steps

    lost = state.p_lost
    damp = None
    if decay_rates is not None:
        damp = np.exp(-np.asarray(decay_rates, dtype=float) * h_step)
    static_diag_only = not np.any(static - np.diag(np.diag(static)))
    for i in range(n_steps):
        t_mid = t0 + (i + 0.5) * h_step
        amp = modulation_amplitude(tones, t_mid)
        if amp == 0.0 and static_diag_only:
            vec = np.exp(-1j * np.diag(static).real * h_step) * vec
        else:
            energies, vectors = np.linalg.eigh(static + amp * op)
            vec = vectors @ (np.exp(-1j * energies * h_step) * (vectors.conj().T @ vec))
        if damp is not None:
            before = float(np.vdot(vec, vec).real)
            vec = damp * vec
            lost += before - float(np.vdot(vec, vec).real)
    return state.with_vector(vec, with_qubit, p_lost=lost)


def reset_qubit(state: SingleExcitationState) -> SingleExcitationState:
    """Dump any qubit excitation into the lost population."""
    if state.c_q == 0:
        return state
    return SingleExcitationState(state.c_vac, 0.0, state.c_modes,
                                 state.p_lost + abs(state.c_q) ** 2)


def ladder_to_lab(c_modes: np.ndarray, lattice: ModeLattice, t: float) -> np.ndarray:
    return np.exp(-1j * TWO_PI * lattice.indices * lattice.fsr * t) * c_modes


def lab_to_ladder(c_modes: np.ndarray, lattice: ModeLattice, t: float) -> np.ndarray:
    return np.exp(1j * TWO_PI * lattice.indices * lattice.fsr * t) * c_modes


@dataclass(frozen=True)
class RwaSpec:
    """Static tight-binding segment; tone phases refer to schedule time 0."""

    tones: tuple[DriveTone, ...]
    detuning: float = 0.0


@dataclass(frozen=True)
class LabSpec:
    """Full time-dependent lab-frame segment."""

    tones: tuple[DriveTone, ...] = ()
    coupler: QubitCoupler | None = None
    dt: float | None = None


@dataclass(frozen=True)
class Segment:
    duration: float
    spec: RwaSpec | LabSpec
    label: str = ""

    def __post_init__(self):
        if self.duration < 0:
            raise DomainError(f"segment duration must be >= 0, got {self.duration}")


@dataclass(frozen=True)
class Schedule:
    lattice: ModeLattice
    segments: tuple[Segment, ...] = ()
    sample_dt: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.sample_dt > 0:
            raise DomainError("sample_dt must be > 0")

    @property
    def total(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def sample_times(self) -> np.ndarray:
        total = self.total
        n = int(math.floor(total / self.sample_dt + 1e-9))
        grid = np.arange(n + 1) * self.sample_dt
        if total - grid[-1] > 1e-9:
            grid = np.append(grid, total)
        return grid


@dataclass(frozen=True)
class DecoherenceParams:
    """Exponential amplitude damping; times in microseconds."""

    t1_mode: float = 29.1
    t2_mode: float = 57.9
    t1_qubit: float = 10.0
    enabled: bool = False

    def __post_init__(self):
        if self.enabled:
            if min(self.t1_mode, self.t2_mode, self.t1_qubit) <= 0:
                raise DomainError("coherence times must be > 0")
            if self.t2_mode > 2 * self.t1_mode:
                warnings.warn("t2_mode exceeds 2*t1_mode", stacklevel=2)

    @property
    def mode_rate(self) -> float:
        """Amplitude damping rate of every mode (1/us)."""
        if not self.enabled:
            return 0.0
        pure = max(0.0, 1.0 / self.t2_mode - 1.0 / (2.0 * self.t1_mode))
        return 1.0 / (2.0 * self.t1_mode) + pure

    @property
    def qubit_rate(self) -> float:
        return 1.0 / (2.0 * self.t1_qubit) if self.enabled else 0.0


NO_DECOHERENCE = DecoherenceParams()


def _rwa_phase_origin(tones, lattice: ModeLattice, t_start: float):
    """Tones re-expressed with hopping phases evaluated at ``t_start``."""
    out = []
    for tone in tones:
        delta = tone.freq - tone.order * lattice.fsr
        out.append(replace(tone, phase=tone.phase + TWO_PI * delta * t_start))
    return out


def run_schedule(initial: SingleExcitationState, schedule: Schedule,
                 deco: DecoherenceParams = NO_DECOHERENCE):
    """Apply each segment in order; returns ``[(t, state), ...]`` on the sample grid.

    ``initial`` and the returned states are in the ladder frame.
    """
    lattice = schedule.lattice
    if initial.n_modes != lattice.n_modes:
        raise DomainError("initial state does not match the schedule lattice")
    times = schedule.sample_times()
    trajectory = [(0.0, initial)]
    if schedule.total == 0:
        return trajectory

    state = initial
    t_seg = 0.0
    k = 1
    for seg in schedule.segments:
        t_end = t_seg + seg.duration
        if isinstance(seg.spec, RwaSpec):
            tones = _rwa_phase_origin(seg.spec.tones, lattice, t_seg)
            h = build_rwa_hamiltonian(lattice, tones, seg.spec.detuning)
            prop = StaticPropagator(h)
            tilt = TWO_PI * lattice.indices * seg.spec.detuning
            start = state
            while k < len(times) and times[k] <= t_end + 1e-9:
                state = _rwa_state_at(start, prop, tilt, times[k] - t_seg, deco)
                trajectory.append((float(times[k]), state))
                k += 1
            state = _rwa_state_at(start, prop, tilt, seg.duration, deco)
        else:
            spec = seg.spec
            with_qubit = spec.coupler is not None
            rates = None
            if deco.enabled:
                rates = np.full(lattice.n_modes + int(with_qubit), deco.mode_rate)
                if with_qubit:
                    rates[0] = deco.qubit_rate
            t_last = t_seg
            checkpoints = [t for t in times[k:] if t <= t_end + 1e-9]
            if not checkpoints or t_end - checkpoints[-1] > 1e-12:
                checkpoints.append(t_end)
            for t_next in checkpoints:
                lab = SingleExcitationState(state.c_vac, state.c_q,
                                            ladder_to_lab(state.c_modes, lattice, t_last),
                                            state.p_lost)
                lab = evolve_time_dependent(lab, lattice, spec.tones, spec.coupler,
                                            t0=t_last, duration=t_next - t_last,
                                            dt=spec.dt, decay_rates=rates)
                state = SingleExcitationState(lab.c_vac, lab.c_q,
                                              lab_to_ladder(lab.c_modes, lattice, t_next),
                                              lab.p_lost)
                t_last = t_next
                if k < len(times) and abs(times[k] - t_next) <= 1e-9:
                    trajectory.append((float(times[k]), state))
                    k += 1
        t_seg = t_end
    return trajectory


def _rwa_state_at(start: SingleExcitationState, prop: StaticPropagator,
                  tilt: np.ndarray, tau: float,
                  deco: DecoherenceParams) -> SingleExcitationState:
    """State ``tau`` into a tight-binding segment, back in the ladder frame.

    Uniform mode damping commutes with the mode-only Hamiltonian, so the
    per-step envelope collapses to a single factor.  A decoupled qubit only
    decays.
    """
    c = np.exp(-1j * tilt * tau) * prop.apply(start.c_modes, tau)
    c_q = start.c_q
    lost = start.p_lost
    if deco.enabled:
        before = float(np.vdot(c, c).real)
        c = c * math.exp(-deco.mode_rate * tau)
        c_q = c_q * math.exp(-deco.qubit_rate * tau)
        lost += before - float(np.vdot(c, c).real) + abs(start.c_q) ** 2 - abs(c_q) ** 2
    return SingleExcitationState(start.c_vac, c_q, c, lost)
