"""Experiment recipes: photon preparation, modulation programs and readout.

Every sequence follows the same chain: load a photon through the qubit,
decouple the qubit, modulate, discard any residual qubit excitation, then
read each mode by swapping it back onto the qubit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, ProtocolError
from .evolution import (
    NO_DECOHERENCE,
    DecoherenceParams,
    LabSpec,
    RwaSpec,
    Schedule,
    Segment,
    StaticPropagator,
    ladder_to_lab,
    lab_to_ladder,
    reset_qubit,
    run_schedule,
)
from .model import (
    TWO_PI,
    CouplingScaling,
    DriveTone,
    ModeLattice,
    QubitCoupler,
    SingleExcitationState,
    build_lab_hamiltonian,
    mode_frequency,
)

WEAK_KAPPA = 0.36
PACKET_KAPPA = 4.0
DEFAULT_G1 = 0.5
DEFAULT_G2 = 0.25
MIN_SWAP_FIDELITY = 0.95


class ProtocolWarning(UserWarning):
    pass


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class SingleSitePrep:
    """Swap the qubit excitation into mode ``m``.

    ``ideal`` skips the swap and places an exact photon in the mode.
    ``vacuum_superposition`` starts from an equal qubit superposition so the
    loaded mode keeps a phase reference to vacuum.
    """

    m: int = 0
    ideal: bool = False
    vacuum_superposition: bool = False


@dataclass(frozen=True)
class WavePacketPrep:
    kappa: float = PACKET_KAPPA
    emission_cap: float = 3.0
    stop_p1: float = 0.01
    vacuum_superposition: bool = False
    center_k: bool = True


@dataclass(frozen=True)
class SingleTone:
    order: int = 1
    detuning: float = 0.0
    strength: float = DEFAULT_G1
    phase: float = math.pi

    def tones(self, fsr: float, detuning: float | None = None):
        d = self.detuning if detuning is None else detuning
        return (DriveTone.resonant(fsr, self.order, d, self.strength, self.phase),)


@dataclass(frozen=True)
class DoubleTone:
    """Simultaneous nearest and next-nearest drives at ``fsr+d`` and ``2(fsr+d)``."""

    detuning: float = 0.0
    g1: float = DEFAULT_G1
    phi1: float = math.pi
    g2: float = DEFAULT_G2
    phi2: float = math.pi

    def tones(self, fsr: float, detuning: float | None = None):
        d = self.detuning if detuning is None else detuning
        return (DriveTone.resonant(fsr, 1, d, self.g1, self.phi1),
                DriveTone.resonant(fsr, 2, d, self.g2, self.phi2))


@dataclass(frozen=True)
class Reversal:
    """Single tone whose detuning flips sign every ``half_period``.

    The drive phase is continuous across each frequency switch.
    """

    order: int = 1
    detuning: float = -0.2
    strength: float = DEFAULT_G1
    phase: float = math.pi
    half_period: float = 2.5

    def tones(self, fsr: float, detuning: float | None = None):
        d = self.detuning if detuning is None else detuning
        return (DriveTone.resonant(fsr, self.order, d, self.strength, self.phase),)


Prep = Union[SingleSitePrep, WavePacketPrep]
DriveProgram = Union[SingleTone, DoubleTone, Reversal]


@dataclass(frozen=True)
class ReadoutGrid:
    dt: float = 0.05
    modes: tuple[int, ...] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    lattice: ModeLattice = field(default_factory=ModeLattice)
    coupler: QubitCoupler = field(default_factory=QubitCoupler)
    prep: Prep = field(default_factory=SingleSitePrep)
    drive: DriveProgram = field(default_factory=SingleTone)
    total_time: float = 10.0
    readout: ReadoutGrid = field(default_factory=ReadoutGrid)
    deco: DecoherenceParams = NO_DECOHERENCE
    frame: str = "rwa"
    shots: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.total_time > 0:
            raise ConfigError(f"total_time must be > 0, got {self.total_time}")
        if not self.readout.dt > 0:
            raise ConfigError("readout time step must be > 0")
        for m in self.readout_modes:
            if not self.lattice.contains(m):
                raise ConfigError(f"readout mode {m} lies outside the lattice")
        if isinstance(self.prep, SingleSitePrep) and not self.lattice.contains(self.prep.m):
            raise ConfigError(f"prep mode {self.prep.m} lies outside the lattice")
        if self.frame not in ("rwa", "lab"):
            raise ConfigError(f"frame must be 'rwa' or 'lab', got {self.frame!r}")
        if self.shots < 0:
            raise ConfigError("shots must be >= 0")

    @property
    def readout_modes(self) -> tuple[int, ...]:
        if self.readout.modes is None:
            return tuple(int(m) for m in self.lattice.indices)
        return tuple(self.readout.modes)


# -- swaps -------------------------------------------------------------------

@lru_cache(maxsize=512)
def _swap_calibration(lattice: ModeLattice, kappa: float, scaling: str, m: int):
    coupler = QubitCoupler(mode_frequency(lattice, m), kappa, CouplingScaling(scaling))
    prop = StaticPropagator(build_lab_hamiltonian(lattice, (), coupler))
    qubit = np.zeros(lattice.n_modes + 1, dtype=complex)
    qubit[0] = 1.0

    def p1(t):
        return abs(prop.apply(qubit, t)[0]) ** 2

    guess = 1.0 / (4.0 * kappa)
    grid = np.linspace(0.5 * guess, 1.5 * guess, 401)
    p1_grid = np.abs(prop.apply_many(qubit, grid)[:, 0]) ** 2
    i = int(np.argmin(p1_grid))
    step = grid[1] - grid[0]
    res = minimize_scalar(p1, bounds=(grid[i] - step, grid[i] + step), method="bounded",
                          options={"xatol": 1e-10})
    duration = float(res.x)
    row = prop.matrix(duration)[0]
    return duration, row


def swap_duration(lattice: ModeLattice, coupler: QubitCoupler, m: int = 0) -> float:
    """Duration of the first qubit Rabi minimum with the qubit parked on mode ``m``."""
    if coupler.kappa <= 0:
        raise ProtocolError("JC coupling is zero: no swap possible")
    lattice.position(m)
    return _swap_calibration(lattice, float(coupler.kappa), coupler.scaling.value, int(m))[0]


def _readout_rows(lattice: ModeLattice, coupler: QubitCoupler, modes: Sequence[int]):
    """Qubit row of the readout swap propagator for each mode (lab frame)."""
    if coupler.kappa <= 0:
        raise ProtocolError("JC coupling is zero: no swap possible")
    rows = [_swap_calibration(lattice, float(coupler.kappa), coupler.scaling.value, int(m))[1]
            for m in modes]
    return np.array(rows)


def _load_from_qubit(lattice: ModeLattice, coupler: QubitCoupler, duration: float,
                     superposition: bool) -> SingleExcitationState:
    """Evolve the (partially) excited qubit under static JC coupling.

    Returns the lab-frame state; the qubit is still populated.
    """
    amp = 1.0 / math.sqrt(2.0) if superposition else 1.0
    c_vac = amp if superposition else 0.0
    state = SingleExcitationState(c_vac, amp, np.zeros(lattice.n_modes, dtype=complex))
    prop = StaticPropagator(build_lab_hamiltonian(lattice, (), coupler))
    vec = prop.apply(state.vector(True), duration)
    return state.with_vector(vec, True)


@dataclass(frozen=True)
class Preparation:
    """Prepared photon in the ladder frame plus bookkeeping of the load step."""

    state: SingleExcitationState
    duration: float
    residual_p1: float
    warning: str | None = None


def _to_ladder(lab_state: SingleExcitationState, lattice: ModeLattice, t: float):
    # Referencing mode phases to the start of loading is equivalent to
    # phase-locking the drive to the load pulse.
    return SingleExcitationState(lab_state.c_vac, lab_state.c_q,
                                 lab_to_ladder(lab_state.c_modes, lattice, t),
                                 lab_state.p_lost)


def prepare_single_site(config: ExperimentConfig, m: int | None = None) -> Preparation:
    """Load one photon into mode ``m`` with a calibrated full swap."""
    lattice = config.lattice
    prep = config.prep if isinstance(config.prep, SingleSitePrep) else SingleSitePrep()
    m = prep.m if m is None else m
    pos = lattice.position(m)
    superposition = prep.vacuum_superposition
    if prep.ideal:
        state = SingleExcitationState.mode_photon(lattice.n_modes, pos)
        if superposition:
            c = state.c_modes / math.sqrt(2.0)
            state = SingleExcitationState(1.0 / math.sqrt(2.0), 0.0, c)
        return Preparation(state, 0.0, 0.0)

    coupler = config.coupler.tuned_to(lattice, m)
    duration = swap_duration(lattice, coupler, m)
    lab = _load_from_qubit(lattice, coupler, duration, superposition)
    loaded = float(lab.populations[pos]) / (0.5 if superposition else 1.0)
    if loaded < MIN_SWAP_FIDELITY:
        raise ProtocolError(
            f"swap into mode {m} reached {loaded:.4f} < {MIN_SWAP_FIDELITY}; "
            f"residual P1 = {lab.p_qubit:.4f}"
        )
    residual = lab.p_qubit
    state = reset_qubit(_to_ladder(lab, lattice, duration))
    return Preparation(state, duration, residual)


def prepare_wave_packet(config: ExperimentConfig) -> Preparation:
    """Let the qubit emit into many modes at strong coupling."""
    lattice = config.lattice
    prep = config.prep if isinstance(config.prep, WavePacketPrep) else WavePacketPrep()
    if prep.kappa <= 0:
        raise ProtocolError("JC coupling is zero: the qubit cannot emit")
    coupler = replace(config.coupler, kappa=prep.kappa)
    prop = StaticPropagator(build_lab_hamiltonian(lattice, (), coupler))
    amp = 1.0 / math.sqrt(2.0) if prep.vacuum_superposition else 1.0
    start = np.zeros(lattice.n_modes + 1, dtype=complex)
    start[0] = amp

    # P1 oscillates on the scale of the inverse coupling; sample well below it.
    step = min(1e-3, 0.02 / prep.kappa)
    t_stop = None
    chunk = 2000
    t0 = 0.0
    while t0 < prep.emission_cap and t_stop is None:
        ts = t0 + step * np.arange(1, chunk + 1)
        ts = ts[ts <= prep.emission_cap + 1e-12]
        if ts.size == 0:
            break
        p1 = np.abs(prop.apply_many(start, ts)[:, 0]) ** 2 / amp**2
        below = np.nonzero(p1 < prep.stop_p1)[0]
        if below.size:
            t_stop = float(ts[below[0]])
        t0 = float(ts[-1])
    message = None
    if t_stop is None:
        t_stop = prep.emission_cap
    vec = prop.apply(start, t_stop)
    residual = abs(vec[0]) ** 2 / amp**2
    if residual >= 0.05:
        message = (f"emission cap {prep.emission_cap} us reached with residual "
                   f"P1 = {residual:.3f}")
        warnings.warn(message, ProtocolWarning, stacklevel=2)
    lab = SingleExcitationState(amp if prep.vacuum_superposition else 0.0,
                                vec[0], vec[1:])
    state = reset_qubit(_to_ladder(lab, lattice, t_stop))
    if prep.center_k:
        state = _center_quasimomentum(state, lattice)
    return Preparation(state, t_stop, float(residual), message)


def _center_quasimomentum(state: SingleExcitationState, lattice: ModeLattice):
    """Remove the mean phase gradient across modes.

    A gradient ``k`` is the same as starting the drive ``k / (2 pi fsr)``
    later, so this picks the drive timing that centres the packet at k = 0.
    """
    c = state.c_modes
    k_mean = float(np.angle(np.vdot(c[:-1], c[1:])))
    shifted = c * np.exp(-1j * k_mean * lattice.indices)
    return SingleExcitationState(state.c_vac, state.c_q, shifted, state.p_lost)


def prepare(config: ExperimentConfig) -> Preparation:
    if isinstance(config.prep, WavePacketPrep):
        return prepare_wave_packet(config)
    return prepare_single_site(config)


def readout_mode(config: ExperimentConfig, state: SingleExcitationState, m: int,
                 t: float = 0.0) -> float:
    """P1 after resetting the qubit and reversing the swap on mode ``m``.

    ``state`` is in the ladder frame at schedule time ``t``.
    """
    return float(readout_all(config, [state], [t], [m])[0, 0])


def readout_all(config: ExperimentConfig, states, times, modes) -> np.ndarray:
    """P1 readout for every (state, mode) pair; shape ``(len(modes), len(states))``."""
    lattice = config.lattice
    rows = _readout_rows(lattice, config.coupler, modes)
    out = np.empty((len(modes), len(states)))
    for j, (state, t) in enumerate(zip(states, times)):
        lab_modes = ladder_to_lab(state.c_modes, lattice, t)
        out[:, j] = np.abs(rows[:, 1:] @ lab_modes) ** 2
    return out


def measure_quadratures(state: SingleExcitationState, m: int,
                        lattice: ModeLattice | None = None) -> tuple[float, float]:
    """Expectation values of the X and Y quadratures of mode ``m``.

    Without a lattice ``m`` is taken as the array position.
    """
    pos = lattice.position(m) if lattice is not None else m
    z = np.conj(state.c_vac) * state.c_modes[pos]
    return 2.0 * float(z.real), 2.0 * float(z.imag)


# -- schedules ---------------------------------------------------------------

def build_schedule(config: ExperimentConfig) -> Schedule:
    lattice = config.lattice
    drive = config.drive
    total = config.total_time
    segments = []
    if isinstance(drive, Reversal):
        if drive.half_period <= 0:
            raise ConfigError("half_period must be > 0")
        tones = drive.tones(lattice.fsr)
        t = 0.0
        sign = 1.0
        while t < total - 1e-12:
            dur = min(drive.half_period, total - t)
            detuning = sign * drive.detuning
            segments.append(_segment(config, tones, detuning, dur, f"reversal {len(segments)}"))
            # keep the drive phase continuous when its frequency switches
            new = drive.tones(lattice.fsr, -detuning)
            tones = tuple(replace(n, phase=o.phase + TWO_PI * (o.freq - n.freq) * (t + dur))
                          for o, n in zip(tones, new))
            t += dur
            sign = -sign
    else:
        segments.append(_segment(config, drive.tones(lattice.fsr), drive.detuning, total,
                                 "modulation"))
    return Schedule(lattice, tuple(segments), config.readout.dt)


def _segment(config, tones, detuning, duration, label):
    if config.frame == "lab":
        return Segment(duration, LabSpec(tuple(tones)), label)
    return Segment(duration, RwaSpec(tuple(tones), detuning), label)


# -- full experiment ---------------------------------------------------------

@dataclass(frozen=True)
class PopulationMap:
    """Populations indexed ``[mode, time]``."""

    times: np.ndarray
    modes: np.ndarray
    p: np.ndarray
    p1_readout: np.ndarray

    def __post_init__(self):
        if np.any(self.p < -1e-12) or np.any(self.p > 1 + 1e-12):
            raise ValueError("populations must lie in [0, 1]")
        if np.any(self.p.sum(axis=0) > 1 + 1e-6):
            raise ValueError("population per time exceeds 1")


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    populations: PopulationMap
    amplitudes: np.ndarray
    """Ladder-frame mode amplitudes ``C_m(t)`` over all lattice modes, ``[mode, time]``."""
    c_vac: np.ndarray
    preparation: Preparation
    trajectory: list = field(repr=False, default_factory=list)

    def wavefunction(self) -> np.ndarray:
        """``conj(C_vac) * C_m(t)``, the quantity the quadrature readout reconstructs."""
        return np.conj(self.c_vac)[None, :] * self.amplitudes


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Prepare, modulate and read out on the configured time grid."""
    prep = prepare(config)
    schedule = build_schedule(config)
    trajectory = run_schedule(prep.state, schedule, config.deco)
    times = np.array([t for t, _ in trajectory])
    states = [reset_qubit(s) for _, s in trajectory]
    amplitudes = np.array([s.c_modes for s in states]).T
    c_vac = np.array([s.c_vac for s in states])

    modes = np.array(config.readout_modes, dtype=int)
    positions = modes + config.lattice.n_left
    p = np.abs(amplitudes[positions]) ** 2
    p1 = readout_all(config, states, times, modes)
    if config.shots > 0:
        rng = np.random.default_rng(config.seed)
        p1 = rng.binomial(config.shots, np.clip(p1, 0.0, 1.0)) / config.shots
    pop = PopulationMap(times, modes, p, p1)
    return ExperimentResult(config, pop, amplitudes, c_vac, prep, trajectory)
