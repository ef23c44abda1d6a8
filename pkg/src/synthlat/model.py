"""Configuration types and single-excitation Hamiltonians.

Frequencies are ordinary frequencies in MHz and times are in microseconds.
Matrices are returned in angular units (rad/us), i.e. multiplied by 2*pi.

Basis ordering: when the qubit is present it is index 0 and mode ``m`` sits
at ``1 + m + n_left``; without the qubit mode ``m`` sits at ``m + n_left``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError

TWO_PI = 2.0 * math.pi

#: Largest JC coupling the tunable coupler reaches in the device (MHz).
KAPPA_MAX = 7.4
#: Default tolerance (MHz) between a tone's per-order frequency and fsr + detuning.
RESONANCE_TOL = 1e-3


@dataclass(frozen=True)
class ModeLattice:
    """Evenly spaced cable modes relabeled around the mode nearest the qubit."""

    n_left: int = 16
    n_right: int = 16
    omega0: float = 4320.0
    fsr: float = 7.33
    base_abs_index: int = 592

    def __post_init__(self):
        if not self.fsr > 0:
            raise ConfigError(f"fsr must be > 0, got {self.fsr}")
        if self.n_left < 0 or self.n_right < 0:
            raise ConfigError("n_left and n_right must be >= 0")
        if self.n_left + self.n_right + 1 < 2:
            raise ConfigError("lattice needs at least two modes")

    @property
    def n_modes(self) -> int:
        return self.n_left + self.n_right + 1

    @property
    def indices(self) -> np.ndarray:
        """Relative mode indices ``-n_left .. n_right``."""
        return np.arange(-self.n_left, self.n_right + 1)

    @property
    def abs_indices(self) -> np.ndarray:
        return self.indices + self.base_abs_index

    @property
    def frequencies(self) -> np.ndarray:
        return self.omega0 + self.indices * self.fsr

    def position(self, m: int) -> int:
        """Array position of relative index ``m``."""
        if not -self.n_left <= m <= self.n_right:
            raise DomainError(
                f"mode index {m} outside valid span [{-self.n_left}, {self.n_right}]"
            )
        return int(m) + self.n_left

    def contains(self, m: int) -> bool:
        return -self.n_left <= m <= self.n_right


@dataclass(frozen=True)
class DriveTone:
    """One parametric drive tone on the modulator.

    ``freq`` is the drive frequency in MHz, ``phase`` in radians and
    ``strength`` the resulting hopping rate g in MHz.
    """

    order: int
    freq: float
    phase: float = 0.0
    strength: float = 0.0

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError(f"tone order must be >= 1, got {self.order}")
        if self.strength < 0:
            raise ConfigError(f"tone strength must be >= 0, got {self.strength}")
        if not math.isfinite(self.freq):
            raise ConfigError("tone frequency must be finite")

    @classmethod
    def resonant(cls, fsr, order, detuning=0.0, strength=0.0, phase=0.0):
        """Tone at ``order * (fsr + detuning)``, the frequency that couples
        modes ``order`` sites apart with tilt ``detuning``."""
        return cls(order=order, freq=order * (fsr + detuning), phase=phase,
                   strength=strength)

    def detuning(self, fsr: float) -> float:
        """Per-order detuning ``freq / order - fsr`` in MHz."""
        delta = self.freq / self.order - fsr
        if abs(delta) > 0.1 * fsr:
            warnings.warn(
                f"tone detuning {delta:.4g} MHz is not small compared to fsr {fsr}",
                stacklevel=2,
            )
        return delta


class CouplingScaling(str, enum.Enum):
    FLAT = "flat"
    SQRT_OMEGA = "sqrt_omega"


@dataclass(frozen=True)
class QubitCoupler:
    """Qubit frequency and JC coupling strength (both MHz)."""

    omega_q: float = 4320.0
    kappa: float = 0.36
    scaling: CouplingScaling = CouplingScaling.FLAT

    def __post_init__(self):
        object.__setattr__(self, "scaling", CouplingScaling(self.scaling))
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        if self.kappa > KAPPA_MAX:
            warnings.warn(
                f"kappa {self.kappa} MHz exceeds the coupler range 0..{KAPPA_MAX} MHz",
                stacklevel=2,
            )

    def kappas(self, lattice: ModeLattice) -> np.ndarray:
        """Per-mode coupling in MHz."""
        if self.scaling is CouplingScaling.SQRT_OMEGA:
            return self.kappa * np.sqrt(lattice.frequencies / self.omega_q)
        return np.full(lattice.n_modes, float(self.kappa))

    def tuned_to(self, lattice: ModeLattice, m: int, kappa: float | None = None):
        """Copy with the qubit parked on mode ``m``."""
        return QubitCoupler(
            omega_q=mode_frequency(lattice, m),
            kappa=self.kappa if kappa is None else kappa,
            scaling=self.scaling,
        )


@dataclass(frozen=True)
class SingleExcitationState:
    """Amplitudes over vacuum, qubit and modes, plus population already lost."""

    c_vac: complex
    c_q: complex
    c_modes: np.ndarray
    p_lost: float = 0.0

    def __post_init__(self):
        modes = np.array(self.c_modes, dtype=complex)
        modes.setflags(write=False)
        object.__setattr__(self, "c_modes", modes)
        object.__setattr__(self, "c_vac", complex(self.c_vac))
        object.__setattr__(self, "c_q", complex(self.c_q))
        object.__setattr__(self, "p_lost", float(self.p_lost))
        if self.p_lost < -1e-12:
            raise DomainError(f"p_lost must be >= 0, got {self.p_lost}")

    @classmethod
    def mode_photon(cls, n_modes: int, pos: int, phase: float = 0.0):
        """One photon in the mode at array position ``pos``."""
        c = np.zeros(n_modes, dtype=complex)
        c[pos] = np.exp(1j * phase)
        return cls(0.0, 0.0, c)

    @classmethod
    def excited_qubit(cls, n_modes: int):
        return cls(0.0, 1.0, np.zeros(n_modes, dtype=complex))

    @classmethod
    def vacuum(cls, n_modes: int):
        return cls(1.0, 0.0, np.zeros(n_modes, dtype=complex))

    @property
    def n_modes(self) -> int:
        return self.c_modes.size

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.c_modes) ** 2

    @property
    def p_qubit(self) -> float:
        return abs(self.c_q) ** 2

    def total(self) -> float:
        """Left-hand side of the normalization identity (should be 1)."""
        return (abs(self.c_vac) ** 2 + self.p_qubit
                + float(self.populations.sum()) + self.p_lost)

    def vector(self, with_qubit: bool) -> np.ndarray:
        if with_qubit:
            return np.concatenate(([self.c_q], self.c_modes))
        return self.c_modes.copy()

    def with_vector(self, vec: np.ndarray, with_qubit: bool, p_lost=None):
        lost = self.p_lost if p_lost is None else p_lost
        if with_qubit:
            return SingleExcitationState(self.c_vac, vec[0], vec[1:], lost)
        return SingleExcitationState(self.c_vac, self.c_q, vec, lost)


class Frame(str, enum.Enum):
    LAB = "lab"
    ROTATING = "rotating"


@dataclass(frozen=True)
class HamiltonianMatrix:
    entries: np.ndarray
    frame: Frame
    has_qubit: bool = False
    detuning: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        h = np.array(self.entries, dtype=complex)
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))


def mode_frequency(lattice: ModeLattice, m: int) -> float:
    """Frequency of relative mode ``m`` in MHz."""
    lattice.position(m)
    return lattice.omega0 + m * lattice.fsr


def modulation_pattern(lattice: ModeLattice) -> np.ndarray:
    """Signed all-to-all coupling pattern ``(-1)**(m+n)`` with a zero diagonal.

    Uses absolute mode numbers for the parity.
    """
    sign = np.where(lattice.abs_indices % 2 == 0, 1.0, -1.0)
    pattern = np.outer(sign, sign)
    np.fill_diagonal(pattern, 0.0)
    return pattern


def modulation_amplitude(tones: Sequence[DriveTone], t: float) -> float:
    """Sum of ``2 g_l cos(Omega_l t + phi_l)`` over tones, in MHz."""
    return float(sum(2.0 * tone.strength * math.cos(TWO_PI * tone.freq * t + tone.phase)
                     for tone in tones))


def lab_static_part(lattice: ModeLattice, coupler: QubitCoupler | None = None):
    """Time-independent lab-frame part (rad/us), relative to mode 0's frequency."""
    detunings = lattice.indices * lattice.fsr
    if coupler is None:
        return TWO_PI * np.diag(detunings).astype(complex)
    n = lattice.n_modes
    h = np.zeros((n + 1, n + 1), dtype=complex)
    h[0, 0] = coupler.omega_q - lattice.omega0
    h[1:, 1:] = np.diag(detunings)
    kap = coupler.kappas(lattice)
    h[0, 1:] = kap
    h[1:, 0] = kap
    return TWO_PI * h


def lab_modulation_operator(lattice: ModeLattice, with_qubit: bool) -> np.ndarray:
    """Operator multiplying the modulation amplitude, in rad/us per MHz."""
    pattern = TWO_PI * modulation_pattern(lattice)
    if not with_qubit:
        return pattern.astype(complex)
    n = lattice.n_modes
    op = np.zeros((n + 1, n + 1), dtype=complex)
    op[1:, 1:] = pattern
    return op


def build_lab_hamiltonian(lattice: ModeLattice, tones: Sequence[DriveTone] = (),
                          coupler: QubitCoupler | None = None,
                          t: float = 0.0) -> HamiltonianMatrix:
    """Lab-frame Hamiltonian at time ``t``.

    Diagonal energies are measured from the frequency of mode 0 so entries
    stay small; only differences matter within one excitation.
    """
    if t < 0:
        raise DomainError(f"time must be >= 0, got {t}")
    with_qubit = coupler is not None
    h = lab_static_part(lattice, coupler)
    amp = modulation_amplitude(tones, t)
    if amp:
        h = h + amp * lab_modulation_operator(lattice, with_qubit)
    return HamiltonianMatrix(h, Frame.LAB, has_qubit=with_qubit)


def check_resonance(lattice: ModeLattice, tones: Sequence[DriveTone],
                    detuning: float, tol: float = RESONANCE_TOL) -> None:
    for tone in tones:
        mismatch = tone.freq / tone.order - (lattice.fsr + detuning)
        if abs(mismatch) >= tol:
            raise ConfigError(
                f"tone of order {tone.order} at {tone.freq} MHz is off the "
                f"resonance {tone.order}*(fsr+detuning) by {mismatch:.3g} MHz per order"
            )


def build_rwa_hamiltonian(lattice: ModeLattice, tones: Sequence[DriveTone],
                          detuning: float = 0.0, tol: float = RESONANCE_TOL,
                          ring: bool = False) -> HamiltonianMatrix:
    """Static tight-binding Hamiltonian in the frame rotating at
    ``omega_m + m*detuning``.

    ``ring=True`` closes the chain periodically; it exists for spectral
    checks against the infinite-chain dispersion.
    """
    check_resonance(lattice, tones, detuning, tol)
    n = lattice.n_modes
    h = np.diag(-lattice.indices * detuning).astype(complex)
    for tone in tones:
        hop = (-1) ** tone.order * tone.strength * np.exp(1j * tone.phase)
        for i in range(n):
            j = i + tone.order
            if j >= n:
                if not ring:
                    break
                j %= n
                if j == i:
                    raise DomainError("ring too short for this hopping order")
            h[i, j] += hop
            h[j, i] += np.conj(hop)
    return HamiltonianMatrix(TWO_PI * h, Frame.ROTATING, has_qubit=False,
                             detuning=detuning)


def canonical_phase(x: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    y = math.remainder(x, TWO_PI)
    if y <= -math.pi:
        y += TWO_PI
    return y


def effective_flux(phi1: float, phi2: float, canonical: bool = False) -> float:
    """Flux through one triangle of nearest and next-nearest hops."""
    flux = 2.0 * phi1 - phi2
    return canonical_phase(flux) if canonical else flux


def dispersion_analytic(tones: Sequence[DriveTone], k):
    """Band energy (MHz) of the untilted infinite chain at quasimomentum ``k``."""
    k = np.asarray(k, dtype=float)
    e = np.zeros_like(k)
    for tone in tones:
        e = e + 2.0 * (-1) ** tone.order * tone.strength * np.cos(tone.order * k + tone.phase)
    return e


def group_velocity(tones: Sequence[DriveTone], k):
    """Derivative of :func:`dispersion_analytic` with respect to ``k`` (MHz per rad)."""
    k = np.asarray(k, dtype=float)
    v = np.zeros_like(k)
    for tone in tones:
        v = v - 2.0 * (-1) ** tone.order * tone.strength * tone.order * np.sin(
            tone.order * k + tone.phase)
    return v
