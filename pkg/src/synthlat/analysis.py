"""Derived quantities extracted from simulated populations and amplitudes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, EstimationError, FitError


@dataclass(frozen=True)
class BandMap:
    """Spectral intensity indexed ``[k, omega]`` with its per-k ridge."""

    k_grid: np.ndarray
    omega_grid: np.ndarray
    intensity: np.ndarray
    ridge: np.ndarray  # rows of (k, omega_peak)
    ridge_index: np.ndarray  # omega bin of the maximum in each k column

    @property
    def omega_step(self) -> float:
        return float(self.omega_grid[1] - self.omega_grid[0])

    def ridge_at(self, k: float) -> float:
        i = int(np.argmin(np.abs(self.k_grid - k)))
        return float(self.ridge[i, 1])


def _quadratic_offset(y_minus, y0, y_plus):
    denom = y_minus - 2.0 * y0 + y_plus
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (y_minus - y_plus) / denom, -0.5, 0.5))


def band_from_wavefunction(psi, dt: float, times=None, pad: int = 4,
                           window: str = "hann") -> BandMap:
    """Two-dimensional spectrum of ``psi[m, t]``.

    A plane wave ``exp(1j*(k0*m - 2*pi*f0*t))`` maps to a peak at ``(k0, f0)``.
    Time gets a Hann window and ``pad``-fold zero padding; the mode axis is
    transformed as is.
    """
    psi = np.asarray(psi, dtype=complex)
    n_m, n_t = psi.shape
    if n_m < 8 or n_t < 16:
        raise DomainError(f"need >= 8 modes and >= 16 time samples, got {psi.shape}")
    if times is not None:
        steps = np.diff(np.asarray(times, dtype=float))
        if np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, dt):
            raise DomainError("time samples are not uniformly spaced at dt")
    if window == "hann":
        w = np.hanning(n_t)
    elif window == "none":
        w = np.ones(n_t)
    else:
        raise DomainError(f"unknown window {window!r}")

    spec = np.fft.fft(np.fft.fft(psi * w[None, :], n=pad * n_t, axis=1), axis=0)
    k = 2.0 * np.pi * np.fft.fftfreq(n_m)
    k[k <= -np.pi + 1e-12] += 2.0 * np.pi
    omega = -np.fft.fftfreq(pad * n_t, d=dt)
    k_order = np.argsort(k)
    w_order = np.argsort(omega)
    intensity = np.abs(spec[np.ix_(k_order, w_order)]) ** 2
    peak = intensity.max()
    if peak > 0:
        intensity = intensity / peak
    k = k[k_order]
    omega = omega[w_order]

    d_omega = omega[1] - omega[0]
    idx = np.argmax(intensity, axis=1)
    ridge_w = np.empty(n_m)
    for i, j in enumerate(idx):
        off = 0.0
        if 0 < j < omega.size - 1:
            off = _quadratic_offset(*intensity[i, j - 1:j + 2])
        ridge_w[i] = omega[j] + off * d_omega
    ridge = np.column_stack([k, ridge_w])
    return BandMap(k, omega, intensity, ridge, idx)


def ridge_asymmetry(band: BandMap) -> float:
    """``max_k |omega(k) - omega(-k)|`` over k values present with their mirror."""
    best = 0.0
    for k, w in band.ridge:
        j = np.nonzero(np.abs(band.k_grid + k) < 1e-9)[0]
        if j.size:
            best = max(best, abs(w - band.ridge[j[0], 1]))
    return float(best)


@dataclass(frozen=True)
class LorentzianFit:
    center: float  # mode index
    fwhm: float  # MHz
    peak: float
    residual_rms: float
    iterations: int = 0

    def as_dict(self):
        return {"center": self.center, "fwhm_MHz": self.fwhm, "peak": self.peak,
                "residual_rms": self.residual_rms, "iterations": self.iterations}


def lorentzian(x, amplitude, center, width):
    """``amplitude * (width/2)**2 / ((x-center)**2 + (width/2)**2)``."""
    half = 0.5 * width
    return amplitude * half**2 / ((x - center) ** 2 + half**2)


def _half_max_width(x, y, i_peak):
    half = 0.5 * y[i_peak]

    def crossing(step):
        i = i_peak
        while 0 <= i + step < y.size and y[i + step] > half:
            i += step
        j = i + step
        if not 0 <= j < y.size:
            return x[i]
        # linear interpolation between i (above) and j (below)
        return x[i] + (x[j] - x[i]) * (y[i] - half) / (y[i] - y[j])

    return max(crossing(1) - crossing(-1), 1e-3)


def lorentzian_fit(populations, modes=None, spacing: float = 7.33,
                   max_iter: int = 200, xtol: float = 1e-10) -> LorentzianFit:
    """Least-squares Lorentzian over a mode distribution.

    ``center`` is returned in mode-index units and ``fwhm`` in MHz
    (index width times ``spacing``).
    """
    y = np.asarray(populations, dtype=float)
    x = np.arange(y.size, dtype=float) if modes is None else np.asarray(modes, dtype=float)
    if y.size < 5:
        raise FitError(f"need at least 5 points, got {y.size}")
    i_peak = int(np.argmax(y))
    if y[i_peak] <= 0 or np.count_nonzero(y > 1e-12 * y[i_peak]) < 3:
        raise FitError("insufficient support: fewer than three nonzero points",
                       {"nonzero": int(np.count_nonzero(y))})

    p0 = np.array([y[i_peak], x[i_peak], _half_max_width(x, y, i_peak)])

    def resid(p):
        return lorentzian(x, *p) - y

    def jac(p):
        a, c, w = p
        h = 0.5 * w
        d = (x - c) ** 2 + h**2
        shape = h**2 / d
        return np.column_stack([
            shape,
            a * h**2 * 2.0 * (x - c) / d**2,
            a * (h / d - h**3 / d**2),
        ])

    sol = least_squares(resid, p0, jac=jac, method="lm", xtol=xtol, ftol=1e-15,
                        gtol=1e-15, max_nfev=max_iter)
    amp, center, width = sol.x
    diag = {"status": int(sol.status), "nfev": int(sol.nfev), "x0": p0.tolist(),
            "x": sol.x.tolist(), "message": sol.message}
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)) or width == 0:
        raise FitError(f"Lorentzian fit did not converge: {sol.message}", diag)
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    return LorentzianFit(float(center), float(abs(width) * spacing), float(amp), rms,
                         int(sol.nfev))


def center_of_mass(populations, modes=None, renormalize: bool = True) -> float:
    p = np.asarray(populations, dtype=float)
    m = np.arange(p.size, dtype=float) if modes is None else np.asarray(modes, dtype=float)
    total = p.sum()
    if total <= 0:
        raise DomainError("total population is zero")
    moment = float(np.dot(m, p))
    return moment / total if renormalize else moment


def spread(populations, modes=None) -> float:
    """Population variance over mode index (renormalized)."""
    p = np.asarray(populations, dtype=float)
    m = np.arange(p.size, dtype=float) if modes is None else np.asarray(modes, dtype=float)
    mu = center_of_mass(p, m)
    return float(np.dot((m - mu) ** 2, p) / p.sum())


def bloch_period_estimate(times, values, pad: int = 8) -> float:
    """Period (us) of the dominant oscillation in a uniformly sampled series.

    The series is mean-subtracted, Hann-windowed and zero-padded before the
    transform; the peak bin is refined by a parabola through its neighbors.
    Raises :class:`EstimationError` when the peak is under three times the
    spectral median or fewer than 1.5 periods fit in the record.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(values, dtype=float)
    if t.size < 8 or t.size != x.size:
        raise DomainError("need matching time and value arrays with >= 8 samples")
    dt = t[1] - t[0]
    if np.max(np.abs(np.diff(t) - dt)) > 1e-9 * max(1.0, dt):
        raise DomainError("time samples are not uniformly spaced")
    span = t[-1] - t[0]
    y = (x - x.mean()) * np.hanning(x.size)
    mag = np.abs(np.fft.rfft(y, n=pad * x.size))
    freqs = np.fft.rfftfreq(pad * x.size, d=dt)
    mag[0] = 0.0
    i = int(np.argmax(mag))
    median = float(np.median(mag[1:]))
    if mag[i] == 0 or mag[i] < 3.0 * median:
        raise EstimationError("no significant spectral peak")
    off = _quadratic_offset(*mag[i - 1:i + 2]) if 0 < i < mag.size - 1 else 0.0
    f_peak = freqs[i] + off * (freqs[1] - freqs[0])
    if f_peak <= 0:
        raise EstimationError("dominant component is at zero frequency")
    period = 1.0 / f_peak
    if period > span / 1.5:
        raise EstimationError(
            f"dominant period {period:.3g} us exceeds two thirds of the {span:.3g} us record"
        )
    return float(period)


def asymmetry_metric(p, modes=None, center=None) -> float:
    """Mirror asymmetry of ``p[mode, time]`` about the initial center of mass."""
    p = np.asarray(p, dtype=float)
    m = np.arange(p.shape[0]) if modes is None else np.asarray(modes)
    if center is None:
        center = center_of_mass(p[:, 0], m)
    pivot = int(round(center))
    lookup = {int(v): i for i, v in enumerate(m)}
    diff = 0.0
    for i, v in enumerate(m):
        j = lookup.get(2 * pivot - int(v))
        if j is not None:
            diff += float(np.abs(p[i] - p[j]).sum())
    total = float(p.sum())
    return diff / total if total > 0 else 0.0
