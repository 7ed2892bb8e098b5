"""
Discrete dephasing spectra.

A spectrum is a finite set of tones ``N_k cos(2 pi f_k t + alpha_k)`` (angular
amplitudes in rad/s) plus an optional slow-drift term characterized only by the
product ``P = (g mu_B B_slow / h) f_slow`` in Hz^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

G_FACTOR = 2.0023
BOHR_MAGNETON_HZ_PER_GAUSS = 1.399625e6  # mu_B / h
UG_PER_GAUSS = 1e6

FREQ_TOL_HZ = 1e-9


@dataclass(frozen=True)
class UnitsConfig:
    """Field-to-angular-frequency conversion ``N = kappa * B``.

    ``kappa`` is in rad s^-1 per gauss.
    """

    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidArgumentError(f"kappa must be positive, got {self.kappa}")

    @property
    def kappa_per_ug(self) -> float:
        return self.kappa / UG_PER_GAUSS


def default_units() -> UnitsConfig:
    """Zeeman pair of the Sr+ 5S1/2 ground state: 2 pi x 2.8025 MHz/G."""
    return UnitsConfig(2.0 * math.pi * G_FACTOR * BOHR_MAGNETON_HZ_PER_GAUSS)


@dataclass(frozen=True)
class NoiseTone:
    """One spectral line.

    ``phase=None`` means the phase is uniformly random and independent of every
    other tone; a float locks the tone to that offset (stored in ``[0, 2 pi)``).
    """

    amplitude: float
    frequency: float
    phase: float | None = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise InvalidArgumentError(f"tone amplitude must be >= 0, got {self.amplitude}")
        if self.frequency < 0:
            raise InvalidArgumentError(f"tone frequency must be >= 0, got {self.frequency}")
        if self.phase is not None:
            object.__setattr__(self, "phase", float(self.phase) % (2.0 * math.pi))

    @property
    def locked(self) -> bool:
        return self.phase is not None


@dataclass(frozen=True)
class DiscreteSpectrum:
    tones: tuple[NoiseTone, ...] = field(default_factory=tuple)
    slow_drift: float = 0.0

    def __post_init__(self):
        tones = tuple(self.tones)
        object.__setattr__(self, "tones", tones)
        if self.slow_drift < 0:
            raise InvalidArgumentError(f"slow drift product must be >= 0, got {self.slow_drift}")
        freqs = sorted(t.frequency for t in tones)
        for a, b in zip(freqs, freqs[1:]):
            if b - a <= FREQ_TOL_HZ:
                raise InvalidArgumentError(f"duplicate tone frequency {a} Hz")

    def __len__(self):
        return len(self.tones)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([t.amplitude for t in self.tones], dtype=float)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([t.frequency for t in self.tones], dtype=float)

    @property
    def offsets(self) -> np.ndarray:
        """Locked phase offsets, NaN for random-phase tones."""
        return np.array([np.nan if t.phase is None else t.phase for t in self.tones], dtype=float)

    @property
    def all_random(self) -> bool:
        return not any(t.locked for t in self.tones)

    @property
    def all_locked(self) -> bool:
        return all(t.locked for t in self.tones)

    def scaled(self, factor: float) -> "DiscreteSpectrum":
        """Copy with every tone amplitude and the drift product multiplied by ``factor``."""
        tones = tuple(NoiseTone(t.amplitude * factor, t.frequency, t.phase) for t in self.tones)
        return DiscreteSpectrum(tones, self.slow_drift * factor)


def tone_from_field(B_ug: float, f: float, phase: float | None = None,
                    units: UnitsConfig | None = None) -> NoiseTone:
    """Tone of field amplitude ``B_ug`` (microgauss) at ``f`` Hz."""
    if B_ug < 0:
        raise InvalidArgumentError(f"field amplitude must be >= 0, got {B_ug}")
    units = units or default_units()
    return NoiseTone(units.kappa_per_ug * B_ug, f, phase)


def field_from_tone(tone: NoiseTone, units: UnitsConfig | None = None) -> float:
    """Inverse of :func:`tone_from_field`; returns microgauss."""
    units = units or default_units()
    return tone.amplitude / units.kappa_per_ug


def noise_index(N: float, T: float, c: float) -> float:
    """``eta = c N T``; ``c = 2/pi`` for a square wave, about 0.42 for Uhrig."""
    if N < 0 or T < 0 or c < 0:
        raise InvalidArgumentError("noise index arguments must be non-negative")
    return c * N * T


def sample_noise(spectrum: DiscreteSpectrum, phases: Sequence[float], t):
    """Time-domain noise ``sum_k N_k cos(2 pi f_k t + alpha_k)`` in rad/s.

    The slow-drift term is not represented in the time domain.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (len(spectrum),):
        raise InvalidArgumentError(
            f"expected {len(spectrum)} phases, got {phases.shape[0] if phases.ndim else 0}"
        )
    t = np.asarray(t, dtype=float)
    if not len(spectrum):
        return np.zeros_like(t)[()]
    arg = 2.0 * np.pi * spectrum.frequencies * t[..., None] + phases
    out = np.sum(spectrum.amplitudes * np.cos(arg), axis=-1)
    return out[()] if out.ndim == 0 else out
