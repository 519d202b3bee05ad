"""Phenomenological model of coherent-state preparation by a sinusoidal kick.

A burst of ``cycles`` sine periods at ``drive_freq`` displaces a mode of
frequency ``mode_freq``. The linear response of a driven oscillator gives

    |alpha| = kappa * V_k * T * |sinc(delta T / 2)|,   T = cycles * 2 pi / drive_freq

with ``delta = drive_freq - mode_freq``. The excitation vanishes whenever
``delta T`` is a non-zero multiple of 2 pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .units import TWO_PI


def _default_kappa(v_lo=10e-3, a_lo=2.0, v_hi=40e-3, a_hi=11.0, cycles=100,
                   mode_freq=TWO_PI * 1.8e6):
    # least squares through the origin on the two ends of the calibrated range
    t = cycles * TWO_PI / mode_freq
    v = np.array([v_lo, v_hi])
    a = np.array([a_lo, a_hi])
    return float(v @ a / (v @ v) / t)


#: |alpha| per (V s); maps 10-40 mV, 100 cycles at 1.8 MHz onto roughly |alpha| = 2.7-10.8
DEFAULT_KAPPA = _default_kappa()


@dataclass(frozen=True)
class KickModel:
    amplitude: float
    kappa: float = DEFAULT_KAPPA
    cycles: int = 100
    drive_freq: float = TWO_PI * 1.8e6
    mode_freq: float = TWO_PI * 1.8e6

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if not self.drive_freq > 0 or not self.mode_freq > 0:
            raise ValueError("frequencies must be positive")

    @property
    def duration(self):
        return self.cycles * TWO_PI / self.drive_freq


def kick_to_alpha(kick: KickModel) -> float:
    t = kick.duration
    delta = kick.drive_freq - kick.mode_freq
    # np.sinc(x) = sin(pi x) / (pi x)
    return float(kick.kappa * abs(kick.amplitude) * t * abs(np.sinc(delta * t / (2 * np.pi))))
