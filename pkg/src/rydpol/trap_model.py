"""Secular frequencies of a single ion in a linear Paul trap.

The trapping potential is

    Phi = g_rf (X^2 - Y^2) cos(W t) - g_dc ((1 + eps) X^2 + (1 - eps) Y^2 - 2 Z^2)

and an internal state with static polarizability ``pol`` stiffens or softens
each mode. The radial modes take the ``(1 + eps)`` (x) and ``(1 - eps)`` (y)
factors. With the usual ordering omega_x > omega_y this makes eps negative.

All quantities are SI: rad/s, kg, C, V/m^2 and C m^2/V.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentFrequencies, UnconfinedTrap
from .units import AMU, E_CHARGE, MASS_CA40, angular_to_mhz, mhz_to_angular

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class ModeFrequencies:
    omega_x: float
    omega_y: float
    omega_z: float

    def as_array(self):
        return np.array([self.omega_x, self.omega_y, self.omega_z])

    def __getitem__(self, axis):
        return getattr(self, f"omega_{axis}")


@dataclass(frozen=True)
class TrapParameters:
    """Electrode gradients and drive of a linear Paul trap.

    A parameter set that does not confine a ground-state ion (zero
    polarizability) in all three directions is rejected on construction.
    """

    gamma_rf: float
    gamma_dc: float
    omega_rf: float
    epsilon: float
    mass: float = MASS_CA40
    charge: float = E_CHARGE

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not self.omega_rf > 0:
            raise ValueError("omega_rf must be positive")
        if not self.gamma_rf >= 0:
            raise ValueError("gamma_rf must be non-negative")
        if not self.gamma_dc > 0:
            raise ValueError("gamma_dc must be positive")
        if np.any(_radicands(self, 0.0) <= 0):
            raise UnconfinedTrap("trap does not confine a ground-state ion")

    def to_dict(self):
        freqs = secular_frequencies(self, 0.0)
        return {
            "omega_mhz": {a: float(angular_to_mhz(freqs[a])) for a in AXES},
            "rf_mhz": float(angular_to_mhz(self.omega_rf)),
            "mass_amu": self.mass / AMU,
            "charge_e": self.charge / E_CHARGE,
            "gamma_rf": self.gamma_rf,
            "gamma_dc": self.gamma_dc,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, data):
        """Build from a calibration document.

        Gradients take precedence when present; otherwise the trap is
        calibrated from ``omega_mhz``.
        """
        mass = float(data.get("mass_amu", MASS_CA40 / AMU)) * AMU
        charge = float(data.get("charge_e", 1.0)) * E_CHARGE
        omega_rf = float(mhz_to_angular(data["rf_mhz"]))
        if all(k in data for k in ("gamma_rf", "gamma_dc", "epsilon")):
            return cls(float(data["gamma_rf"]), float(data["gamma_dc"]), omega_rf,
                       float(data["epsilon"]), mass, charge)
        w = data["omega_mhz"]
        if isinstance(w, dict):
            w = [w[a] for a in AXES]
        wx, wy, wz = (float(v) for v in mhz_to_angular(w))
        return calibrate_gradients(wx, wy, wz, omega_rf, mass, charge)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _radicands(trap, pol):
    e, m = trap.charge, trap.mass
    g_rf, g_dc, eps = trap.gamma_rf, trap.gamma_dc, trap.epsilon
    rf_term = 2 * e**2 * g_rf**2 / (m**2 * trap.omega_rf**2)
    out = []
    for sign in (+1.0, -1.0):
        k = 1.0 + sign * eps
        out.append(rf_term - 2 * e * g_dc * k / m
                   - 2 * pol * (g_rf**2 + g_dc**2 * k**2) / m)
    out.append(4 * e * g_dc / m - 16 * pol * g_dc**2 / m)
    return np.array(out)


def secular_frequencies(trap: TrapParameters, pol: float = 0.0) -> ModeFrequencies:
    """Secular frequencies (rad/s) for an internal state of polarizability ``pol``.

    The exact square-root expressions are used, no expansion in ``pol``.
    Raises UnconfinedTrap when any radicand is not positive.
    """
    pol = float(pol)
    if not np.isfinite(pol):
        raise ValueError("polarizability must be finite")
    rad = _radicands(trap, pol)
    if np.any(rad <= 0):
        bad = [a for a, r in zip(AXES, rad) if r <= 0]
        raise UnconfinedTrap(f"no confinement along {', '.join(bad)} at P={pol:.4g}")
    return ModeFrequencies(*np.sqrt(rad))


def calibrate_gradients(omega_x, omega_y, omega_z, omega_rf, mass=MASS_CA40,
                        charge=E_CHARGE) -> TrapParameters:
    """Invert the ground-state secular frequencies to trap gradients.

    gamma_dc follows from omega_z, eps from the radial splitting
    (omega_x^2 - omega_y^2 = -eps omega_z^2) and gamma_rf from the radial sum.
    """
    w = np.array([omega_x, omega_y, omega_z], dtype=float)
    if np.any(w <= 0) or not omega_rf > 0:
        raise InconsistentFrequencies("frequencies must be positive")
    wx2, wy2, wz2 = w**2
    gamma_dc = mass * wz2 / (4 * charge)
    epsilon = (wy2 - wx2) / wz2
    g_rf2 = (wx2 + wy2 + wz2) * mass**2 * omega_rf**2 / (4 * charge**2)
    if g_rf2 <= 0 or gamma_dc <= 0:
        raise InconsistentFrequencies("inversion gives a non-physical gradient")
    return TrapParameters(float(np.sqrt(g_rf2)), float(gamma_dc), float(omega_rf),
                          float(epsilon), float(mass), float(charge))


def line_shift_per_phonon(trap: TrapParameters, pol: float) -> np.ndarray:
    """Per-phonon line shift omega'_i(pol) - omega_i(0) for (x, y, z), rad/s."""
    return secular_frequencies(trap, pol).as_array() - secular_frequencies(trap, 0.0).as_array()


def max_confining_polarizability(trap: TrapParameters) -> float:
    """Largest polarizability for which every mode stays confined."""
    e, m = trap.charge, trap.mass
    g_rf, g_dc, eps = trap.gamma_rf, trap.gamma_dc, trap.epsilon
    rf_term = 2 * e**2 * g_rf**2 / (m**2 * trap.omega_rf**2)
    limits = []
    for sign in (+1.0, -1.0):
        k = 1.0 + sign * eps
        limits.append((rf_term - 2 * e * g_dc * k / m) * m / (2 * (g_rf**2 + g_dc**2 * k**2)))
    limits.append(4 * e * g_dc / (16 * g_dc**2))
    return float(min(limits))


def paper_trap() -> TrapParameters:
    """40Ca+ trap at 2pi x {2.16, 1.8, 1.05} MHz with a 2pi x 14.11 MHz drive."""
    wx, wy, wz = mhz_to_angular([2.16, 1.8, 1.05])
    return calibrate_gradients(wx, wy, wz, float(mhz_to_angular(14.11)))
