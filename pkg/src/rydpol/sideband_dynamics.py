"""Carrier and sideband Rabi flopping of a trapped ion beyond the Lamb-Dicke regime."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import constants
from scipy.special import gammaln

from .errors import InvalidSideband
from .phonon_stats import DEFAULT_TAIL_MASS, PhononDistribution
from .units import MASS_CA40

QUADRUPOLE_WAVELENGTH = 729.147e-9


def lamb_dicke_parameter(omega_mode, angle=np.pi / 4, wavelength=QUADRUPOLE_WAVELENGTH,
                         mass=MASS_CA40):
    """eta = k cos(angle) sqrt(hbar / (2 M omega)) for a beam at ``angle`` to the mode."""
    k = 2 * np.pi / wavelength
    return k * np.cos(angle) * np.sqrt(constants.hbar / (2 * mass * omega_mode))


def laguerre_table(n_max, a, x):
    """Generalized Laguerre values ``L_n^a(x)`` for ``n = 0..n_max`` by upward recurrence."""
    out = np.empty(n_max + 1)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 + a - x
    for n in range(2, n_max + 1):
        out[n] = ((2 * n - 1 + a - x) * out[n - 1] - (n - 1 + a) * out[n - 2]) / n
    return out


def rabi_frequency(n, s, omega0, eta, lamb_dicke=False):
    """Rabi frequency of the ``|n> -> |n + s>`` transition (rad/s).

    Uses the full Laguerre-polynomial coupling. ``lamb_dicke=True`` switches
    to the first-order approximation ``omega0 * eta^|s| * sqrt(n_>! / n_<!)``,
    kept only for comparisons.

    The returned value can be negative; only its magnitude is physical.
    """
    s = int(s)
    n_arr = np.atleast_1d(np.asarray(n, dtype=int))
    if np.any(n_arr < 0):
        raise ValueError("phonon number must be >= 0")
    if np.any(n_arr + s < 0):
        raise InvalidSideband(f"sideband {s} from n={n_arr.min()} ends below ground")
    lo = np.minimum(n_arr, n_arr + s)
    hi = np.maximum(n_arr, n_arr + s)
    a = abs(s)
    if n_arr.size == 0:
        return np.zeros(0)
    if lamb_dicke:
        out = omega0 * eta**a * np.exp(0.5 * (gammaln(hi + 1.0) - gammaln(lo + 1.0)))
    else:
        lag = laguerre_table(int(lo.max()), a, eta * eta)[lo]
        out = (omega0 * np.exp(-0.5 * eta * eta) * eta**a
               * np.exp(0.5 * (gammaln(lo + 1.0) - gammaln(hi + 1.0))) * lag)
    return out if np.ndim(n) else float(out[0])


@dataclass(frozen=True)
class RabiModel:
    """Parameters of resonant Rabi flopping on the s-th sideband.

    ``eta_rel_uncertainty`` records how well the Lamb-Dicke parameter is known;
    it is used to draw nuisance values in Monte-Carlo studies.
    """

    omega0: float
    eta: float
    gamma_dec: float = 0.0
    amplitude: float = 1.0
    sideband_order: int = 0
    eta_rel_uncertainty: float = 0.1
    lamb_dicke: bool = False

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if self.gamma_dec < 0:
            raise ValueError("gamma_dec must be >= 0")
        if not 0 < self.amplitude <= 1:
            raise ValueError("amplitude must lie in (0, 1]")

    def sideband(self, s):
        return RabiModel(self.omega0, self.eta, self.gamma_dec, self.amplitude, int(s),
                         self.eta_rel_uncertainty, self.lamb_dicke)


@lru_cache(maxsize=256)
def _rabi_table(s, omega0, eta, n_max, lamb_dicke):
    n = np.arange(max(0, -s), n_max + 1)
    return rabi_frequency(n, s, omega0, eta, lamb_dicke)


def _coupled_support(model, dist, tail_mass):
    n, p = dist.support(tail_mass)
    s = model.sideband_order
    ok = n + s >= 0
    n, p = n[ok], p[ok]
    if len(n) == 0:
        return np.zeros(0), p
    # tables are built in blocks of 64 phonons so nearby distributions share them
    n_max = 64 * (int(n.max()) // 64 + 1)
    table = _rabi_table(s, float(model.omega0), float(model.eta), n_max, model.lamb_dicke)
    return table[n - max(0, -s)], p


def excitation_probability(tau, model: RabiModel, dist: PhononDistribution,
                           tail_mass=DEFAULT_TAIL_MASS):
    """Upper-state probability after a pulse of length ``tau`` (s).

    ``sum_n P_n * A/2 * (1 - cos(Omega_{n,n+s} tau)) * exp(-gamma tau)``.
    States with ``n + s < 0`` are not coupled and contribute nothing.
    """
    tau = np.asarray(tau, dtype=float)
    omega, p = _coupled_support(model, dist, tail_mass)
    flat = tau.ravel()
    flop = p @ (1.0 - np.cos(np.outer(omega, flat)))
    out = 0.5 * model.amplitude * flop * np.exp(-model.gamma_dec * flat)
    return out.reshape(tau.shape) if tau.ndim else float(out[0])


@dataclass
class RabiDataset:
    """Measured excitation versus pulse duration for one transition."""

    taus: np.ndarray
    probabilities: np.ndarray
    shots: np.ndarray
    sideband_order: int = 0

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        self.shots = np.broadcast_to(np.asarray(self.shots, dtype=int), self.taus.shape).copy()
        if self.taus.shape != self.probabilities.shape:
            raise ValueError("taus and probabilities differ in length")
        if np.any(np.diff(self.taus) <= 0):
            raise ValueError("pulse durations must be strictly increasing")
        if np.any((self.probabilities < 0) | (self.probabilities > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(self.shots < 1):
            raise ValueError("shots must be >= 1")


def simulate_dataset(model: RabiModel, dist: PhononDistribution, taus, shots, seed,
                     tail_mass=DEFAULT_TAIL_MASS) -> RabiDataset:
    """Binomial shot-noise realisation of the flopping curve.

    ``seed`` may be an integer, a SeedSequence or a numpy Generator.
    """
    if int(shots) < 1:
        raise ValueError("shots must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    taus = np.asarray(taus, dtype=float)
    p = np.clip(excitation_probability(taus, model, dist, tail_mass), 0.0, 1.0)
    counts = rng.binomial(int(shots), p)
    return RabiDataset(taus, counts / int(shots), int(shots), model.sideband_order)
