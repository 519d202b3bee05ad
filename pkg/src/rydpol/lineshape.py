"""Phonon-weighted Rydberg excitation spectra.

Every joint Fock state ``(n_1, ..., n_k)`` of the enumerated modes contributes
one Voigt line displaced by ``sum_i n_i * delta_omega_i`` and weighted by the
product of the single-mode occupation probabilities. The spectrum is the
weighted sum of these lines, normalised so that ``amplitude`` is the peak
height of a single unshifted Fock line.

The zero-point shift is absorbed into ``center``. The axial mode is normally
folded into the Gaussian width; pass it as a third ``ModeSpec`` to enumerate
it explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import voigt_profile as _scipy_voigt

from .errors import TruncationOverflow
from .phonon_stats import DEFAULT_TAIL_MASS, PhononDistribution

DEFAULT_MAX_TERMS = 1_000_000
_CHUNK = 2_000_000


@dataclass(frozen=True)
class VoigtParams:
    """Gaussian standard deviation and Lorentzian FWHM, both in rad/s."""

    sigma: float
    gamma_l: float

    def __post_init__(self):
        if self.sigma < 0 or self.gamma_l < 0:
            raise ValueError("Voigt widths must be non-negative")
        if self.sigma == 0 and self.gamma_l == 0:
            raise ValueError("Voigt profile needs a non-zero width")

    @property
    def peak(self):
        return float(voigt_profile(0.0, 0.0, self))

    @property
    def fwhm(self):
        """Olivero-Longbothum approximation (0.02 % accurate)."""
        fg = 2.0 * np.sqrt(2.0 * np.log(2.0)) * self.sigma
        fl = self.gamma_l
        return 0.5346 * fl + np.sqrt(0.2166 * fl**2 + fg**2)


@dataclass(frozen=True)
class ModeSpec:
    delta_omega: float
    dist: PhononDistribution

    def __post_init__(self):
        if not np.isfinite(self.delta_omega):
            raise ValueError("delta_omega must be finite")


@dataclass(frozen=True)
class SpectrumModel:
    center: float
    modes: tuple
    voigt: VoigtParams
    amplitude: float = 1.0
    baseline: float = 0.0
    tail_mass: float = DEFAULT_TAIL_MASS
    max_terms: int = DEFAULT_MAX_TERMS

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if len(self.modes) > 3:
            raise ValueError("at most three motional modes")
        if not 0 < self.amplitude <= 1:
            raise ValueError("amplitude must lie in (0, 1]")
        if not 0 <= self.baseline < 1:
            raise ValueError("baseline must lie in [0, 1)")
        if self.baseline + self.amplitude > 1 + 1e-12:
            raise ValueError("baseline + amplitude exceeds unit probability")

    def with_shifts(self, shifts):
        modes = tuple(replace(m, delta_omega=float(d)) for m, d in zip(self.modes, shifts))
        return replace(self, modes=modes)


def voigt_profile(omega, center, params: VoigtParams):
    """Area-normalised Voigt density (Faddeeva based)."""
    x = np.asarray(omega, dtype=float) - center
    return _scipy_voigt(x, params.sigma, 0.5 * params.gamma_l)


def joint_lines(modes, tail_mass=DEFAULT_TAIL_MASS, max_terms=DEFAULT_MAX_TERMS):
    """Weights and phonon numbers of every retained joint Fock state.

    Returns ``(weights, occupations)`` where ``occupations`` has one column
    per mode. Joint weights below ``tail_mass / n_terms`` are dropped.
    """
    supports = [m.dist.support(tail_mass) for m in modes]
    n_terms = int(np.prod([len(n) for n, _ in supports], dtype=float)) if supports else 1
    if n_terms > max_terms:
        raise TruncationOverflow(
            f"joint support has {n_terms} terms (limit {max_terms}); raise tail_mass")
    cut = tail_mass / n_terms
    weights = np.ones(1)
    occ = np.zeros((1, 0), dtype=int)
    for n, p in supports:
        keep = p > 0
        n, p = n[keep], p[keep]
        w = np.outer(weights, p).ravel()
        o = np.hstack([np.repeat(occ, len(n), axis=0), np.tile(n, len(weights))[:, None]])
        mask = w >= cut
        weights, occ = w[mask], o[mask]
    return weights, occ


def _line_positions(model, occ):
    shifts = np.array([m.delta_omega for m in model.modes])
    return model.center + (occ @ shifts if len(shifts) else np.zeros(len(occ)))


def stick_spectrum(model: SpectrumModel):
    """Line positions (rad/s) and weights of the Fock-line decomposition."""
    weights, occ = joint_lines(model.modes, model.tail_mass, model.max_terms)
    return _line_positions(model, occ), weights


def fock_components(model: SpectrumModel, grid):
    """Individual weighted Fock lines, one row per retained joint state.

    Rows are ``(occupations, weight, line values on grid)``; intended for the
    Fig.-1 style decomposition plots.
    """
    grid = np.asarray(grid, dtype=float)
    weights, occ = joint_lines(model.modes, model.tail_mass, model.max_terms)
    pos = _line_positions(model, occ)
    lines = model.amplitude * weights[:, None] * voigt_profile(
        grid[None, :], pos[:, None], model.voigt) / model.voigt.peak
    return occ, weights, lines


@lru_cache(maxsize=32)
def _profile_table(sigma, gamma_l):
    params = VoigtParams(sigma, gamma_l)
    step = params.fwhm / 4000.0
    x = np.arange(0.0, 60.0 * params.fwhm + step, step)
    return step, voigt_profile(x, 0.0, params)


def _tabulated(x, voigt):
    # linear interpolation on a fwhm/4000 mesh, relative error < 1e-7;
    # exact evaluation beyond 60 fwhm
    step, table = _profile_table(voigt.sigma, voigt.gamma_l)
    u = np.abs(x) / step
    far = u >= len(table) - 1
    np.minimum(u, len(table) - 1.5, out=u)
    i = u.astype(np.intp)
    frac = u - i
    out = table[i] * (1.0 - frac) + table[i + 1] * frac
    if np.any(far):
        out[far] = voigt_profile(x[far], 0.0, voigt)
    return out


def spectrum_shape(grid, positions, weights, voigt: VoigtParams, fast=False):
    """Peak-normalised weighted sum of Voigt lines (no amplitude or baseline).

    ``fast=True`` reads the profile from a cached interpolation table; the
    fitting code uses it, data generation does not.
    """
    grid = np.asarray(grid, dtype=float)
    flat = grid.ravel()
    out = np.zeros_like(flat)
    step = max(1, _CHUNK // max(len(flat), 1))
    for i in range(0, len(positions), step):
        offsets = flat[None, :] - positions[i:i + step, None]
        prof = _tabulated(offsets, voigt) if fast else voigt_profile(offsets, 0.0, voigt)
        out += weights[i:i + step] @ prof
    return (out / voigt.peak).reshape(grid.shape)


def spectrum(model: SpectrumModel, grid, fast=False):
    """Depopulation probability on a grid of angular detunings (rad/s)."""
    positions, weights = stick_spectrum(model)
    shape = spectrum_shape(grid, positions, weights, model.voigt, fast)
    return model.baseline + model.amplitude * shape


def spectrum_centroid(model: SpectrumModel, tail_mass=1e-14) -> float:
    """First moment of the baseline-subtracted spectrum, rad/s.

    Every component is symmetric about its own line position, so the
    centroid is the probability-weighted mean line position. The joint law
    is a product over modes, so the mean separates into per-mode sums; these
    run over marginal supports with a much smaller tail than the spectrum
    itself (``tail_mass``), which keeps truncation error near 1e-12.
    """
    total = model.center
    for m in model.modes:
        n, p = m.dist.support(min(tail_mass, model.tail_mass))
        total += m.delta_omega * float(p @ n / p.sum())
    return float(total)


def centroid_closed_form(model: SpectrumModel) -> float:
    """``center + sum_i mean_i * delta_omega_i`` from untruncated moments."""
    return model.center + sum(m.dist.mean * m.delta_omega for m in model.modes)


def line_spread(model: SpectrumModel) -> float:
    """Standard deviation of the line positions (phonon-induced broadening)."""
    return float(np.sqrt(sum(m.dist.moments()[1] * m.delta_omega**2 for m in model.modes)))


@dataclass
class SpectrumDataset:
    """Depopulation probabilities measured on a detuning grid (rad/s)."""

    detunings: np.ndarray
    probabilities: np.ndarray
    shots: np.ndarray

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        self.shots = np.broadcast_to(np.asarray(self.shots, dtype=int),
                                     self.detunings.shape).copy()
        if self.detunings.shape != self.probabilities.shape:
            raise ValueError("detunings and probabilities differ in length")
        if np.any((self.probabilities < 0) | (self.probabilities > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(self.shots < 1):
            raise ValueError("shots must be >= 1")


def simulate_spectrum(model: SpectrumModel, grid, shots, seed, noiseless=False):
    """Binomial shot-noise realisation of ``spectrum(model, grid)``."""
    grid = np.asarray(grid, dtype=float)
    p = np.clip(spectrum(model, grid), 0.0, 1.0)
    if noiseless:
        return SpectrumDataset(grid, p, shots)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return SpectrumDataset(grid, rng.binomial(int(shots), p) / int(shots), shots)
