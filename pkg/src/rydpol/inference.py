"""Inverse problems: sideband thermometry, coherent-state size and polarizability.

All fits are weighted nonlinear least squares with binomial point errors,
run from several starting points (see :func:`multistart_least_squares`).
Polarizabilities are handled in units of 1e-30 C m^2/V inside the optimizer
and reported in SI.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import linregress

from .errors import AmbiguousFit, NonConvergence, RydpolError
from .lineshape import ModeSpec, SpectrumDataset, VoigtParams, joint_lines, spectrum_shape
from .phonon_stats import DEFAULT_TAIL_MASS, PhononDistribution
from .sideband_dynamics import RabiDataset, RabiModel, excitation_probability
from .trap_model import (AXES, TrapParameters, line_shift_per_phonon,
                         max_confining_polarizability)
from .units import POL_UNIT, TWO_PI

DEFAULT_STARTS = 8
FTOL = 1e-10
MAX_NFEV = 500
KHZ = TWO_PI * 1e3
MHZ = TWO_PI * 1e6


@dataclass
class FitResult:
    """Estimates, 1-sigma errors and diagnostics of one fit.

    ``residual_norm`` is the weighted sum of squared residuals (chi^2).
    ``optimality`` is the sup-norm of the objective gradient at the optimum,
    in the optimizer's scaled coordinates.
    """

    parameters: dict
    uncertainties: dict
    units: dict
    covariance: np.ndarray
    residual_norm: float
    n_points: int
    converged: bool
    iterations: int
    optimality: float
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.parameters[name]

    @property
    def names(self):
        return list(self.parameters)

    @property
    def confidence(self):
        return {k: (v - self.uncertainties[k], v + self.uncertainties[k])
                for k, v in self.parameters.items()}

    @property
    def relative_optimality(self):
        """Gradient sup-norm divided by ``max(chi^2, 1)``."""
        return self.optimality / max(self.residual_norm, 1.0)

    @property
    def reduced_chi2(self):
        dof = max(self.n_points - len(self.parameters), 1)
        return self.residual_norm / dof

    def to_dict(self):
        return {
            "parameters": {k: float(v) for k, v in self.parameters.items()},
            "uncertainties": {k: float(v) for k, v in self.uncertainties.items()},
            "units": dict(self.units),
            "covariance": np.asarray(self.covariance).tolist(),
            "residual_norm": float(self.residual_norm),
            "n_points": int(self.n_points),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "optimality": float(self.optimality),
            "extra": _jsonable(self.extra),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def binomial_sigma(p, shots):
    """Binomial standard error, floored at ``1 / (2 shots)``."""
    p = np.asarray(p, dtype=float)
    shots = np.asarray(shots, dtype=float)
    return np.maximum(np.sqrt(p * (1.0 - p) / shots), 0.5 / shots)


def multistart_least_squares(fun, starts, bounds, max_nfev=MAX_NFEV):
    """Run ``scipy.optimize.least_squares`` from each start; return (best, all).

    A run counts as converged when the optimizer reports a tolerance-based
    stop (relative cost change below 1e-10, or step/gradient tolerance).
    """
    runs = []
    for x0 in starts:
        x0 = np.clip(np.asarray(x0, dtype=float), bounds[0], bounds[1])
        try:
            res = least_squares(fun, x0, bounds=bounds, method="trf", ftol=FTOL,
                                xtol=FTOL, gtol=FTOL, max_nfev=max_nfev)
        except (RydpolError, FloatingPointError, ValueError):
            continue
        if res.status > 0 and np.all(np.isfinite(res.x)):
            runs.append(res)
    if not runs:
        raise NonConvergence(f"none of {len(starts)} starts converged")
    best = min(runs, key=lambda r: r.cost)
    return best, runs


def _covariance(jac):
    jtj = jac.T @ jac
    try:
        return np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(jtj)


def _numeric_jacobian(fun, x, rel_step=1e-6, lower=None, upper=None):
    x = np.asarray(x, dtype=float)
    f0 = fun(x)
    jac = np.empty((f0.size, x.size))
    for k in range(x.size):
        h = rel_step * max(abs(x[k]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        if upper is not None and xp[k] > upper[k]:
            xp[k] = x[k]
        if lower is not None and xm[k] < lower[k]:
            xm[k] = x[k]
        jac[:, k] = (fun(xp) - fun(xm)) / (xp[k] - xm[k])
    return jac


def _result(names, scales, units, res, n_points, jac=None, x=None, nfev=None, extra=None):
    jac = res.jac if jac is None else jac
    x = res.x if x is None else x
    scales = np.asarray(scales, dtype=float)
    cov = _covariance(jac) * np.outer(scales, scales)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    values = np.asarray(x) * scales
    return FitResult(
        parameters=dict(zip(names, map(float, values))),
        uncertainties=dict(zip(names, map(float, sig))),
        units=dict(zip(names, units)),
        covariance=cov,
        residual_norm=float(2.0 * res.cost),
        n_points=int(n_points),
        converged=bool(res.status > 0),
        iterations=int(res.nfev if nfev is None else nfev),
        optimality=float(res.optimality),
        extra=extra or {},
    )


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# --------------------------------------------------------------------------
# sideband thermometry

def _rabi_curves(datasets, orders, dists, omega0, eta, gamma, amp):
    return [excitation_probability(d.taus, RabiModel(omega0, eta, gamma, amp, s), dist)
            for d, s, dist in zip(datasets, orders, dists)]


def _data_sigmas(datasets, probs=None):
    probs = [d.probabilities for d in datasets] if probs is None else probs
    return [binomial_sigma(p, d.shots) for d, p in zip(datasets, probs)]


def _rabi_residuals(datasets, sigmas, curves):
    return np.concatenate([(d.probabilities - c) / s for d, s, c in zip(datasets, sigmas, curves)])


def _reweighted(fun_of_sigma, sigmas_at, best, bounds, weighting):
    """Optional second pass with binomial errors evaluated at the fitted model."""
    if weighting == "data":
        return best, None
    if weighting != "model":
        raise ValueError(f"unknown weighting {weighting!r}")
    sig = sigmas_at(best.x)
    refined, _ = multistart_least_squares(lambda x: fun_of_sigma(x, sig), [best.x], bounds)
    return refined, sig


def estimate_carrier_rabi(carrier: RabiDataset, n_grid=200):
    """Coarse carrier Rabi frequency by scanning a near-ground-state model."""
    t_max = carrier.taus.max()
    grid = np.geomspace(0.25 * np.pi / t_max, 100 * np.pi / t_max, n_grid)
    sig = binomial_sigma(carrier.probabilities, carrier.shots)
    dist = PhononDistribution.thermal(0.3)
    chi2 = [np.sum(((carrier.probabilities - excitation_probability(
        carrier.taus, RabiModel(w, 0.05, 0.0, 1.0, 0), dist)) / sig) ** 2) for w in grid]
    return float(grid[int(np.argmin(chi2))])


def fit_thermal_sidebands(carrier: RabiDataset, red: RabiDataset, blue: RabiDataset, eta,
                          n_starts=DEFAULT_STARTS, seed=0, omega0_guess=None,
                          weighting="model") -> FitResult:
    """Joint fit of carrier, red and blue flopping to a thermal state.

    Free parameters: ``nbar``, ``omega0`` (rad/s), ``gamma_dec`` (1/s) and
    ``amplitude``; ``eta`` is held fixed. With ``weighting="model"`` the fit
    is repeated once with binomial errors evaluated at the first-pass model,
    which removes the bias that data-based errors cause near p = 0.
    """
    datasets = (carrier, red, blue)
    rng = _rng(seed)
    w0 = omega0_guess or estimate_carrier_rabi(carrier)
    scales = np.array([1.0, KHZ, 1e3, 1.0])

    orders = (0, -1, 1)

    def curves(x):
        nbar, w, g, a = x * scales
        return _rabi_curves(datasets, orders, (PhononDistribution.thermal(nbar),) * 3, w, eta, g, a)

    def fun(x, sig=_data_sigmas(datasets)):
        return _rabi_residuals(datasets, sig, curves(x))

    first = np.array([0.3, w0 / KHZ, 0.1, 0.95])
    starts = [first]
    for _ in range(n_starts - 1):
        starts.append(np.array([rng.uniform(0.02, 2.0), w0 / KHZ * rng.normal(1.0, 0.05),
                                rng.uniform(0.0, 1.0), rng.uniform(0.7, 1.0)]))
    bounds = (np.array([0.0, 1e-3, 0.0, 1e-3]), np.array([100.0, np.inf, np.inf, 1.0]))
    best, runs = multistart_least_squares(fun, starts, bounds)
    best, _ = _reweighted(fun, lambda x: _data_sigmas(datasets, curves(x)), best, bounds,
                          weighting)
    n = sum(len(d.taus) for d in datasets)
    return _result(["nbar", "omega0", "gamma_dec", "amplitude"], scales,
                   ["phonons", "rad/s", "1/s", ""], best, n,
                   extra={"eta": float(eta), "starts": len(starts), "converged_starts": len(runs)})


def fit_coherent_alpha(red: RabiDataset, blue: RabiDataset, omega0, eta, gamma_dec=0.0,
                       amplitude=1.0, n_starts=DEFAULT_STARTS, alpha_start=None,
                       alpha_max=15.0, scan_step=0.1, ambiguity_chi2=1.0,
                       weighting="model") -> FitResult:
    """Common fit of red and blue sideband flopping to a coherent state.

    ``omega0``, ``eta``, ``gamma_dec`` and ``amplitude`` come from a prior
    thermal fit. A scan over ``|alpha|`` locates the basins of the objective;
    the best ``n_starts`` basins (plus ``alpha_start`` when given) are refined.
    Distinct optima whose chi^2 differ by less than ``ambiguity_chi2`` raise
    AmbiguousFit.
    """
    datasets, orders = (red, blue), (-1, 1)

    def curves(x):
        dist = PhononDistribution.coherent(x[0])
        return _rabi_curves(datasets, orders, (dist, dist), omega0, eta, gamma_dec, amplitude)

    def fun(x, sig=_data_sigmas(datasets)):
        return _rabi_residuals(datasets, sig, curves(x))

    grid = np.arange(0.0, alpha_max + scan_step / 2, scan_step)
    chi2 = np.array([np.sum(fun([a]) ** 2) for a in grid])
    is_min = np.r_[True, chi2[1:] <= chi2[:-1]] & np.r_[chi2[:-1] <= chi2[1:], True]
    # basins far above the best scan value cannot win the refinement; a parabola
    # through the neighbours credits what the coarse grid may hide
    curv = np.zeros_like(chi2)
    curv[1:-1] = chi2[:-2] - 2.0 * chi2[1:-1] + chi2[2:]
    floor = chi2 - np.clip(curv, 0.0, None) / 8.0
    is_min &= floor <= 2.0 * chi2.min() + 10.0 * ambiguity_chi2 + 10.0
    cand = grid[is_min][np.argsort(chi2[is_min])][:n_starts]
    starts = [np.array([a]) for a in cand]
    if alpha_start is not None:
        starts.insert(0, np.array([abs(float(alpha_start))]))
    bounds = (np.array([0.0]), np.array([alpha_max * 1.5]))
    best, runs = multistart_least_squares(fun, starts, bounds)
    best, _ = _reweighted(fun, lambda x: _data_sigmas(datasets, curves(x)), best, bounds,
                          weighting)
    result = _result(["alpha"], [1.0], [""], best, len(red.taus) + len(blue.taus),
                     extra={"starts": len(starts), "converged_starts": len(runs)})
    sig = max(result.uncertainties["alpha"], 1e-3)
    rivals = [r for r in runs if abs(r.x[0] - best.x[0]) > max(5 * sig, 0.05)
              and 2 * (r.cost - best.cost) < ambiguity_chi2]
    if rivals:
        cands = sorted({round(float(r.x[0]), 4) for r in rivals} | {round(float(best.x[0]), 4)})
        raise AmbiguousFit(f"|alpha| basins {cands} fit equally well", cands)
    return result


# --------------------------------------------------------------------------
# polarizability from a pair of spectra

def _mode_axes(axes):
    return [AXES.index(a) for a in axes]


def _spectrum_centroid_from_data(data: SpectrumDataset, baseline=0.0):
    p = data.probabilities - baseline
    w = np.clip(p - 0.5 * p.max(), 0.0, None)
    if w.sum() <= 0:
        return float(data.detunings[np.argmax(p)])
    return float(w @ data.detunings / w.sum())


@dataclass
class _PairProblem:
    reference: SpectrumDataset
    excited: SpectrumDataset
    ref_lines: tuple
    exc_lines: tuple
    trap: TrapParameters
    voigt: VoigtParams
    idx: list
    baseline: float
    fit_baseline: bool

    def shifts(self, pol_units):
        return line_shift_per_phonon(self.trap, pol_units * POL_UNIT)[self.idx]

    def shapes(self, center_mhz, pol_units):
        d = self.shifts(pol_units)
        out = []
        for data, (w, occ) in ((self.reference, self.ref_lines), (self.excited, self.exc_lines)):
            pos = center_mhz * MHZ + occ @ d
            out.append(spectrum_shape(data.detunings, pos, w, self.voigt, fast=True))
        return out

    def linear_solve(self, data, shape):
        sig = binomial_sigma(data.probabilities, data.shots)
        if self.fit_baseline:
            design = np.column_stack([shape, np.ones_like(shape)]) / sig[:, None]
            coef, *_ = np.linalg.lstsq(design, data.probabilities / sig, rcond=None)
            return coef[0], coef[1]
        y = (data.probabilities - self.baseline) / sig
        s = shape / sig
        return float(s @ y / (s @ s)), self.baseline

    def profiled(self, x):
        res = []
        for data, shape in zip((self.reference, self.excited), self.shapes(*x)):
            a, b = self.linear_solve(data, shape)
            res.append((data.probabilities - b - a * shape)
                       / binomial_sigma(data.probabilities, data.shots))
        return np.concatenate(res)

    def full(self, x):
        center, pol = x[:2]
        amps = x[2:4]
        bases = x[4:6] if self.fit_baseline else (self.baseline, self.baseline)
        res = []
        for data, shape, a, b in zip((self.reference, self.excited),
                                     self.shapes(center, pol), amps, bases):
            res.append((data.probabilities - b - a * shape)
                       / binomial_sigma(data.probabilities, data.shots))
        return np.concatenate(res)

    def mean_occupations(self):
        mr = self.ref_lines[0] @ self.ref_lines[1] / self.ref_lines[0].sum()
        me = self.exc_lines[0] @ self.exc_lines[1] / self.exc_lines[0].sum()
        return mr, me


def _initial_pair_guess(prob: _PairProblem, pol_max_units):
    c_ref = _spectrum_centroid_from_data(prob.reference, prob.baseline)
    c_exc = _spectrum_centroid_from_data(prob.excited, prob.baseline)
    mr, me = prob.mean_occupations()
    pols = np.linspace(-pol_max_units, 0.98 * pol_max_units, 400)
    pred = np.array([(me - mr) @ prob.shifts(p) for p in pols])
    pol0 = float(pols[np.argmin(np.abs(pred - (c_exc - c_ref)))])
    center0 = (c_ref - mr @ prob.shifts(pol0)) / MHZ
    return np.array([center0, pol0])


def fit_spectrum_pair(reference: SpectrumDataset, reference_dists, excited: SpectrumDataset,
                      excited_dists, trap: TrapParameters, voigt: VoigtParams,
                      axes=("x", "y"), n_starts=DEFAULT_STARTS, pol_start=None,
                      center_start=None, seed=0, baseline=0.0, fit_baseline=False,
                      tail_mass=DEFAULT_TAIL_MASS) -> FitResult:
    """Correlated fit of a near-ground reference and a motionally excited spectrum.

    Both spectra share the two-photon resonance ``center`` and the
    polarizability; the phonon distributions per mode are fixed inputs. The
    per-spectrum amplitudes (and optionally baselines) enter linearly and are
    profiled out during the search, then released for the error analysis.

    ``pol_start`` is in C m^2/V and ``center_start`` in rad/s.
    """
    ref_modes = [_fixed_mode(d) for d in reference_dists]
    exc_modes = [_fixed_mode(d) for d in excited_dists]
    if len(ref_modes) != len(axes) or len(exc_modes) != len(axes):
        raise ValueError("one distribution per fitted axis is required")
    prob = _PairProblem(reference, excited, joint_lines(ref_modes, tail_mass),
                        joint_lines(exc_modes, tail_mass), trap, voigt, _mode_axes(axes),
                        baseline, fit_baseline)
    pol_max = max_confining_polarizability(trap) / POL_UNIT
    lower = np.array([-np.inf, -10.0 * pol_max])
    upper = np.array([np.inf, 0.999 * pol_max])
    guess = _initial_pair_guess(prob, pol_max)
    if pol_start is not None:
        guess[1] = float(pol_start) / POL_UNIT
    if center_start is not None:
        guess[0] = float(center_start) / MHZ
    rng = _rng(seed)
    width = voigt.fwhm / MHZ
    starts = [guess]
    for _ in range(n_starts - 1):
        starts.append(np.array([guess[0] + rng.normal(0.0, 0.25 * width),
                                guess[1] * rng.uniform(0.5, 2.0)]))
    best, runs = multistart_least_squares(prob.profiled, starts, (lower, upper))

    # release the linear parameters for the covariance
    amps, bases = [], []
    for data, shape in zip((reference, excited), prob.shapes(*best.x)):
        a, b = prob.linear_solve(data, shape)
        amps.append(a)
        bases.append(b)
    x_full = np.r_[best.x, amps, bases if fit_baseline else []]
    jac = _numeric_jacobian(prob.full, x_full, lower=np.r_[lower, [-np.inf] * (len(x_full) - 2)],
                            upper=np.r_[upper, [np.inf] * (len(x_full) - 2)])
    names = ["center", "polarizability", "amplitude_reference", "amplitude_excited"]
    scales = [MHZ, POL_UNIT, 1.0, 1.0]
    units = ["rad/s", "C m^2/V", "", ""]
    if fit_baseline:
        names += ["baseline_reference", "baseline_excited"]
        scales += [1.0, 1.0]
        units += ["", ""]

    result = _result(names, scales, units, best, len(reference.detunings) + len(excited.detunings),
                     jac=jac, x=x_full, nfev=sum(r.nfev for r in runs))
    mr, me = prob.mean_occupations()
    pol_units = best.x[1]
    shift = float((me - mr) @ prob.shifts(pol_units))
    h = 1e-4 * max(abs(pol_units), 1.0)
    hi_p, lo_p = min(pol_units + h, upper[1]), pol_units - h
    dshift = float((me - mr) @ (prob.shifts(hi_p) - prob.shifts(lo_p)) / (hi_p - lo_p))
    shift_sigma = abs(dshift) * result.uncertainties["polarizability"] / POL_UNIT
    result.extra.update({
        "relative_shift": shift,
        "relative_shift_sigma": shift_sigma,
        "reference_centroid": float(best.x[0] * MHZ + mr @ prob.shifts(pol_units)),
        "excited_centroid": float(best.x[0] * MHZ + me @ prob.shifts(pol_units)),
        "starts": len(starts),
        "converged_starts": len(runs),
        "axes": list(axes),
    })
    return result


def spectrum_pair_objective(reference: SpectrumDataset, reference_dists, excited: SpectrumDataset,
                            excited_dists, trap: TrapParameters, voigt: VoigtParams,
                            axes=("x", "y"), baseline=0.0, tail_mass=DEFAULT_TAIL_MASS):
    """chi^2 of the pair fit as a function of ``(center, pol)`` in SI units.

    Amplitudes are profiled out exactly as in :func:`fit_spectrum_pair`.
    """
    prob = _PairProblem(reference, excited,
                        joint_lines([_fixed_mode(d) for d in reference_dists], tail_mass),
                        joint_lines([_fixed_mode(d) for d in excited_dists], tail_mass),
                        trap, voigt, _mode_axes(axes), baseline, False)

    def chi2(center, pol):
        return float(np.sum(prob.profiled(np.array([center / MHZ, pol / POL_UNIT])) ** 2))
    return chi2


def _fixed_mode(dist):
    return ModeSpec(0.0, PhononDistribution.from_config(dist) if isinstance(dist, dict) else dist)


# --------------------------------------------------------------------------
# averaging and scaling

def weighted_average(estimates):
    """Inverse-variance weighted mean of ``(value, sigma)`` pairs and its standard error."""
    est = np.asarray(list(estimates), dtype=float).reshape(-1, 2)
    if len(est) == 0:
        raise ValueError("no estimates to average")
    if np.any(est[:, 1] <= 0):
        raise ValueError("all sigmas must be positive")
    w = 1.0 / est[:, 1] ** 2
    return float(w @ est[:, 0] / w.sum()), float(1.0 / np.sqrt(w.sum()))


def power_law_exponent(principal_n, values, sigmas=None, quantum_defect=0.0):
    """Exponent ``k`` and its error for ``values ~ (n - quantum_defect)^k``."""
    x = np.log(np.asarray(principal_n, dtype=float) - quantum_defect)
    y = np.log(np.asarray(values, dtype=float))
    if sigmas is None:
        fit = linregress(x, y)
        return float(fit.slope), float(fit.stderr) if len(x) > 2 else float("nan")
    w = np.asarray(values, dtype=float) / np.asarray(sigmas, dtype=float)
    coef, cov = np.polyfit(x, y, 1, w=w, cov="unscaled")
    return float(coef[0]), float(np.sqrt(cov[0, 0]))
