"""Monte-Carlo uncertainty propagation by repeated simulation and refitting.

Every replica owns a random stream derived from ``(seed, replica index)``,
so reports are reproducible and independent of execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, RydpolError
from .inference import fit_coherent_alpha, fit_spectrum_pair, fit_thermal_sidebands
from .lineshape import ModeSpec, SpectrumModel, VoigtParams, line_spread, simulate_spectrum
from .phonon_stats import PhononDistribution
from .sideband_dynamics import RabiModel, excitation_probability, simulate_dataset, RabiDataset
from .trap_model import AXES, TrapParameters, line_shift_per_phonon

PROBLEMS = ("thermal", "alpha", "polarizability")


@dataclass
class McConfig:
    """Replica count, seed and nuisance priors.

    Relative widths are 1-sigma of a normal prior around the generating
    value. ``pol_start_range`` scales the true polarizability to give the
    uniform interval from which fit start values are drawn.
    """

    replicas: int = 1000
    seed: int = 0
    eta_rel_sigma: float = 0.1
    alpha_rel_sigma: float = 0.077
    nbar_rel_sigma: float = 0.25
    pol_start_range: tuple = (0.5, 2.0)
    noiseless: bool = False
    n_starts: int = 1
    max_failure_fraction: float = 0.2
    workers: int = 1

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.noiseless:
            self.eta_rel_sigma = self.alpha_rel_sigma = self.nbar_rel_sigma = 0.0

    def rng(self, replica):
        return np.random.default_rng([int(self.seed), int(replica)])


@dataclass
class SidebandTruth:
    """Generating parameters of a thermal-then-kicked sideband calibration."""

    omega0: float
    eta: float
    gamma_dec: float
    amplitude: float
    nbar: float
    alpha: float
    carrier_taus: np.ndarray
    sideband_taus: np.ndarray
    coherent_taus: np.ndarray
    shots: int = 100

    def model(self, s=0):
        return RabiModel(self.omega0, self.eta, self.gamma_dec, self.amplitude, s)

    def _dataset(self, s, dist, taus, rng, noiseless):
        if noiseless:
            p = np.clip(excitation_probability(taus, self.model(s), dist), 0.0, 1.0)
            return RabiDataset(taus, p, self.shots, s)
        return simulate_dataset(self.model(s), dist, taus, self.shots, rng)

    def simulate(self, rng, noiseless=False):
        th = PhononDistribution.thermal(self.nbar)
        co = PhononDistribution.coherent(self.alpha)
        return {
            "carrier": self._dataset(0, th, self.carrier_taus, rng, noiseless),
            "red": self._dataset(-1, th, self.sideband_taus, rng, noiseless),
            "blue": self._dataset(1, th, self.sideband_taus, rng, noiseless),
            "coherent_red": self._dataset(-1, co, self.coherent_taus, rng, noiseless),
            "coherent_blue": self._dataset(1, co, self.coherent_taus, rng, noiseless),
        }


@dataclass
class SpectrumPairTruth:
    """Generating parameters of a reference/excited spectrum pair.

    The reference has thermal radial modes ``nbar_ref``; the excited
    spectrum keeps ``x`` thermal at ``nbar_exc_x`` and puts ``y`` in a
    coherent state of size ``alpha``.
    """

    trap: TrapParameters
    pol: float
    alpha: float
    voigt: VoigtParams
    grid: np.ndarray
    nbar_ref: tuple = (0.4, 0.4)
    nbar_exc_x: float = 0.4
    center: float = 0.0
    amplitude: float = 0.6
    baseline: float = 0.0
    shots: int = 100
    axes: tuple = ("x", "y")

    def reference_dists(self, nbar_scale=1.0):
        return tuple(PhononDistribution.thermal(n * nbar_scale) for n in self.nbar_ref)

    def excited_dists(self, alpha=None, nbar_scale=1.0):
        a = self.alpha if alpha is None else alpha
        return (PhononDistribution.thermal(self.nbar_exc_x * nbar_scale),
                PhononDistribution.coherent(a))

    def shifts(self, pol=None):
        d = line_shift_per_phonon(self.trap, self.pol if pol is None else pol)
        return [d[AXES.index(a)] for a in self.axes]

    def models(self, pol=None, alpha=None):
        d = self.shifts(pol)
        ref = [ModeSpec(s, dist) for s, dist in zip(d, self.reference_dists())]
        exc = [ModeSpec(s, dist) for s, dist in zip(d, self.excited_dists(alpha))]
        return (SpectrumModel(self.center, ref, self.voigt, self.amplitude, self.baseline),
                SpectrumModel(self.center, exc, self.voigt, self.amplitude, self.baseline))

    def simulate(self, rng, noiseless=False, alpha=None):
        ref, exc = self.models(alpha=alpha)
        return (simulate_spectrum(ref, self.grid, self.shots, rng, noiseless),
                simulate_spectrum(exc, self.grid, self.shots, rng, noiseless))

    def relative_shift(self, pol=None, alpha=None, nbar_scale=1.0):
        """Closed-form excited-minus-reference centroid shift, rad/s."""
        d = np.array(self.shifts(pol))
        mr = np.array([x.mean for x in self.reference_dists(nbar_scale)])
        me = np.array([x.mean for x in self.excited_dists(alpha, nbar_scale)])
        return float((me - mr) @ d)

    def excited_width(self, pol=None, alpha=None, nbar_scale=1.0):
        d = self.shifts(pol)
        modes = [ModeSpec(s, dist) for s, dist in zip(d, self.excited_dists(alpha, nbar_scale))]
        return line_spread(SpectrumModel(self.center, modes, self.voigt))


@dataclass
class McReport:
    problem: str
    parameter: str
    truth: float
    estimates: np.ndarray
    failures: int
    replicas: int
    extra: dict = field(default_factory=dict)

    @property
    def mean(self):
        return float(np.mean(self.estimates))

    @property
    def std(self):
        return float(np.std(self.estimates, ddof=1)) if len(self.estimates) > 1 else 0.0

    @property
    def bias(self):
        return self.mean - self.truth

    @property
    def rel_std(self):
        return self.std / abs(self.truth) if self.truth else math.inf

    def summary(self):
        return (f"{self.problem:>14s} {self.parameter:>14s} truth={self.truth:.5g} "
                f"mean={self.mean:.5g} std={self.std:.4g} rel={100 * self.rel_std:.2f}% "
                f"failed={self.failures}/{self.replicas}")

    def to_dict(self):
        return {
            "problem": self.problem,
            "parameter": self.parameter,
            "truth": float(self.truth),
            "mean": self.mean,
            "std": self.std,
            "rel_std": self.rel_std,
            "bias": self.bias,
            "failures": int(self.failures),
            "replicas": int(self.replicas),
            "estimates": [float(x) for x in self.estimates],
            "extra": dict(self.extra),
        }


def _draw(rng, value, rel_sigma):
    return value if rel_sigma == 0 else rng.normal(value, abs(value) * rel_sigma)


def _thermal_replica(truth: SidebandTruth, config: McConfig, r):
    rng = config.rng(r)
    data = truth.simulate(rng, config.noiseless)
    eta = _draw(rng, truth.eta, config.eta_rel_sigma)
    fit = fit_thermal_sidebands(data["carrier"], data["red"], data["blue"], eta,
                                n_starts=max(config.n_starts, 1), seed=rng)
    return fit, data, eta, rng


def _alpha_replica(truth: SidebandTruth, config: McConfig, r):
    fit, data, eta, rng = _thermal_replica(truth, config, r)
    # start value for |alpha|^2 drawn with sigma = sqrt(|alpha|)
    start_sq = rng.normal(truth.alpha**2, math.sqrt(truth.alpha)) if not config.noiseless \
        else truth.alpha**2
    fa = fit_coherent_alpha(data["coherent_red"], data["coherent_blue"], fit["omega0"], eta,
                            fit["gamma_dec"], fit["amplitude"],
                            alpha_start=math.sqrt(max(start_sq, 0.0)))
    return fa["alpha"]


def _pol_replica(truth: SpectrumPairTruth, config: McConfig, r):
    rng = config.rng(r)
    ref, exc = truth.simulate(rng, config.noiseless)
    alpha = abs(_draw(rng, truth.alpha, config.alpha_rel_sigma))
    nbar_scale = max(_draw(rng, 1.0, config.nbar_rel_sigma), 0.0)
    lo, hi = config.pol_start_range
    start = truth.pol * rng.uniform(lo, hi)
    fit = fit_spectrum_pair(ref, truth.reference_dists(nbar_scale), exc,
                            truth.excited_dists(alpha, nbar_scale), truth.trap, truth.voigt,
                            axes=truth.axes, n_starts=config.n_starts, pol_start=start,
                            seed=rng, baseline=truth.baseline)
    return fit["polarizability"]


def _run_one(args):
    problem, truth, config, r = args
    try:
        if problem == "thermal":
            return _thermal_replica(truth, config, r)[0]["nbar"]
        if problem == "alpha":
            return _alpha_replica(truth, config, r)
        return _pol_replica(truth, config, r)
    except RydpolError:
        return None


def mc_uncertainty(problem, truth, config: McConfig | None = None) -> McReport:
    """Spread and bias of a fit under simulated noise and nuisance priors.

    ``problem`` is ``"thermal"`` (reports nbar), ``"alpha"`` (reports
    |alpha|) or ``"polarizability"``. Replicas that fail to converge are
    counted; more than ``max_failure_fraction`` failures abort the study.
    """
    config = config or McConfig()
    if problem not in PROBLEMS:
        raise ValueError(f"problem must be one of {PROBLEMS}")
    jobs = [(problem, truth, config, r) for r in range(config.replicas)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            values = list(pool.map(_run_one, jobs, chunksize=8))
    else:
        values = [_run_one(j) for j in jobs]
    ok = np.array([v for v in values if v is not None], dtype=float)
    failures = len(values) - len(ok)
    param, true_value = {
        "thermal": ("nbar", getattr(truth, "nbar", None)),
        "alpha": ("alpha", getattr(truth, "alpha", None)),
        "polarizability": ("polarizability", getattr(truth, "pol", None)),
    }[problem]
    report = McReport(problem, param, float(true_value), ok, failures, config.replicas)
    if failures > config.max_failure_fraction * config.replicas:
        raise NonConvergence(f"{failures}/{config.replicas} replicas failed: {report.summary()}")
    return report


def acceptance_band_uncertainty(truth: SpectrumPairTruth, config: McConfig | None = None,
                                observed_shift=None, shift_sigma=None,
                                observed_width=None, width_sigma=None) -> McReport:
    """Polarizability spread from simulations consistent with observed lineshapes.

    Each draw takes a polarizability uniform in ``pol_start_range`` times the
    true value, and |alpha| and the thermal occupations from their priors.
    Draws whose relative shift and excited-line spread both lie within one
    sigma of the observed values are accepted; the spread of the accepted
    polarizabilities is reported. Observables default to the noiseless truth
    with 5 % sigmas.
    """
    config = config or McConfig()
    shift0 = truth.relative_shift() if observed_shift is None else observed_shift
    width0 = truth.excited_width() if observed_width is None else observed_width
    s_sig = 0.05 * abs(shift0) if shift_sigma is None else shift_sigma
    w_sig = 0.05 * abs(width0) if width_sigma is None else width_sigma
    lo, hi = config.pol_start_range
    rng = np.random.default_rng([int(config.seed), 0xACC])
    accepted = []
    for _ in range(config.replicas):
        pol = truth.pol * rng.uniform(lo, hi)
        alpha = abs(_draw(rng, truth.alpha, config.alpha_rel_sigma))
        scale = max(_draw(rng, 1.0, config.nbar_rel_sigma), 0.0)
        try:
            shift = truth.relative_shift(pol, alpha, scale)
            width = truth.excited_width(pol, alpha, scale)
        except RydpolError:
            continue
        if abs(shift - shift0) <= s_sig and abs(width - width0) <= w_sig:
            accepted.append(pol)
    report = McReport("acceptance", "polarizability", truth.pol, np.array(accepted),
                      config.replicas - len(accepted), config.replicas,
                      extra={"shift_band": float(s_sig), "width_band": float(w_sig)})
    if len(accepted) < 2:
        raise NonConvergence("fewer than two draws fell inside the acceptance band")
    return report
