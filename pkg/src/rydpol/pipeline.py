"""End-to-end synthetic experiment: generate, calibrate, fit, propagate, average.

Stages run in a fixed order and every random stream is derived from
``(seed, stage, index)``, so a run is a pure function of config and seed.
With an output directory, each stage writes its artefacts as soon as it
finishes; a failure leaves them in place, adds ``error.json`` and still
writes the manifest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig
from .errors import ConfigError, RydpolError
from .figures import emit_figure_data, model_meta, pol_vs_alpha_rows
from .inference import (MHZ, FitResult, fit_coherent_alpha, fit_spectrum_pair,
                        fit_thermal_sidebands, weighted_average)
from .kick import kick_to_alpha
from .lineshape import ModeSpec, SpectrumModel, simulate_spectrum
from .montecarlo import McConfig, SidebandTruth, SpectrumPairTruth, mc_uncertainty
from .phonon_stats import PhononDistribution
from .sideband_dynamics import RabiModel, simulate_dataset
from .trap_model import AXES, line_shift_per_phonon, secular_frequencies
from .units import POL_UNIT

STAGES = ("generate", "calibrate", "alpha", "spectra", "polarizability", "mc", "average")
_STREAM = {name: i for i, name in enumerate(STAGES)}


class PipelineError(RydpolError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` is the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    config: ExperimentConfig
    seed: int
    thermal: FitResult | None = None
    alpha_fits: list = field(default_factory=list)
    pair_fits: list = field(default_factory=list)
    true_alphas: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    polarizability: float = math.nan
    polarizability_sigma: float = math.nan
    mc: dict = field(default_factory=dict)
    out_dir: Path | None = None

    def kick_rows(self):
        rows = []
        for a_true, fa, fp, (pol, sig) in zip(self.true_alphas, self.alpha_fits, self.pair_fits,
                                              self.estimates):
            rows.append({"alpha_true": a_true, "alpha": fa["alpha"],
                         "alpha_err": fa.uncertainties["alpha"], "pol": pol, "pol_err": sig,
                         "pol_fit_err": fp.uncertainties["polarizability"],
                         "shift": fp.extra["relative_shift"],
                         "shift_err": fp.extra["relative_shift_sigma"]})
        return rows

    def summary(self):
        cfg = self.config
        return {
            "name": cfg.name,
            "state": cfg.state.label,
            "seed": self.seed,
            "pol_truth": cfg.state.pol_si,
            "pol": self.polarizability,
            "pol_err": self.polarizability_sigma,
            "nbar": None if self.thermal is None else self.thermal["nbar"],
            "nbar_err": None if self.thermal is None else self.thermal.uncertainties["nbar"],
            "kicks": self.kick_rows(),
            "mc": {k: {"rel_std": v.rel_std, "std": v.std, "mean": v.mean,
                       "failures": v.failures, "replicas": v.replicas}
                   for k, v in self.mc.items()},
        }

    def table(self):
        """Human-readable summary."""
        lines = [f"{self.config.name}  seed={self.seed}",
                 f"{'|alpha| true':>12s} {'|alpha| fit':>14s} {'shift/MHz':>16s} "
                 f"{'P/1e-30':>16s}"]
        for r in self.kick_rows():
            lines.append(f"{r['alpha_true']:12.3f} {r['alpha']:7.3f}+-{r['alpha_err']:<5.3f} "
                         f"{r['shift'] / MHZ:8.3f}+-{r['shift_err'] / MHZ:<6.3f} "
                         f"{r['pol'] / POL_UNIT:8.3f}+-{r['pol_err'] / POL_UNIT:<6.3f}")
        lines.append(f"weighted P = {self.polarizability / POL_UNIT:.3f} +- "
                     f"{self.polarizability_sigma / POL_UNIT:.3f} e-30 C m^2/V "
                     f"(truth {self.config.state.polarizability})")
        for k, v in self.mc.items():
            lines.append(f"MC {k}: relative sigma {100 * v.rel_std:.1f}% "
                         f"({v.replicas - v.failures}/{v.replicas} replicas)")
        return "\n".join(lines)


def _rng(seed, stage, *index):
    return np.random.default_rng([int(seed), _STREAM[stage], *map(int, index)])


def _axis_dists(cfg, axes, y_dist, nbar_x, nbar_y):
    out = []
    for a in axes:
        if a == "x":
            out.append(PhononDistribution.thermal(nbar_x))
        elif a == "y":
            out.append(y_dist if y_dist is not None else PhononDistribution.thermal(nbar_y))
        else:
            out.append(PhononDistribution.thermal(0.0))
    return tuple(out)


def true_alphas(cfg: ExperimentConfig, seed):
    """Generating |alpha| per kick (explicit values or the kick model)."""
    w_y = secular_frequencies(cfg.trap_parameters())["y"]
    out = []
    for k, kick in enumerate(cfg.motion.kicks):
        if kick.alpha is not None:
            out.append(float(kick.alpha))
            continue
        drift = 0.0
        if cfg.motion.drift_rel > 0:
            drift = _rng(seed, "generate", 100, k).normal(0.0, cfg.motion.drift_rel)
        out.append(kick_to_alpha(kick.model(w_y, cfg.motion.kappa, drift)))
    return out


def _pair_models(cfg, pol, axes, ref_dists, exc_dists, center, amps, baseline):
    d = line_shift_per_phonon(cfg.trap_parameters(), pol)
    shifts = [d[AXES.index(a)] for a in axes]
    voigt = cfg.spectrum.voigt()
    ref = SpectrumModel(center, [ModeSpec(s, x) for s, x in zip(shifts, ref_dists)], voigt,
                        amps[0], baseline)
    exc = SpectrumModel(center, [ModeSpec(s, x) for s, x in zip(shifts, exc_dists)], voigt,
                        amps[1], baseline)
    return ref, exc


def run_pipeline(config: ExperimentConfig, seed=None, out_dir=None) -> PipelineResult:
    """Run every stage; returns a :class:`PipelineResult`.

    ``seed`` defaults to ``config.seed``; one of them is required. With
    ``mc.replicas == 0`` the Monte-Carlo stage is skipped.
    """
    seed = config.seed if seed is None else seed
    if seed is None:
        raise ConfigError("a seed is required (config.seed or the seed argument)")
    cfg = config.override(seed=int(seed))
    out = Path(out_dir) if out_dir is not None else None
    res = PipelineResult(cfg, int(seed), out_dir=out)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(cfg.to_json())
    stage, scratch = STAGES[0], {}
    try:
        for stage in STAGES:
            _STAGE_FUNCS[stage](cfg, res, out, scratch)
    except Exception as exc:
        if out is not None:
            io.write_json(out / "error.json", {"stage": stage, "type": type(exc).__name__,
                                               "message": str(exc)})
            io.write_manifest(out, {"name": cfg.name, "seed": res.seed, "status": "failed"})
        if isinstance(exc, ConfigError):
            raise
        raise PipelineError(stage, exc) from exc
    if out is not None:
        io.write_json(out / "summary.json", res.summary())
        io.write_manifest(out, {"name": cfg.name, "seed": res.seed, "status": "ok"})
    return res


def _generate(cfg, res, out, st):
    seed = res.seed
    r = cfg.rabi
    eta = cfg.eta()
    model = RabiModel(r.omega0, eta, r.gamma_dec, r.amplitude)
    th = PhononDistribution.thermal(cfg.motion.nbar_y)
    rng = _rng(seed, "generate", 0)
    st["thermal"] = {
        "carrier": simulate_dataset(model.sideband(0), th, r.carrier_taus(), r.shots, rng),
        "red": simulate_dataset(model.sideband(-1), th, r.sideband_taus(), r.shots, rng),
        "blue": simulate_dataset(model.sideband(1), th, r.sideband_taus(), r.shots, rng),
    }
    res.true_alphas = true_alphas(cfg, seed)
    st["kicks"] = []
    for k, a in enumerate(res.true_alphas):
        rng = _rng(seed, "generate", 1, k)
        co = PhononDistribution.coherent(a)
        st["kicks"].append({
            "red": simulate_dataset(model.sideband(-1), co, r.coherent_taus(), r.shots, rng),
            "blue": simulate_dataset(model.sideband(1), co, r.coherent_taus(), r.shots, rng),
        })
    if out is not None:
        meta = {"eta": eta, "omega0": r.omega0, "gamma_dec": r.gamma_dec,
                "amplitude": r.amplitude}
        for name, d in st["thermal"].items():
            io.write_rabi(out / "data" / f"thermal_{name}.csv", d,
                          {**meta, "dist": {"thermal": cfg.motion.nbar_y}})
        for k, (a, pair) in enumerate(zip(res.true_alphas, st["kicks"])):
            for name, d in pair.items():
                io.write_rabi(out / "data" / f"kick{k}_{name}.csv", d,
                              {**meta, "dist": {"coherent": a}})


def _calibrate(cfg, res, out, st):
    t = st["thermal"]
    res.thermal = fit_thermal_sidebands(t["carrier"], t["red"], t["blue"], cfg.eta(),
                                        n_starts=cfg.fit.starts,
                                        seed=_rng(res.seed, "calibrate"),
                                        weighting=cfg.fit.weighting)
    if out is not None:
        io.write_json(out / "fits" / "thermal.json", res.thermal.to_dict())


def _alpha(cfg, res, out, st):
    th = res.thermal
    for k, pair in enumerate(st["kicks"]):
        fit = fit_coherent_alpha(pair["red"], pair["blue"], th["omega0"], cfg.eta(),
                                 th["gamma_dec"], th["amplitude"], n_starts=cfg.fit.starts,
                                 weighting=cfg.fit.weighting)
        res.alpha_fits.append(fit)
        if out is not None:
            io.write_json(out / "fits" / f"alpha_kick{k}.json", fit.to_dict())


def _spectra(cfg, res, out, st):
    sp = cfg.spectrum
    axes = tuple(sp.axes)
    grid = sp.grid()
    center = float(sp.center_mhz * MHZ)
    m = cfg.motion
    st["pairs"] = []
    for k, a in enumerate(res.true_alphas):
        ref_d = _axis_dists(cfg, axes, None, m.nbar_x, m.nbar_y)
        exc_d = _axis_dists(cfg, axes, PhononDistribution.coherent(a), m.nbar_x, m.nbar_y)
        ref_m, exc_m = _pair_models(cfg, cfg.state.pol_si, axes, ref_d, exc_d, center,
                                    (sp.amplitude, sp.amplitude), sp.baseline)
        rng = _rng(res.seed, "spectra", k)
        ref = simulate_spectrum(ref_m, grid, sp.shots, rng)
        exc = simulate_spectrum(exc_m, grid, sp.shots, rng)
        st["pairs"].append((ref, exc))
        st.setdefault("models", []).append(exc_m)
        if out is not None:
            io.write_spectrum(out / "data" / f"kick{k}_reference.csv", ref,
                              model_meta(ref_m, grid))
            io.write_spectrum(out / "data" / f"kick{k}_excited.csv", exc,
                              model_meta(exc_m, grid))


def _polarizability(cfg, res, out, st):
    sp = cfg.spectrum
    axes = tuple(sp.axes)
    # only the y mode is thermometered; x is assumed to share its occupation
    nbar = res.thermal["nbar"]
    for k, ((ref, exc), fa) in enumerate(zip(st["pairs"], res.alpha_fits)):
        alpha, alpha_err = fa["alpha"], fa.uncertainties["alpha"]
        ref_d = _axis_dists(cfg, axes, None, nbar, nbar)
        exc_d = _axis_dists(cfg, axes, PhononDistribution.coherent(alpha), nbar, nbar)
        fit = fit_spectrum_pair(ref, ref_d, exc, exc_d, cfg.trap_parameters(), sp.voigt(),
                                axes=axes, n_starts=cfg.fit.starts,
                                seed=_rng(res.seed, "polarizability", k), baseline=sp.baseline)
        res.pair_fits.append(fit)
        pol = fit["polarizability"]
        # the relative shift scales as |alpha|^2, so d ln P = 2 d ln |alpha|
        alpha_term = 2.0 * alpha_err / alpha * abs(pol) if alpha > 0 else 0.0
        res.estimates.append((pol, math.hypot(fit.uncertainties["polarizability"], alpha_term)))
        if out is not None:
            ref_m, exc_m = _pair_models(cfg, pol, axes, ref_d, exc_d, fit["center"],
                                        (fit["amplitude_reference"], fit["amplitude_excited"]),
                                        sp.baseline)
            models = {"reference": model_meta(ref_m, ref.detunings),
                      "excited": model_meta(exc_m, exc.detunings)}
            io.write_json(out / "fits" / f"pair_kick{k}.json", {**fit.to_dict(), "models": models})
            emit_figure_data("spectrum-pair", {"reference": ref, "excited": exc,
                                               "reference_model": ref_m, "excited_model": exc_m},
                             out / "figures" / f"spectrum_pair_kick{k}.csv")


def _mc(cfg, res, out, st):
    mc = cfg.mc
    if mc.replicas == 0 or not res.true_alphas:
        return
    mcc = McConfig(replicas=mc.replicas, seed=res.seed, eta_rel_sigma=mc.eta_rel_sigma,
                   alpha_rel_sigma=mc.alpha_rel_sigma, nbar_rel_sigma=mc.nbar_rel_sigma,
                   pol_start_range=tuple(mc.pol_start_range), noiseless=mc.noiseless)
    r = cfg.rabi
    alpha = max(res.true_alphas)
    sb = SidebandTruth(r.omega0, cfg.eta(), r.gamma_dec, r.amplitude, cfg.motion.nbar_y, alpha,
                       r.carrier_taus(), r.sideband_taus(), r.coherent_taus(), r.shots)
    sp = cfg.spectrum
    pair = SpectrumPairTruth(cfg.trap_parameters(), cfg.state.pol_si, alpha, sp.voigt(),
                             sp.grid(), (cfg.motion.nbar_x, cfg.motion.nbar_y), cfg.motion.nbar_x,
                             float(sp.center_mhz * MHZ), sp.amplitude, sp.baseline, sp.shots,
                             tuple(sp.axes))
    res.mc["alpha"] = mc_uncertainty("alpha", sb, mcc)
    res.mc["polarizability"] = mc_uncertainty("polarizability", pair, mcc)
    if out is not None:
        for name, rep in res.mc.items():
            io.write_json(out / "mc" / f"{name}.json", rep.to_dict())


def _average(cfg, res, out, st):
    res.polarizability, res.polarizability_sigma = weighted_average(res.estimates)
    if out is not None:
        rows = res.kick_rows()
        emit_figure_data("pol-vs-alpha", {"rows": pol_vs_alpha_rows(rows)},
                         out / "figures" / "pol_vs_alpha.csv")
        emit_figure_data("shift-vs-alpha",
                         {"rows": [(r["alpha"], r["shift"] / MHZ, r["shift_err"] / MHZ)
                                   for r in rows]},
                         out / "figures" / "shift_vs_alpha.csv")
        if st.get("models"):
            emit_figure_data("lineshape-fock-decomposition",
                             {"model": st["models"][-1], "grid": cfg.spectrum.grid()},
                             out / "figures" / "lineshape_fock_decomposition.csv")


_STAGE_FUNCS = {"generate": _generate, "calibrate": _calibrate, "alpha": _alpha,
                "spectra": _spectra, "polarizability": _polarizability, "mc": _mc,
                "average": _average}
