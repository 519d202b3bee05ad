"""Tidy plot-data tables for the lineshape, shift and polarizability figures.

Nothing here plots; each product is a CSV with one row per point and
unit-bearing headers. Sweep helpers build the row lists.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import MissingInput
from .inference import MHZ, fit_spectrum_pair
from .io import read_json, read_sidecar, read_spectrum, write_csv
from .lineshape import (ModeSpec, SpectrumModel, VoigtParams, fock_components, spectrum,
                        spectrum_centroid)
from .phonon_stats import PhononDistribution
from .trap_model import AXES, line_shift_per_phonon
from .units import POL_UNIT, angular_to_mhz

HEADERS = {
    "lineshape-fock-decomposition": ("detuning_MHz", "component", "occupation", "weight",
                                     "probability"),
    "spectrum-pair": ("spectrum", "detuning_MHz", "probability", "shots", "model_probability"),
    "shift-vs-alpha": ("alpha", "shift_MHz", "err"),
    "shift-vs-nbar": ("nbar", "mode", "shift_MHz", "err"),
    "pol-vs-alpha": ("alpha", "alpha_err", "pol_1e-30_Cm2_per_V", "pol_err_1e-30_Cm2_per_V"),
}
KINDS = tuple(HEADERS)
_REQUIRED = {
    "lineshape-fock-decomposition": ("model", "grid"),
    "spectrum-pair": ("reference", "excited"),
    "shift-vs-alpha": ("rows",),
    "shift-vs-nbar": ("rows",),
    "pol-vs-alpha": ("rows",),
}


def emit_figure_data(kind, inputs, path):
    """Write the CSV for ``kind`` built from ``inputs`` and return its path.

    ``inputs`` keys by kind:

    * lineshape-fock-decomposition: ``model`` (SpectrumModel), ``grid``
      (rad/s), optional ``components`` (strongest Fock lines kept, default 6)
    * spectrum-pair: ``reference`` and ``excited`` datasets, optional
      ``reference_model`` and ``excited_model``
    * shift-vs-alpha, shift-vs-nbar, pol-vs-alpha: ``rows`` matching the header

    An empty ``rows`` list produces a header-only file.
    """
    if kind not in HEADERS:
        raise ValueError(f"unknown figure kind {kind!r}; choose from {', '.join(KINDS)}")
    if inputs is None:
        raise MissingInput(f"{kind}: no inputs")
    missing = [k for k in _REQUIRED[kind] if inputs.get(k) is None]
    if missing:
        raise MissingInput(f"{kind}: missing input(s) {', '.join(missing)}")
    if kind == "lineshape-fock-decomposition":
        rows = fock_decomposition_rows(inputs["model"], inputs["grid"],
                                       inputs.get("components", 6))
    elif kind == "spectrum-pair":
        rows = spectrum_pair_rows(inputs["reference"], inputs["excited"],
                                  inputs.get("reference_model"), inputs.get("excited_model"))
    else:
        rows = list(inputs["rows"])
    return write_csv(path, HEADERS[kind], rows)


def fock_decomposition_rows(model: SpectrumModel, grid, components=6):
    grid = np.asarray(grid, dtype=float)
    occ, weights, lines = fock_components(model, grid)
    keep = np.argsort(weights)[::-1][:components]
    f = angular_to_mhz(grid)
    rows = [(x, "total", "", 1.0, p) for x, p in zip(f, spectrum(model, grid))]
    for k in sorted(keep, key=lambda i: tuple(occ[i])):
        label = "|".join(str(int(n)) for n in occ[k])
        rows += [(x, "fock", label, weights[k], p) for x, p in zip(f, lines[k])]
    return rows


def spectrum_pair_rows(reference, excited, reference_model=None, excited_model=None):
    rows = []
    for name, data, model in (("reference", reference, reference_model),
                              ("excited", excited, excited_model)):
        fitted = spectrum(model, data.detunings) if model is not None \
            else np.full(len(data.detunings), np.nan)
        rows += list(zip([name] * len(data.detunings), angular_to_mhz(data.detunings),
                         data.probabilities, data.shots, fitted))
    return rows


def shift_vs_alpha_rows(truth, alphas, seed=0, n_starts=4):
    """Simulate and fit one pair per |alpha|; rows ``(alpha, shift_MHz, err)``.

    ``truth`` is a :class:`rydpol.montecarlo.SpectrumPairTruth`.
    """
    rows = []
    for k, a in enumerate(alphas):
        rng = np.random.default_rng([int(seed), k])
        ref, exc = truth.simulate(rng, alpha=a)
        fit = fit_spectrum_pair(ref, truth.reference_dists(), exc, truth.excited_dists(a),
                                truth.trap, truth.voigt, axes=truth.axes, n_starts=n_starts,
                                seed=rng, baseline=truth.baseline)
        rows.append((float(a), fit.extra["relative_shift"] / MHZ,
                     fit.extra["relative_shift_sigma"] / MHZ))
    return rows


def shift_vs_nbar_rows(trap, pol, nbars, axes=("x", "y"), voigt=None):
    """Model line shift of a single thermal mode versus its mean occupation.

    Only one mode is excited at a time; the others stay in the ground state.
    """
    voigt = voigt or VoigtParams(MHZ * 0.5, MHZ * 2.0)
    d = line_shift_per_phonon(trap, pol)
    rows = []
    for axis in axes:
        for nbar in nbars:
            modes = [ModeSpec(d[AXES.index(a)],
                              PhononDistribution.thermal(nbar if a == axis else 0.0))
                     for a in axes]
            shift = spectrum_centroid(SpectrumModel(0.0, modes, voigt)) / MHZ
            rows.append((float(nbar), axis, shift, 0.0))
    return rows


def pol_vs_alpha_rows(kicks):
    """``kicks`` is a list of dicts with alpha, alpha_err, pol and pol_err (SI)."""
    return [(k["alpha"], k["alpha_err"], k["pol"] / POL_UNIT, k["pol_err"] / POL_UNIT)
            for k in kicks]


def inputs_from_run(kind, run_dir):
    """Rebuild figure inputs from a pipeline output directory."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise MissingInput(f"no run directory {run_dir}")
    summary = read_json(run_dir / "summary.json")
    kicks = summary.get("kicks", [])
    if kind == "pol-vs-alpha":
        return {"rows": pol_vs_alpha_rows(kicks)}
    if kind == "shift-vs-alpha":
        return {"rows": [(k["alpha"], k["shift"] / MHZ, k["shift_err"] / MHZ) for k in kicks]}
    if kind == "spectrum-pair":
        if not kicks:
            raise MissingInput("run has no spectrum pairs")
        last = len(kicks) - 1
        return {"reference": read_spectrum(run_dir / "data" / f"kick{last}_reference.csv"),
                "excited": read_spectrum(run_dir / "data" / f"kick{last}_excited.csv")}
    if kind == "lineshape-fock-decomposition":
        if not kicks:
            raise MissingInput("run has no spectrum pairs")
        last = len(kicks) - 1
        meta = read_sidecar(run_dir / "data" / f"kick{last}_excited.csv")
        return {"model": _model_from_meta(meta), "grid": np.asarray(meta["grid"], dtype=float)}
    raise MissingInput(f"{kind} cannot be rebuilt from a pipeline run; use a sweep")


def _model_from_meta(meta):
    modes = [ModeSpec(m["delta_omega"], PhononDistribution.from_config(m["dist"]))
             for m in meta["modes"]]
    v = meta["voigt"]
    return SpectrumModel(meta["center"], modes, VoigtParams(v["sigma"], v["gamma_l"]),
                         meta["amplitude"], meta["baseline"])


def model_meta(model: SpectrumModel, grid):
    """JSON-able description of a spectrum model (inverse of the run loader)."""
    return {"center": model.center,
            "modes": [{"delta_omega": m.delta_omega, "dist": m.dist.to_config()}
                      for m in model.modes],
            "voigt": {"sigma": model.voigt.sigma, "gamma_l": model.voigt.gamma_l},
            "amplitude": model.amplitude, "baseline": model.baseline,
            "grid": [float(g) for g in grid]}
