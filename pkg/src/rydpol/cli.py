"""Command-line entry point (``rydpol``).

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import io
from .config import ExperimentConfig, KickSettings, load_config
from .errors import ConfigError, MissingInput, RydpolError
from .figures import (KINDS, emit_figure_data, inputs_from_run, model_meta, shift_vs_alpha_rows,
                      shift_vs_nbar_rows)
from .inference import MHZ, fit_coherent_alpha, fit_spectrum_pair, fit_thermal_sidebands
from .lineshape import simulate_spectrum
from .montecarlo import (McConfig, SidebandTruth, SpectrumPairTruth, acceptance_band_uncertainty,
                         mc_uncertainty)
from .phonon_stats import PhononDistribution
from .pipeline import PipelineError, _axis_dists, _pair_models, run_pipeline, true_alphas
from .sideband_dynamics import RabiModel, simulate_dataset
from .units import POL_UNIT

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()] if text else []


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {
        "rabi.shots": getattr(args, "shots", None),
        "spectrum.shots": getattr(args, "shots", None),
        "mc.replicas": getattr(args, "replicas", None),
        "fit.starts": getattr(args, "starts", None),
    }
    pol = getattr(args, "pol", None)
    if pol is not None:
        overrides["state.polarizability"] = pol
    alphas = getattr(args, "alpha", None)
    if alphas:
        overrides["motion.kicks"] = tuple(KickSettings(alpha=a) for a in _floats(alphas))
    if getattr(args, "noiseless_priors", False):
        overrides["mc.noiseless"] = True
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return cfg.override(**overrides)


def _common(p, seed_required):
    p.add_argument("--config", required=True,
                   help="config JSON path or bundled name (table1-49S, table1-53S, table1-57S)")
    p.add_argument("--seed", type=int, required=seed_required,
                   help="master seed" + (" (required)" if seed_required else " for fit starts"))


def cmd_simulate_rabi(args):
    cfg = _config(args)
    out = Path(args.out)
    r = cfg.rabi
    model = RabiModel(r.omega0, cfg.eta(), r.gamma_dec, r.amplitude)
    rng = np.random.default_rng([args.seed, 0])
    th = PhononDistribution.thermal(cfg.motion.nbar_y)
    meta = {"eta": cfg.eta(), "omega0": r.omega0, "gamma_dec": r.gamma_dec,
            "amplitude": r.amplitude}
    for name, s, taus in (("carrier", 0, r.carrier_taus()), ("red", -1, r.sideband_taus()),
                          ("blue", 1, r.sideband_taus())):
        d = simulate_dataset(model.sideband(s), th, taus, r.shots, rng)
        io.write_rabi(out / f"thermal_{name}.csv", d, {**meta, "dist": th.to_config()})
    for k, a in enumerate(true_alphas(cfg, args.seed)):
        co = PhononDistribution.coherent(a)
        for name, s in (("red", -1), ("blue", 1)):
            d = simulate_dataset(model.sideband(s), co, r.coherent_taus(), r.shots, rng)
            io.write_rabi(out / f"kick{k}_{name}.csv", d, {**meta, "dist": co.to_config()})
    print(f"wrote Rabi datasets to {out}")


def cmd_simulate_spectrum(args):
    cfg = _config(args)
    out = Path(args.out)
    sp = cfg.spectrum
    axes = tuple(sp.axes)
    grid = sp.grid()
    m = cfg.motion
    for k, a in enumerate(true_alphas(cfg, args.seed)):
        ref_d = _axis_dists(cfg, axes, None, m.nbar_x, m.nbar_y)
        exc_d = _axis_dists(cfg, axes, PhononDistribution.coherent(a), m.nbar_x, m.nbar_y)
        ref_m, exc_m = _pair_models(cfg, cfg.state.pol_si, axes, ref_d, exc_d,
                                    sp.center_mhz * MHZ, (sp.amplitude,) * 2, sp.baseline)
        rng = np.random.default_rng([args.seed, 1, k])
        for name, model in (("reference", ref_m), ("excited", exc_m)):
            d = simulate_spectrum(model, grid, sp.shots, rng)
            io.write_spectrum(out / f"kick{k}_{name}.csv", d, model_meta(model, grid))
    print(f"wrote spectrum pairs to {out}")


def cmd_fit_alpha(args):
    cfg = _config(args)
    data = Path(args.data)
    th = [io.read_rabi(data / f"thermal_{n}.csv") for n in ("carrier", "red", "blue")]
    seed = 0 if args.seed is None else args.seed
    eta = cfg.eta()
    thermal = fit_thermal_sidebands(*th, eta, n_starts=cfg.fit.starts, seed=seed,
                                    weighting=cfg.fit.weighting)
    reports = {"thermal": thermal.to_dict(), "kicks": []}
    print(f"nbar = {thermal['nbar']:.4f} +- {thermal.uncertainties['nbar']:.4f}  "
          f"Omega0/2pi = {thermal['omega0'] / (2e3 * np.pi):.3f} kHz")
    k = 0
    while (data / f"kick{k}_red.csv").is_file():
        red = io.read_rabi(data / f"kick{k}_red.csv")
        blue = io.read_rabi(data / f"kick{k}_blue.csv")
        fit = fit_coherent_alpha(red, blue, thermal["omega0"], eta, thermal["gamma_dec"],
                                 thermal["amplitude"], n_starts=cfg.fit.starts,
                                 weighting=cfg.fit.weighting)
        reports["kicks"].append(fit.to_dict())
        print(f"kick{k}: |alpha| = {fit['alpha']:.4f} +- {fit.uncertainties['alpha']:.4f}")
        k += 1
    if args.out:
        io.write_json(args.out, reports)


def cmd_fit_pol(args):
    cfg = _config(args)
    data = Path(args.data)
    sp = cfg.spectrum
    axes = tuple(sp.axes)
    alphas = _floats(args.alpha_fit) if args.alpha_fit else None
    nbar = args.nbar
    if args.alpha_report:
        rep = io.read_json(args.alpha_report)
        alphas = [k["parameters"]["alpha"] for k in rep["kicks"]]
        nbar = rep["thermal"]["parameters"]["nbar"] if nbar is None else nbar
    nbar = cfg.motion.nbar_y if nbar is None else nbar
    results, k = [], 0
    while (data / f"kick{k}_reference.csv").is_file():
        ref = io.read_spectrum(data / f"kick{k}_reference.csv")
        exc = io.read_spectrum(data / f"kick{k}_excited.csv")
        if alphas is not None:
            a = alphas[k]
        else:
            meta = io.read_sidecar(data / f"kick{k}_excited.csv")
            a = next(m["dist"]["coherent"] for m in meta["modes"] if "coherent" in m["dist"])
        ref_d = _axis_dists(cfg, axes, None, nbar, nbar)
        exc_d = _axis_dists(cfg, axes, PhononDistribution.coherent(a), nbar, nbar)
        fit = fit_spectrum_pair(ref, ref_d, exc, exc_d, cfg.trap_parameters(), sp.voigt(),
                                axes=axes, n_starts=cfg.fit.starts,
                                seed=0 if args.seed is None else args.seed,
                                baseline=sp.baseline)
        results.append(fit.to_dict())
        print(f"kick{k}: |alpha| = {a:.3f}  P = {fit['polarizability'] / POL_UNIT:.4f} +- "
              f"{fit.uncertainties['polarizability'] / POL_UNIT:.4f} e-30 C m^2/V  "
              f"shift = {fit.extra['relative_shift'] / MHZ:.4f} MHz")
        k += 1
    if k == 0:
        raise MissingInput(f"no kick*_reference.csv files in {data}")
    if args.out:
        io.write_json(args.out, {"fits": results})


def cmd_mc(args):
    cfg = _config(args)
    mc = cfg.mc
    mcc = McConfig(replicas=max(mc.replicas, 1), seed=args.seed, eta_rel_sigma=mc.eta_rel_sigma,
                   alpha_rel_sigma=mc.alpha_rel_sigma, nbar_rel_sigma=mc.nbar_rel_sigma,
                   pol_start_range=tuple(mc.pol_start_range), noiseless=mc.noiseless,
                   workers=args.workers)
    alpha = max(true_alphas(cfg, args.seed)) if cfg.motion.kicks else 0.0
    r = cfg.rabi
    sp = cfg.spectrum
    if args.problem in ("thermal", "alpha"):
        truth = SidebandTruth(r.omega0, cfg.eta(), r.gamma_dec, r.amplitude, cfg.motion.nbar_y,
                              alpha, r.carrier_taus(), r.sideband_taus(), r.coherent_taus(),
                              r.shots)
    else:
        truth = SpectrumPairTruth(cfg.trap_parameters(), cfg.state.pol_si, alpha, sp.voigt(),
                                  sp.grid(), (cfg.motion.nbar_x, cfg.motion.nbar_y),
                                  cfg.motion.nbar_x, sp.center_mhz * MHZ, sp.amplitude,
                                  sp.baseline, sp.shots, tuple(sp.axes))
    if args.problem == "acceptance":
        report = acceptance_band_uncertainty(truth, mcc)
    else:
        report = mc_uncertainty(args.problem, truth, mcc)
    print(report.summary())
    if args.out:
        io.write_json(args.out, report.to_dict())


def cmd_pipeline(args):
    cfg = _config(args)
    out = Path(args.out)
    if not args.no_timestamp:
        out = out / f"{cfg.name}-seed{args.seed}-{time.strftime('%Y%m%dT%H%M%S')}"
    result = run_pipeline(cfg, args.seed, out)
    print(result.table())
    print(f"outputs in {out}")


def cmd_figure_data(args):
    if args.run:
        inputs = inputs_from_run(args.kind, args.run)
    elif args.kind == "shift-vs-alpha":
        cfg = _config(args)
        if args.seed is None:
            raise ConfigError("--seed is required for a simulated sweep")
        sp = cfg.spectrum
        truth = SpectrumPairTruth(cfg.trap_parameters(), cfg.state.pol_si, 0.0, sp.voigt(),
                                  sp.grid(), (cfg.motion.nbar_x, cfg.motion.nbar_y),
                                  cfg.motion.nbar_x, sp.center_mhz * MHZ, sp.amplitude,
                                  sp.baseline, sp.shots, tuple(sp.axes))
        inputs = {"rows": shift_vs_alpha_rows(truth, _floats(args.values), args.seed)}
    elif args.kind == "shift-vs-nbar":
        cfg = _config(args)
        inputs = {"rows": shift_vs_nbar_rows(cfg.trap_parameters(), cfg.state.pol_si,
                                             _floats(args.values), tuple(cfg.spectrum.axes),
                                             cfg.spectrum.voigt())}
    else:
        raise MissingInput(f"{args.kind} needs --run DIR (a pipeline output directory)")
    path = emit_figure_data(args.kind, inputs, args.out)
    print(f"wrote {path}")


def build_parser():
    p = argparse.ArgumentParser(prog="rydpol", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("simulate-rabi", help="simulate thermal and kicked sideband flopping")
    _common(s, True)
    s.add_argument("--out", required=True)
    s.add_argument("--shots", type=int)
    s.add_argument("--alpha", help="comma-separated |alpha| list replacing the kicks")
    s.set_defaults(func=cmd_simulate_rabi)

    s = sub.add_parser("simulate-spectrum", help="simulate reference/excited spectrum pairs")
    _common(s, True)
    s.add_argument("--out", required=True)
    s.add_argument("--shots", type=int)
    s.add_argument("--alpha", help="comma-separated |alpha| list replacing the kicks")
    s.add_argument("--pol", type=float, help="generating polarizability, 1e-30 C m^2/V")
    s.set_defaults(func=cmd_simulate_spectrum)

    s = sub.add_parser("fit-alpha", help="thermal sideband fit then |alpha| per kick")
    _common(s, False)
    s.add_argument("--data", required=True, help="directory written by simulate-rabi")
    s.add_argument("--out", help="JSON report path")
    s.add_argument("--starts", type=int)
    s.set_defaults(func=cmd_fit_alpha)

    s = sub.add_parser("fit-pol", help="fit (center, polarizability) to each spectrum pair")
    _common(s, False)
    s.add_argument("--data", required=True, help="directory written by simulate-spectrum")
    s.add_argument("--alpha-report", help="JSON report from fit-alpha")
    s.add_argument("--alpha-fit", help="comma-separated |alpha| per pair (overrides sidecars)")
    s.add_argument("--nbar", type=float, help="thermal occupation of reference modes")
    s.add_argument("--out", help="JSON report path")
    s.add_argument("--starts", type=int)
    s.set_defaults(func=cmd_fit_pol)

    s = sub.add_parser("mc", help="Monte-Carlo uncertainty of one fit")
    _common(s, True)
    s.add_argument("--problem", required=True,
                   choices=("thermal", "alpha", "polarizability", "acceptance"))
    s.add_argument("--replicas", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--noiseless-priors", action="store_true",
                   help="switch off nuisance priors and shot noise")
    s.add_argument("--out", help="JSON report path")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("pipeline", help="run the full synthetic experiment")
    _common(s, True)
    s.add_argument("--out", required=True, help="parent directory for the run")
    s.add_argument("--no-timestamp", action="store_true",
                   help="write directly into --out instead of a timestamped subdirectory")
    s.add_argument("--shots", type=int)
    s.add_argument("--replicas", type=int)
    s.add_argument("--starts", type=int)
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("figure-data", help="write plot-data CSVs")
    s.add_argument("--kind", required=True, choices=KINDS)
    s.add_argument("--run", help="pipeline output directory")
    s.add_argument("--config", help="config for sweeps")
    s.add_argument("--seed", type=int, help="required for simulated sweeps")
    s.add_argument("--values", default="",
                   help="comma-separated |alpha| or nbar values; empty writes only the header")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_figure_data)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG if isinstance(exc.cause, (ConfigError, MissingInput)) else EXIT_NUMERIC
        return code
    except (ConfigError, MissingInput, jsonschema.ValidationError, json.JSONDecodeError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RydpolError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
