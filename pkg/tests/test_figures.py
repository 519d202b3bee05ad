import csv
import math

import numpy as np
import pytest

from rydpol.errors import MissingInput
from rydpol.figures import (HEADERS, KINDS, emit_figure_data, shift_vs_alpha_rows,
                            shift_vs_nbar_rows)
from rydpol.lineshape import ModeSpec, SpectrumModel, VoigtParams
from rydpol.montecarlo import SpectrumPairTruth
from rydpol.phonon_stats import PhononDistribution as PD
from rydpol.trap_model import paper_trap

MHZ = 2 * math.pi * 1e6
POL = 3.68e-30


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("kind", ["shift-vs-alpha", "shift-vs-nbar", "pol-vs-alpha"])
def test_empty_sweep_writes_header_only(tmp_path, kind):
    path = emit_figure_data(kind, {"rows": []}, tmp_path / "f.csv")
    assert _read(path) == [list(HEADERS[kind])]


@pytest.mark.parametrize("kind", KINDS)
def test_missing_inputs(tmp_path, kind):
    with pytest.raises(MissingInput):
        emit_figure_data(kind, {}, tmp_path / "f.csv")
    with pytest.raises(MissingInput):
        emit_figure_data(kind, None, tmp_path / "f.csv")


def test_unknown_kind(tmp_path):
    with pytest.raises(ValueError):
        emit_figure_data("histogram", {"rows": []}, tmp_path / "f.csv")


def test_fock_decomposition(tmp_path):
    model = SpectrumModel(0.0, [ModeSpec(-0.0962 * MHZ, PD.coherent(3.0))],
                          VoigtParams(0.5 * MHZ, 2.0 * MHZ), 0.6)
    grid = np.linspace(-5, 2, 8) * MHZ
    rows = _read(emit_figure_data("lineshape-fock-decomposition",
                                  {"model": model, "grid": grid, "components": 4},
                                  tmp_path / "f.csv"))
    assert rows[0] == list(HEADERS["lineshape-fock-decomposition"])
    body = rows[1:]
    assert sum(r[1] == "total" for r in body) == 8
    fock = [r for r in body if r[1] == "fock"]
    assert len({r[2] for r in fock}) == 4
    # Poisson(9) peaks at n = 8, 9
    assert {"8", "9"} <= {r[2] for r in fock}


def test_shift_vs_alpha_quadratic(tmp_path):
    truth = SpectrumPairTruth(paper_trap(), POL, 0.0, VoigtParams(0.5 * MHZ, 2.0 * MHZ),
                              np.arange(-12, 6.0001, 0.15) * MHZ)
    alphas = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    rows = shift_vs_alpha_rows(truth, alphas, seed=3, n_starts=2)
    path = emit_figure_data("shift-vs-alpha", {"rows": rows}, tmp_path / "s.csv")
    assert _read(path)[0] == ["alpha", "shift_MHz", "err"]
    a, y, err = map(np.array, zip(*rows))
    design = np.c_[np.ones_like(a), a**2]
    coef, *_ = np.linalg.lstsq(design / err[:, None], y / err, rcond=None)
    resid = (y - design @ coef) / err
    # residuals consistent with noise: chi^2 per degree of freedom well below 3
    assert np.sum(resid**2) / (len(a) - 2) < 3.0
    assert coef[1] < 0


def test_shift_vs_nbar_linear_per_mode(tmp_path):
    nbars = [0.0, 0.5, 1, 2, 4, 8]
    rows = shift_vs_nbar_rows(paper_trap(), POL, nbars)
    emit_figure_data("shift-vs-nbar", {"rows": rows}, tmp_path / "n.csv")
    for mode in ("x", "y"):
        n, s = np.array([(r[0], r[2]) for r in rows if r[1] == mode]).T
        slope, icpt = np.polyfit(n, s, 1)
        np.testing.assert_allclose(s, slope * n + icpt, atol=1e-9)
        assert slope < 0
    slopes = {m: np.polyfit(*np.array([(r[0], r[2]) for r in rows if r[1] == m]).T, 1)[0]
              for m in ("x", "y")}
    assert slopes["y"] < slopes["x"]
