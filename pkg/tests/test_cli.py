import csv
import json

import pytest

import rydpol.pipeline as pl
from rydpol.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from rydpol.errors import NonConvergence


def test_simulate_then_fit(tmp_path, capsys):
    rabi, spec = tmp_path / "rabi", tmp_path / "spec"
    assert main(["simulate-rabi", "--config", "table1-57S", "--seed", "3", "--out", str(rabi),
                 "--shots", "1000"]) == EXIT_OK
    assert main(["simulate-spectrum", "--config", "table1-57S", "--seed", "3",
                 "--out", str(spec), "--shots", "1000"]) == EXIT_OK
    report = tmp_path / "alpha.json"
    assert main(["fit-alpha", "--config", "table1-57S", "--data", str(rabi),
                 "--out", str(report), "--starts", "2"]) == EXIT_OK
    kicks = json.loads(report.read_text())["kicks"]
    assert [round(k["parameters"]["alpha"]) for k in kicks] == [2, 4, 6]
    out = tmp_path / "pol.json"
    assert main(["fit-pol", "--config", "table1-57S", "--data", str(spec),
                 "--alpha-report", str(report), "--out", str(out), "--starts", "2"]) == EXIT_OK
    fits = json.loads(out.read_text())["fits"]
    assert len(fits) == 3
    for f in fits:
        assert f["parameters"]["polarizability"] == pytest.approx(3.68e-30, rel=0.2)
    assert "kick2" in capsys.readouterr().out


def test_pipeline_and_figure_data(tmp_path):
    run = tmp_path / "run"
    assert main(["pipeline", "--config", "table1-49S", "--seed", "1", "--out", str(run),
                 "--no-timestamp", "--replicas", "2"]) == EXIT_OK
    assert (run / "manifest.json").is_file()
    for kind in ("pol-vs-alpha", "shift-vs-alpha", "spectrum-pair",
                 "lineshape-fock-decomposition"):
        out = tmp_path / f"{kind}.csv"
        assert main(["figure-data", "--kind", kind, "--run", str(run),
                     "--out", str(out)]) == EXIT_OK
        assert out.stat().st_size > 0


def test_timestamped_pipeline_dir(tmp_path):
    assert main(["pipeline", "--config", "table1-49S", "--seed", "1", "--out", str(tmp_path),
                 "--replicas", "0"]) == EXIT_OK
    (sub,) = list(tmp_path.iterdir())
    assert sub.name.startswith("table1-49S-seed1-")


def test_empty_sweep_is_header_only(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["figure-data", "--kind", "shift-vs-nbar", "--config", "table1-57S",
                 "--values", "", "--out", str(out)]) == EXIT_OK
    assert list(csv.reader(out.open())) == [["nbar", "mode", "shift_MHz", "err"]]


def test_mc_verb(tmp_path):
    out = tmp_path / "mc.json"
    assert main(["mc", "--config", "table1-57S", "--seed", "0", "--problem", "alpha",
                 "--replicas", "2", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["replicas"] == 2


@pytest.mark.parametrize("verb", ["simulate-rabi", "simulate-spectrum", "mc", "pipeline"])
def test_seed_mandatory_for_stochastic_verbs(tmp_path, verb):
    argv = [verb, "--config", "table1-57S", "--out", str(tmp_path)]
    if verb == "mc":
        argv += ["--problem", "alpha"]
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_config_errors_exit_2(tmp_path):
    assert main(["pipeline", "--config", "nope", "--seed", "1", "--out",
                 str(tmp_path)]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["pipeline", "--config", str(bad), "--seed", "1", "--out",
                 str(tmp_path)]) == EXIT_CONFIG
    assert main(["fit-alpha", "--config", "table1-57S", "--data",
                 str(tmp_path / "empty")]) == EXIT_CONFIG
    assert main(["figure-data", "--kind", "pol-vs-alpha", "--run", str(tmp_path / "none"),
                 "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_numerical_failure_exits_3(tmp_path, monkeypatch):
    def boom(*args):
        raise NonConvergence("forced")

    monkeypatch.setitem(pl._STAGE_FUNCS, "calibrate", boom)
    assert main(["pipeline", "--config", "table1-57S", "--seed", "1", "--out", str(tmp_path),
                 "--no-timestamp"]) == EXIT_NUMERIC
    assert (tmp_path / "error.json").is_file()
