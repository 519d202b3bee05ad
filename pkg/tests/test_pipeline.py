import json

import pytest

import rydpol.pipeline as pl
from rydpol.config import ExperimentConfig, load_config
from rydpol.errors import ConfigError, NonConvergence
from rydpol.io import verify_manifest
from rydpol.pipeline import STAGES, PipelineError, run_pipeline


@pytest.fixture(scope="module")
def quick_cfg():
    return load_config("table1-57S").override(**{"mc.replicas": 2})


def test_outputs_and_manifest(tmp_path, quick_cfg):
    res = run_pipeline(quick_cfg, seed=4, out_dir=tmp_path)
    for rel in ("config.json", "summary.json", "manifest.json", "data/thermal_carrier.csv",
                "data/kick2_excited.csv", "fits/thermal.json", "fits/alpha_kick0.json",
                "fits/pair_kick2.json", "mc/alpha.json", "mc/polarizability.json",
                "figures/pol_vs_alpha.csv", "figures/shift_vs_alpha.csv",
                "figures/spectrum_pair_kick1.csv", "figures/lineshape_fock_decomposition.csv"):
        assert (tmp_path / rel).is_file(), rel
    assert verify_manifest(tmp_path) == []
    listed = {e["path"] for e in json.loads((tmp_path / "manifest.json").read_text())["files"]}
    on_disk = {p.relative_to(tmp_path).as_posix() for p in tmp_path.rglob("*") if p.is_file()}
    assert listed == on_disk - {"manifest.json"}
    assert len(res.estimates) == 3 and res.polarizability_sigma > 0
    assert "weighted P" in res.table()


def test_same_seed_same_bytes(tmp_path, quick_cfg):
    run_pipeline(quick_cfg, seed=9, out_dir=tmp_path / "a")
    run_pipeline(quick_cfg, seed=9, out_dir=tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*")
                   if p.is_file())
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_high_statistics_recovers_truth():
    cfg = load_config("table1-57S").override(**{"rabi.shots": 10**6, "spectrum.shots": 10**6,
                                                "mc.replicas": 0})
    res = run_pipeline(cfg, seed=1)
    assert res.polarizability == pytest.approx(cfg.state.pol_si, rel=0.01)
    for a_true, fit in zip(res.true_alphas, res.alpha_fits):
        assert fit["alpha"] == pytest.approx(a_true, rel=0.01)


def test_seed_required():
    with pytest.raises(ConfigError):
        run_pipeline(load_config("table1-49S"))


def test_voltage_kicks_use_kick_model():
    cfg = load_config("table1-57S").override(**{"mc.replicas": 0})
    doc = cfg.to_dict()
    doc["motion"]["kicks"] = [{"voltage_mv": 10.0}, {"voltage_mv": 20.0}]
    alphas = pl.true_alphas(ExperimentConfig.from_dict(doc), 0)
    assert alphas[1] == pytest.approx(2 * alphas[0], rel=1e-9)


@pytest.mark.parametrize("stage", ["alpha", "polarizability"])
def test_failure_is_stage_labelled_and_keeps_outputs(tmp_path, monkeypatch, quick_cfg, stage):
    def boom(*args):
        raise NonConvergence("forced")

    monkeypatch.setitem(pl._STAGE_FUNCS, stage, boom)
    with pytest.raises(PipelineError) as info:
        run_pipeline(quick_cfg, seed=2, out_dir=tmp_path)
    assert info.value.stage == stage
    assert isinstance(info.value.cause, NonConvergence)
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["stage"] == stage
    assert (tmp_path / "data" / "thermal_red.csv").is_file()
    assert (tmp_path / "fits" / "thermal.json").is_file()
    assert not (tmp_path / "summary.json").exists()
    assert verify_manifest(tmp_path) == []
    assert STAGES.index(stage) > STAGES.index("calibrate")
