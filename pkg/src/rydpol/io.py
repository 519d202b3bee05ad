"""CSV and JSON persistence plus the run manifest.

Fixed CSV headers (files use MHz and microseconds):

    Rabi data      tau_us,probability,shots
    Spectrum data  detuning_MHz,probability,shots

Each data file may carry a JSON sidecar (same stem, ``.json``) with the
metadata needed to refit it. Floats are written with ``repr`` so files
round-trip exactly and are byte-stable for identical inputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import MissingInput
from .inference import _jsonable
from .lineshape import SpectrumDataset
from .sideband_dynamics import RabiDataset
from .units import angular_to_mhz, mhz_to_angular, s_to_us, us_to_s

RABI_HEADER = ("tau_us", "probability", "shots")
SPECTRUM_HEADER = ("detuning_MHz", "probability", "shots")
MANIFEST = "manifest.json"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path, header):
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"missing data file {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        found = tuple(next(reader, ()))
        if found != tuple(header):
            raise ValueError(f"{path}: expected header {','.join(header)}, got {','.join(found)}")
        rows = [r for r in reader if r]
    return [[float(x) for x in r] for r in rows]


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"missing file {path}")
    return json.loads(path.read_text())


def write_rabi(path, data: RabiDataset, meta=None):
    path = write_csv(path, RABI_HEADER,
                     zip(s_to_us(data.taus), data.probabilities, data.shots))
    write_json(path.with_suffix(".json"),
               {"kind": "rabi", "sideband_order": int(data.sideband_order), **(meta or {})})
    return path


def read_rabi(path, sideband_order=None) -> RabiDataset:
    rows = np.array(read_csv(path, RABI_HEADER)).reshape(-1, 3)
    side = Path(path).with_suffix(".json")
    if sideband_order is None:
        sideband_order = read_json(side).get("sideband_order", 0) if side.is_file() else 0
    return RabiDataset(us_to_s(rows[:, 0]), rows[:, 1], rows[:, 2].astype(int),
                       int(sideband_order))


def write_spectrum(path, data: SpectrumDataset, meta=None):
    path = write_csv(path, SPECTRUM_HEADER,
                     zip(angular_to_mhz(data.detunings), data.probabilities, data.shots))
    write_json(path.with_suffix(".json"), {"kind": "spectrum", **(meta or {})})
    return path


def read_spectrum(path) -> SpectrumDataset:
    rows = np.array(read_csv(path, SPECTRUM_HEADER)).reshape(-1, 3)
    return SpectrumDataset(mhz_to_angular(rows[:, 0]), rows[:, 1], rows[:, 2].astype(int))


def read_sidecar(path):
    return read_json(Path(path).with_suffix(".json"))


def sha256_file(path):
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(run_dir, meta=None):
    """List every file under ``run_dir`` (except the manifest) with its sha256.

    Paths are relative and sorted; nothing time-dependent is recorded, so
    identical runs give identical manifests.
    """
    run_dir = Path(run_dir)
    files = sorted(p for p in run_dir.rglob("*")
                   if p.is_file() and p.relative_to(run_dir).as_posix() != MANIFEST)
    entries = [{"path": p.relative_to(run_dir).as_posix(), "sha256": sha256_file(p),
                "bytes": p.stat().st_size} for p in files]
    return write_json(run_dir / MANIFEST, {**(meta or {}), "files": entries})


def verify_manifest(run_dir):
    """Paths whose content no longer matches the manifest (empty when intact)."""
    run_dir = Path(run_dir)
    doc = read_json(run_dir / MANIFEST)
    bad = []
    for entry in doc["files"]:
        p = run_dir / entry["path"]
        if not p.is_file() or sha256_file(p) != entry["sha256"]:
            bad.append(entry["path"])
    return bad
