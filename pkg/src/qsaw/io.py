"""File formats: CSV series, JSON reports, binary state vectors and metadata sidecars.

CSV floats are written with ``repr`` so a fixed seed gives byte-identical
files.  The binary state layout is a 16-byte header (magic ``QSAW``, then
little-endian uint32 ``n``, basis tag, reserved zero) followed by ``2**n``
little-endian complex128 amplitudes, each stored as a (real, imag) float64
pair.
"""

from __future__ import annotations

import csv
import json
import platform
import struct
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy

from qsaw.analysis import FitReport
from qsaw.classical import EnsembleMoments
from qsaw.measurement import MeasurementHistogram
from qsaw.params import MapParams
from qsaw.propagator import ANGLE, MOMENTUM, StateVector, momentum_levels

SCHEMA_VERSION = "1.0"
MAGIC = b"QSAW"
_HEADER = struct.Struct("<4sIII")
_BASIS_TAGS = {MOMENTUM: 0, ANGLE: 1}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path, header: list[str], rows: Iterable) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_ensemble_csv(path, moments: Iterable[EnsembleMoments]) -> Path:
    return _write_rows(path, ["t", "mean_J", "var_J", "n_traj"],
                       ((m.t, m.mean_J, m.var_J, m.sample_count) for m in moments))


def read_ensemble_csv(path) -> list[EnsembleMoments]:
    _, rows = _read_rows(path)
    return [EnsembleMoments(int(t), float(a), float(v), int(c)) for t, a, v, c in rows]


def write_state_csv(path, psi: StateVector) -> Path:
    """Momentum-basis amplitudes with ``W_m`` per level."""
    if psi.basis != MOMENTUM:
        raise ValueError("state CSV holds momentum-basis amplitudes")
    a = psi.amplitudes
    m = momentum_levels(len(a))
    return _write_rows(path, ["m", "re_psi", "im_psi", "W_m"],
                       zip(m, a.real, a.imag, np.abs(a) ** 2))


def write_distribution_csv(path, W: np.ndarray) -> Path:
    W = np.asarray(W, float)
    return _write_rows(path, ["m", "W_m"], zip(momentum_levels(len(W)), W))


def read_distribution_csv(path) -> np.ndarray:
    header, rows = _read_rows(path)
    col = header.index("W_m")
    return np.array([float(r[col]) for r in rows])


def write_state_binary(path, psi: StateVector) -> Path:
    path = Path(path)
    data = np.ascontiguousarray(psi.amplitudes, dtype="<c16")
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, psi.params.n, _BASIS_TAGS[psi.basis], 0))
        fh.write(data.tobytes())
    return path


def read_state_binary(path, params: MapParams) -> StateVector:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("file too short for a state header")
    magic, n, tag, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not a state file (bad magic)")
    if n != params.n:
        raise ValueError(f"file holds n={n}, params have n={params.n}")
    basis = {v: k for k, v in _BASIS_TAGS.items()}.get(tag)
    if basis is None:
        raise ValueError(f"unknown basis tag {tag}")
    amps = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if amps.size != 2**n:
        raise ValueError(f"expected {2**n} amplitudes, found {amps.size}")
    return StateVector(amps.astype(complex), basis, params)


def write_histogram(path, hist: MeasurementHistogram) -> Path:
    """Histogram CSV plus a ``.json`` sidecar with ``n``, bin width, ``N_M`` and metadata."""
    path = _write_rows(path, ["bin_low_m", "bin_high_m", "count", "empirical_probability"],
                       zip(hist.bin_low_m(), hist.bin_high_m(), hist.counts,
                           hist.empirical_probabilities()))
    side = {"n": hist.n, "bin_width": hist.bin_width, "dropped_bits": hist.dropped_bits,
            "n_runs": hist.n_runs, "metadata": hist.metadata}
    write_json(path.with_suffix(".json"), side)
    return path


def read_histogram(path) -> MeasurementHistogram:
    path = Path(path)
    side = json.loads(path.with_suffix(".json").read_text())
    header, rows = _read_rows(path)
    col = header.index("count")
    counts = np.array([int(r[col]) for r in rows], dtype=np.int64)
    return MeasurementHistogram(side["n"], side["bin_width"], counts, side["n_runs"],
                                side.get("metadata", {}))


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def write_report(path, report: FitReport) -> Path:
    return write_json(path, report.to_dict())


def read_report(path) -> FitReport:
    d = json.loads(Path(path).read_text())
    d["window"] = tuple(d["window"])
    return FitReport(**d)


def versions() -> dict:
    from qsaw import __version__

    return {"qsaw": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_metadata(path, config: dict, seed: int, wall_time: float, outputs: list[str]) -> Path:
    """Sidecar recording everything needed to rerun an experiment.

    Wall time and versions vary between machines, so they live here and
    never in the data files.
    """
    return write_json(path, {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "seed": seed,
        "versions": versions(),
        "wall_time_s": wall_time,
        "outputs": outputs,
    })
