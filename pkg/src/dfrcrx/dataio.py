"""File formats and atomic output staging for the CLI and library users.

Conventions: CSV files start with ``#``-prefixed comment lines carrying the
config hash and column names; JSON sidecars are indented and key-sorted so
reruns are byte-identical; complex matrices go to ``.bin`` as interleaved
real/imag float64 with a JSON header.  Commands stage every artifact in
memory and flush at the end, each file written to a temp name and renamed,
so a failing command never leaves partial outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .filterdesign import DesignReport, FilterBank
from .processing import RangeDopplerMap
from .radarsim import DataMatrix
from .waveform import BasebandWaveform


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonify) + "\n"


def _jsonify(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"not JSON serializable: {type(obj)}")


def config_hash(mapping: dict) -> str:
    """Stable digest of a parsed configuration."""
    blob = json.dumps(mapping, sort_keys=True, separators=(",", ":"),
                      default=_jsonify)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial content."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class OutputStage:
    """Collects artifacts in memory; nothing touches disk until flush()."""

    root: str
    digest: str = ""
    files: dict = field(default_factory=dict)

    def add_text(self, relpath: str, text: str) -> None:
        self.files[relpath] = text.encode()

    def add_bytes(self, relpath: str, data: bytes) -> None:
        self.files[relpath] = data

    def add_json(self, relpath: str, obj) -> None:
        self.add_text(relpath, canonical_json(obj))

    def add_csv(self, relpath: str, columns, rows, extra_comments=()) -> None:
        lines = [f"# config_hash={self.digest}"]
        lines += [f"# {c}" for c in extra_comments]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_format_cell(v) for v in row))
        self.add_text(relpath, "\n".join(lines) + "\n")

    def flush(self) -> list:
        written = []
        for relpath in sorted(self.files):
            path = os.path.join(self.root, relpath)
            atomic_write_bytes(path, self.files[relpath])
            written.append(path)
        return written


def _format_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def waveform_rows(wf: BasebandWaveform):
    for i, s in enumerate(wf.samples):
        yield (i, s.real, s.imag)


def waveform_header(wf: BasebandWaveform) -> dict:
    return {
        "kind": wf.kind,
        "length": len(wf),
        "seed": None if wf.chips is None else wf.chips.seed,
        "theta0": wf.theta0,
        "params": wf.params.to_dict(),
    }


def filterbank_rows(bank: FilterBank):
    for k in range(bank.size):
        for i, tap in enumerate(bank.filters[k]):
            yield (k, i, tap.real, tap.imag)


def filterbank_header(bank: FilterBank) -> dict:
    meta = {key: val for key, val in bank.meta.items()
            if key != "objective_history"}
    return {
        "design": bank.design,
        "flavor": bank.flavor,
        "peak_index": bank.peak_index,
        "n_filters": bank.size,
        "taps": bank.taps,
        "meta": meta,
    }


def report_dict(report: DesignReport) -> dict:
    return report.to_dict()


def conv_matrix_rows(matrix):
    """Debug dump of a convolution matrix: (row, col, real, imag) entries."""
    entries = matrix.entries
    for r in range(entries.shape[0]):
        for c in range(entries.shape[1]):
            v = entries[r, c]
            yield (r, c, v.real, v.imag)


def conv_matrix_sidecar(matrix, flavor: str) -> dict:
    return {
        "rows": matrix.entries.shape[0],
        "cols": matrix.entries.shape[1],
        "flavor": flavor,
        "waveform": matrix.source,
        "waveform_len": matrix.L,
        "filter_len": matrix.L_f,
    }


def datamatrix_header(dm: DataMatrix, scene_digest: str = "") -> dict:
    return {
        "rows": dm.entries.shape[0],
        "pulses": dm.entries.shape[1],
        "gate_offset": dm.gate_offset,
        "dtype": "complex128 interleaved float64 (row-major)",
        "scene_digest": scene_digest,
    }


def datamatrix_bytes(dm: DataMatrix) -> bytes:
    return np.ascontiguousarray(dm.entries, dtype=np.complex128).tobytes()


def read_datamatrix(bin_path: str, header_path: str) -> DataMatrix:
    with open(header_path) as handle:
        header = json.load(handle)
    raw = np.fromfile(bin_path, dtype=np.complex128)
    entries = raw.reshape(header["rows"], header["pulses"])
    return DataMatrix(entries=entries, gate_offset=header["gate_offset"])


def datamatrix_rows(dm: DataMatrix):
    for r in range(dm.entries.shape[0]):
        for c in range(dm.entries.shape[1]):
            v = dm.entries[r, c]
            yield (r, c, v.real, v.imag)


def map_rows(rdmap: RangeDopplerMap):
    for i, gate in enumerate(rdmap.range_axis):
        yield [int(gate)] + [float(v) for v in rdmap.magnitudes[i]]


def map_axes(rdmap: RangeDopplerMap) -> dict:
    return {
        "doppler_axis": [float(v) for v in rdmap.doppler_axis],
        "range_axis": [int(v) for v in rdmap.range_axis],
    }


def curve_rows(points):
    for pt in points:
        yield (pt.x, pt.y, pt.wilson_ci[0], pt.wilson_ci[1], pt.trials)


CURVE_COLUMNS = ("x", "y", "ci_lo", "ci_hi", "trials")
