"""File formats: covariance JSON, circuit JSON, binary quadrature datasets and CSV.

Covariance JSON::

    {"n_modes": 4, "ordering": "x1,p1,...,xn,pn", "matrix": [...64 numbers...],
     "mean": [...], "partition": {"a": [1, 2], "b": [3, 4]}}

Dataset files start with the magic line ``CVBQ1``, then one line holding a
JSON header (settings, per-setting counts, ordering), then the per-setting
sample blocks as little-endian float64, row-major, one row per joint outcome.
"""

import csv
import json
from pathlib import Path

import numpy as np

from . import circuit as circ
from .errors import InvalidArgument
from .gaussian import ORDERING, GaussianState, ModePartition
from .tomography import MeasurementSetting, QuadratureDataset

DATASET_MAGIC = b"CVBQ1\n"


class FormatError(InvalidArgument):
    """A file does not follow its documented format; ``field`` names the culprit."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


def _float(x):
    # repr gives the shortest round-tripping form (at most 17 significant digits)
    return float(x)


def dump_json(obj, path):
    text = json.dumps(obj, indent=2, allow_nan=True)
    Path(path).write_text(text + "\n")


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON ({exc})", field="json") from None


# covariance ------------------------------------------------------------------

def covariance_to_dict(state, partition=None):
    state = state if isinstance(state, GaussianState) else GaussianState(state)
    out = {
        "n_modes": state.n_modes,
        "ordering": ORDERING,
        "matrix": [_float(v) for v in state.cov.ravel()],
    }
    if np.any(state.mean != 0):
        out["mean"] = [_float(v) for v in state.mean]
    if partition is not None:
        out["partition"] = partition.to_dict()
    return out


def covariance_from_dict(d):
    """(GaussianState, ModePartition or None) from a covariance document."""
    if not isinstance(d, dict):
        raise FormatError("covariance document must be a JSON object", field="document")
    for key in ("n_modes", "ordering", "matrix"):
        if key not in d:
            raise FormatError(f"missing field {key!r}", field=key)
    if d["ordering"] != ORDERING:
        raise FormatError(
            f"field 'ordering' must be {ORDERING!r}, got {d['ordering']!r}", field="ordering"
        )
    n = d["n_modes"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise FormatError("field 'n_modes' must be a positive integer", field="n_modes")
    try:
        matrix = np.array(d["matrix"], dtype=float)
    except (TypeError, ValueError):
        raise FormatError("field 'matrix' must hold numbers", field="matrix") from None
    dim = 2 * n
    if matrix.size != dim * dim:
        raise FormatError(
            f"field 'matrix' has {matrix.size} entries, expected {dim * dim} for n_modes={n}",
            field="matrix",
        )
    mean = None
    if d.get("mean") is not None:
        mean = np.array(d["mean"], dtype=float)
        if mean.shape != (dim,):
            raise FormatError(f"field 'mean' must have {dim} entries", field="mean")
    partition = None
    if d.get("partition") is not None:
        try:
            partition = ModePartition.from_dict(d["partition"])
            partition.check(n)
        except (InvalidArgument, KeyError, TypeError) as exc:
            raise FormatError(f"field 'partition': {exc}", field="partition") from None
    return GaussianState(matrix.reshape(dim, dim), mean), partition


def write_covariance(path, state, partition=None):
    dump_json(covariance_to_dict(state, partition), path)


def read_covariance(path):
    return covariance_from_dict(load_json(path))


# circuits --------------------------------------------------------------------

def circuit_to_dict(spec):
    gates = []
    for g in spec.gates:
        if isinstance(g, circ.Rotation):
            gates.append({"type": "rotation", "modes": [g.mode], "phase_deg": _float(g.angle_deg)})
        else:
            gates.append({
                "type": "beamsplitter",
                "modes": list(g.modes),
                "transmissivity": _float(g.transmissivity),
                "phase_deg": _float(g.phase_deg),
            })
    out = {
        "sources": [
            {"kind": s.kind, "v_min": _float(s.v_min), "v_max": _float(s.v_max),
             "orientation_deg": _float(s.orientation_deg)}
            for s in spec.sources
        ],
        "gates": gates,
        "losses": [{"mode": l.mode, "efficiency": _float(l.efficiency)} for l in spec.losses],
    }
    if spec.partition is not None:
        out["partition"] = spec.partition.to_dict()
    return out


def circuit_from_dict(d):
    if not isinstance(d, dict) or "sources" not in d:
        raise FormatError("circuit document needs a 'sources' list", field="sources")
    sources = []
    for k, s in enumerate(d["sources"], start=1):
        try:
            sources.append(circ.SourceSpec(
                s.get("kind", circ.VACUUM), float(s.get("v_min", 1.0)),
                float(s.get("v_max", 1.0)), float(s.get("orientation_deg", 0.0)),
            ))
        except (InvalidArgument, TypeError, ValueError, AttributeError) as exc:
            raise FormatError(f"source {k}: {exc}", field=f"sources[{k}]") from None
    gates = []
    for k, g in enumerate(d.get("gates", []), start=1):
        try:
            kind = g["type"]
            modes = [int(m) for m in g["modes"]]
            if kind == "rotation":
                gates.append(circ.Rotation(modes[0], float(g.get("phase_deg", 0.0))))
            elif kind == "beamsplitter":
                gates.append(circ.PhaseGate(
                    tuple(modes), float(g["transmissivity"]), float(g.get("phase_deg", 0.0))
                ))
            else:
                raise InvalidArgument(f"unknown gate type {kind!r}")
        except (InvalidArgument, KeyError, TypeError, ValueError, IndexError) as exc:
            raise FormatError(f"gate {k}: {exc}", field=f"gates[{k}]") from None
    losses = []
    for k, l in enumerate(d.get("losses", []), start=1):
        try:
            losses.append(circ.LossSpec(int(l["mode"]), float(l["efficiency"])))
        except (InvalidArgument, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"loss {k}: {exc}", field=f"losses[{k}]") from None
    partition = None
    if d.get("partition") is not None:
        partition = ModePartition.from_dict(d["partition"])
    try:
        return circ.CircuitSpec(tuple(sources), tuple(gates), tuple(losses), partition)
    except InvalidArgument as exc:
        raise FormatError(str(exc), field="gates") from None


def write_circuit(path, spec):
    dump_json(circuit_to_dict(spec), path)


def read_circuit(path):
    return circuit_from_dict(load_json(path))


# datasets --------------------------------------------------------------------

def write_dataset(path, data):
    header = {
        "ordering": "per-setting rows of joint outcomes (q1,...,qn)",
        "n_modes": data.n_modes,
        "settings": [s.to_dict() for s in data.settings],
        "counts": data.counts,
        "dtype": "<f8",
    }
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(json.dumps(header).encode() + b"\n")
        for block in data.samples:
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def read_dataset(path):
    with open(path, "rb") as fh:
        if fh.read(len(DATASET_MAGIC)) != DATASET_MAGIC:
            raise FormatError(f"{path}: not a quadrature dataset file", field="magic")
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: malformed header ({exc})", field="header") from None
        n = int(header["n_modes"])
        settings = [MeasurementSetting.from_dict(s) for s in header["settings"]]
        blocks = []
        for s, count in zip(settings, header["counts"]):
            raw = fh.read(8 * n * count)
            if len(raw) != 8 * n * count:
                raise FormatError(f"{path}: truncated block for setting {s.label!r}", field="data")
            blocks.append(np.frombuffer(raw, dtype="<f8").reshape(count, n).astype(float))
    return QuadratureDataset(settings, blocks)


def read_csv_dataset(paths, settings):
    """One CSV per setting, one column per mode; a non-numeric first row is a header."""
    if len(paths) != len(settings):
        raise InvalidArgument("one CSV file is needed per setting")
    blocks = []
    for path, setting in zip(paths, settings):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows:
            try:
                [float(v) for v in rows[0]]
            except ValueError:
                rows = rows[1:]
        blocks.append(np.array(rows, dtype=float).reshape(-1, setting.n_modes))
    return QuadratureDataset(list(settings), blocks)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def write_qq_csv(path, report):
    rows = []
    for ch in report.channels:
        for theo, sample in ch.qq_points:
            rows.append((ch.label, float(theo), float(sample)))
    write_csv(path, ("channel", "normal_quantile", "sample_quantile"), rows)


def write_scatter_csv(path, report):
    """Bootstrap scatter with PPTness on the abscissa and entanglement on the ordinate."""
    rows = zip(report.p_samples, report.e_samples, report.physicality_samples)
    write_csv(path, ("ppt_margin", "entanglement", "physicality"), rows)


# presets ---------------------------------------------------------------------

PRESETS = {"bound-state": "bound_state.json"}


def load_preset(name):
    """Shipped circuit preset by name (currently only 'bound-state')."""
    from importlib import resources

    if name not in PRESETS:
        raise InvalidArgument(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    text = resources.files("cvbound").joinpath("presets", PRESETS[name]).read_text()
    return circuit_from_dict(json.loads(text))
