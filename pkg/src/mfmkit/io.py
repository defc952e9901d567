"""JSON/CSV file formats: counts, calibration, noise model, matrix, distribution."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema
import numpy as np

from .core import (
    CountsRecord,
    FidelityMatrix,
    QubitLayout,
    ValidationError,
)
from .simdevice import Cluster, NoiseModel

SCHEMA_VERSION = "1"
DEFAULT_SHOTS = 8192


class FileFormatError(ValidationError):
    """A file failed to parse or validate; the message names the location."""


_int_list = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_bits = {"type": "string", "pattern": "^[01]+$"}

COUNTS_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "layout", "shots", "records"],
    "properties": {
        "schema_version": {"type": "string"},
        "kind": {"const": "counts"},
        "layout": _int_list,
        "shots": {"type": "integer", "minimum": 1},
        "spectator_positions": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 0}},
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["prepared", "counts"],
                "properties": {
                    "prepared": _bits,
                    "counts": {
                        "type": "object",
                        "propertyNames": {"pattern": "^[01]+$"},
                        "additionalProperties": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
    },
}

CALIBRATION_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "entries"],
    "properties": {
        "schema_version": {"type": "string"},
        "kind": {"const": "calibration"},
        "entries": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["qubit", "p10", "p01"],
                "properties": {
                    "qubit": {"type": "integer", "minimum": 0},
                    "p10": {"type": "number", "minimum": 0, "maximum": 1},
                    "p01": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
    },
}

MATRIX_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "layout", "entries"],
    "properties": {
        "schema_version": {"type": "string"},
        "kind": {"const": "mfm"},
        "layout": _int_list,
        "shots": {"type": ["integer", "null"], "minimum": 1},
        "flags": {
            "type": "object",
            "properties": {k: {"type": "boolean"} for k in ("raw", "bias_corrected", "projected")},
        },
        "entries": _matrix,
    },
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "layout", "clusters"],
    "properties": {
        "schema_version": {"type": "string"},
        "kind": {"const": "noise_model"},
        "layout": _int_list,
        "spectator_mixing": {"enum": ["ideal_uniform", "none"]},
        "clusters": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["qubits", "matrix"],
                "properties": {
                    "qubits": _int_list,
                    "matrix": _matrix,
                    "excited_matrix": _matrix,
                    "excite_at": {"type": "integer", "minimum": 0},
                },
            },
        },
    },
}

DISTRIBUTION_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "layout"],
    "properties": {
        "schema_version": {"type": "string"},
        "kind": {"const": "distribution"},
        "layout": _int_list,
        "probs": {"type": "array", "items": {"type": "number"}},
        "counts": {
            "type": "object",
            "propertyNames": {"pattern": "^[01]+$"},
            "additionalProperties": {"type": "integer", "minimum": 0},
        },
        "quasi": {"type": "boolean"},
    },
    "oneOf": [{"required": ["probs"]}, {"required": ["counts"]}],
}


def _load(path: str | Path, schema: dict) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise FileFormatError(f"{path}: field {where}: {err.message}")
    return doc


def _dump(path: str | Path, doc: dict):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n")


def _fail(path, field: str, msg: str):
    raise FileFormatError(f"{path}: field {field}: {msg}")


# -- counts ---------------------------------------------------------------------


class CountsFile:
    """Parsed counts file: layout, shots, optional spectators, records."""

    def __init__(
        self,
        layout: QubitLayout,
        shots: int,
        records: Sequence[CountsRecord],
        spectator_positions: Sequence[int] | None = None,
    ):
        self.layout = layout
        self.shots = int(shots)
        self.records = list(records)
        self.spectator_positions = None if spectator_positions is None else tuple(sorted(spectator_positions))

    @property
    def target_qubits(self) -> tuple[int, ...]:
        sp = set(self.spectator_positions or ())
        return tuple(q for p, q in enumerate(self.layout.qubits) if p not in sp)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "counts",
            "layout": list(self.layout.qubits),
            "shots": self.shots,
            "spectator_positions": None if self.spectator_positions is None else list(self.spectator_positions),
            "records": [
                {"prepared": str(r.prepared), "counts": {str(k): v for k, v in r.counts.items()}}
                for r in self.records
            ],
        }


def load_counts(path: str | Path) -> CountsFile:
    doc = _load(path, COUNTS_SCHEMA)
    try:
        layout = QubitLayout(doc["layout"])
    except ValidationError as exc:
        _fail(path, "layout", str(exc))
    m = layout.width
    shots = doc["shots"]
    spectators = doc.get("spectator_positions")
    if spectators is not None:
        if any(p >= m for p in spectators) or len(set(spectators)) != len(spectators):
            _fail(path, "spectator_positions", f"invalid positions {spectators} for width {m}")
        if len(spectators) >= m:
            _fail(path, "spectator_positions", "at least one qubit must be a target")
    records = []
    for i, rec in enumerate(doc["records"]):
        if len(rec["prepared"]) != m:
            _fail(path, f"records/{i}/prepared", f"width {len(rec['prepared'])} != layout width {m}")
        for key in rec["counts"]:
            if len(key) != m:
                _fail(path, f"records/{i}/counts/{key}", f"width {len(key)} != layout width {m}")
        total = sum(rec["counts"].values())
        if total != shots:
            _fail(path, f"records/{i}/counts", f"counts sum to {total}, shots is {shots}")
        records.append(CountsRecord.from_counts(rec["prepared"], rec["counts"], spectators))
    return CountsFile(layout, shots, records, spectators)


def save_counts(path: str | Path, counts: CountsFile):
    _dump(path, counts.to_dict())


# -- calibration ----------------------------------------------------------------


def load_calibration(path: str | Path) -> dict[int, tuple[float, float]]:
    """Map qubit id to ``(p10, p01)``."""
    doc = _load(path, CALIBRATION_SCHEMA)
    out = {}
    for i, e in enumerate(doc["entries"]):
        if e["qubit"] in out:
            _fail(path, f"entries/{i}/qubit", f"duplicate qubit {e['qubit']}")
        out[e["qubit"]] = (float(e["p10"]), float(e["p01"]))
    return out


def save_calibration(path: str | Path, table: dict[int, tuple[float, float]]):
    _dump(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "calibration",
            "entries": [{"qubit": q, "p10": p10, "p01": p01} for q, (p10, p01) in table.items()],
        },
    )


# -- matrices -------------------------------------------------------------------


def matrix_to_dict(K: FidelityMatrix) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "mfm",
        "layout": list(K.layout.qubits),
        "shots": K.shots,
        "flags": {"raw": K.raw, "bias_corrected": K.bias_corrected, "projected": K.projected},
        "entries": K.entries.tolist(),
    }


def load_matrix(path: str | Path) -> FidelityMatrix:
    doc = _load(path, MATRIX_SCHEMA)
    flags = doc.get("flags", {})
    try:
        return FidelityMatrix(
            QubitLayout(doc["layout"]),
            np.array(doc["entries"], dtype=float),
            raw=flags.get("raw", False),
            bias_corrected=flags.get("bias_corrected", False),
            projected=flags.get("projected", False),
            shots=doc.get("shots"),
        )
    except (ValidationError, ValueError) as exc:
        _fail(path, "entries", str(exc))


def save_matrix(path: str | Path, K: FidelityMatrix):
    _dump(path, matrix_to_dict(K))


# -- noise model ----------------------------------------------------------------


def model_to_dict(model: NoiseModel) -> dict:
    clusters = []
    for c in model.clusters:
        entry: dict[str, Any] = {"qubits": list(c.layout.qubits), "matrix": c.matrix.entries.tolist()}
        if c.excited is not None:
            entry["excited_matrix"] = c.excited.entries.tolist()
            entry["excite_at"] = c.excite_at
        clusters.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "noise_model",
        "layout": list(model.layout.qubits),
        "spectator_mixing": model.spectator_mixing.value,
        "clusters": clusters,
    }


def load_model(path: str | Path) -> NoiseModel:
    doc = _load(path, MODEL_SCHEMA)
    clusters = []
    for i, c in enumerate(doc["clusters"]):
        try:
            layout = QubitLayout(c["qubits"])
            excited = c.get("excited_matrix")
            clusters.append(
                Cluster(
                    FidelityMatrix(layout, np.array(c["matrix"], dtype=float)),
                    None if excited is None else FidelityMatrix(layout, np.array(excited, dtype=float)),
                    c.get("excite_at"),
                )
            )
        except (ValidationError, ValueError) as exc:
            _fail(path, f"clusters/{i}", str(exc))
    try:
        return NoiseModel(QubitLayout(doc["layout"]), tuple(clusters), doc.get("spectator_mixing", "ideal_uniform"))
    except ValidationError as exc:
        _fail(path, "clusters", str(exc))


def save_model(path: str | Path, model: NoiseModel):
    _dump(path, model_to_dict(model))


# -- distributions ----------------------------------------------------------------


def load_distribution(path: str | Path) -> tuple[QubitLayout, np.ndarray]:
    """Layout and probability vector; a ``counts`` map is normalized."""
    doc = _load(path, DISTRIBUTION_SCHEMA)
    try:
        layout = QubitLayout(doc["layout"])
    except ValidationError as exc:
        _fail(path, "layout", str(exc))
    if "probs" in doc:
        probs = np.array(doc["probs"], dtype=float)
        if probs.shape != (layout.dim,):
            _fail(path, "probs", f"length {probs.size} != 2^{layout.width}")
        return layout, probs
    hist = np.zeros(layout.dim)
    for key, c in doc["counts"].items():
        if len(key) != layout.width:
            _fail(path, f"counts/{key}", f"width {len(key)} != layout width {layout.width}")
        hist[int(key, 2)] += c
    if hist.sum() == 0:
        _fail(path, "counts", "no counts")
    return layout, hist / hist.sum()


def save_distribution(
    path: str | Path, layout: QubitLayout, probs: np.ndarray, *, quasi: bool = False, **extra
):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "distribution",
        "layout": list(layout.qubits),
        "probs": [float(p) for p in probs],
        "quasi": quasi,
    }
    doc.update(extra)
    _dump(path, doc)


# -- plain reports ----------------------------------------------------------------


def save_json(path: str | Path, doc: dict):
    _dump(path, doc)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_heatmap(path: str | Path, layout: QubitLayout, H: np.ndarray):
    write_csv(path, [str(q) for q in layout.qubits], H.tolist())


def read_heatmap(path: str | Path) -> tuple[list[int], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [int(q) for q in rows[0]], np.array([[float(v) for v in r] for r in rows[1:]])
