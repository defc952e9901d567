"""Measurement fidelity matrices from counts, and sub-system extraction."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import (
    CountsRecord,
    FidelityMatrix,
    QubitLayout,
    SubsystemSelection,
    ValidationError,
    restrict_bits,
    transpose_positions,
)


def _common_shots(records: Sequence[CountsRecord]) -> int:
    shots = {r.shots for r in records}
    if len(shots) != 1:
        raise ValidationError(f"records disagree on shot count: {sorted(shots)}")
    return shots.pop()


def build_mfm(records: Sequence[CountsRecord], layout: QubitLayout) -> FidelityMatrix:
    """Direct construction: one record per prepared basis state of ``layout``."""
    m = layout.width
    rows: dict[int, np.ndarray] = {}
    for r in records:
        if r.width != m:
            raise ValidationError(
                f"record for {r.prepared} has width {r.width}, layout {layout} has width {m}"
            )
        if r.spectators:
            raise ValidationError(
                f"record for {r.prepared} has spectator qubits; use extract_with_spectators"
            )
        if r.prepared.value in rows:
            raise ValidationError(f"duplicate prepared state {r.prepared}")
        rows[r.prepared.value] = r.histogram
    missing = [format(i, f"0{m}b") for i in range(1 << m) if i not in rows]
    if missing:
        raise ValidationError(f"missing prepared state(s): {', '.join(missing[:8])}")
    n_s = _common_shots(records)
    entries = np.stack([rows[i] for i in range(1 << m)]).astype(float) / n_s
    return FidelityMatrix(layout, entries, shots=n_s)


def marginalize(K: FidelityMatrix, sel: SubsystemSelection) -> FidelityMatrix:
    """Sub-MFM on ``sel``: sum over traced outcome bits, average over traced preparations."""
    if sel.parent != K.layout:
        raise ValidationError(f"selection parent {sel.parent} does not match matrix layout {K.layout}")
    m = K.width
    keep = list(sel.positions)
    if len(keep) == m:
        if keep == list(range(m)):
            return K
        return K.replace(layout=sel.layout, entries=transpose_positions(K.entries, keep))
    traced = list(sel.complement)
    k = len(keep)
    order = keep + traced
    t = K.entries.reshape((2,) * (2 * m)).transpose(order + [m + p for p in order])
    t = t.reshape(1 << k, 1 << (m - k), 1 << k, 1 << (m - k))
    sub = t.sum(axis=3).mean(axis=1)
    return K.replace(layout=sel.layout, entries=sub)


def marginalize_qubits(K: FidelityMatrix, qubits: Sequence[int]) -> FidelityMatrix:
    return marginalize(K, SubsystemSelection.of_qubits(K.layout, qubits))


def extract_with_spectators(
    records: Sequence[CountsRecord], target: SubsystemSelection
) -> FidelityMatrix:
    """Target-subsystem MFM from runs whose remaining qubits were spectators.

    Each record's full-width outcomes are summed over the spectator bits.
    """
    parent = target.parent
    m, k = parent.width, target.width
    spectators = target.complement
    rows: dict[int, np.ndarray] = {}
    for r in records:
        if r.width != m:
            raise ValidationError(
                f"record for {r.prepared} has width {r.width}, parent layout {parent} has width {m}"
            )
        declared = r.spectators if r.spectators is not None else ()
        if tuple(declared) != spectators:
            raise ValidationError(
                f"record for {r.prepared} declares spectators {list(declared)}, "
                f"target {target.layout} needs {list(spectators)}"
            )
        key = restrict_bits(r.prepared, target.positions).value
        if key in rows:
            raise ValidationError(f"duplicate target preparation {format(key, f'0{k}b')}")
        h = r.histogram.reshape((2,) * m)
        if spectators:
            h = h.sum(axis=spectators)
        # remaining axes are the target positions in ascending order
        asc = sorted(target.positions)
        h = h.transpose([asc.index(p) for p in target.positions]).reshape(1 << k)
        rows[key] = h
    missing = [format(i, f"0{k}b") for i in range(1 << k) if i not in rows]
    if missing:
        raise ValidationError(f"missing target preparation(s): {', '.join(missing[:8])}")
    n_s = _common_shots(records)
    entries = np.stack([rows[i] for i in range(1 << k)]).astype(float) / n_s
    return FidelityMatrix(target.layout, entries, shots=n_s)


def bias_correction_factor(n_s: int) -> float:
    """Rescaling ``(1 - 1/n_s)**-1`` for cumulants whose factors share the joint's samples."""
    if int(n_s) != n_s or n_s < 2:
        raise ValidationError(f"bias correction needs an integer shot count >= 2, got {n_s!r}")
    return 1.0 / (1.0 - 1.0 / n_s)
