"""Ground-truth correlated readout simulator and circuit-cost arithmetic."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import (
    BitString,
    CountsRecord,
    FidelityMatrix,
    QubitLayout,
    SubsystemSelection,
    ValidationError,
    as_bitstring,
    kron_vectors_on_positions,
)
from .cumulant import cluster_product
from .estimate import marginalize

MAX_QUBITS = 12


class SpectatorMixing(str, Enum):
    IDEAL_UNIFORM = "ideal_uniform"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class Cluster:
    """Jointly noisy group of qubits.

    Rows of ``excited`` replace those of ``matrix`` for prepared cluster states
    holding at least ``excite_at`` one-bits. This emulates correlations that
    only show up once gates have acted on the qubits.
    """

    matrix: FidelityMatrix
    excited: FidelityMatrix | None = None
    excite_at: int | None = None

    def __post_init__(self):
        if self.matrix.raw:
            raise ValidationError("cluster matrices must be stochastic")
        if self.excited is not None:
            if self.excited.layout != self.matrix.layout:
                raise ValidationError("excited matrix layout differs from base matrix layout")
            if self.excited.raw:
                raise ValidationError("cluster matrices must be stochastic")
            at = self.matrix.width if self.excite_at is None else self.excite_at
            if not 0 <= at <= self.matrix.width:
                raise ValidationError(f"excite_at {at} out of range")
            object.__setattr__(self, "excite_at", at)

    @property
    def layout(self) -> QubitLayout:
        return self.matrix.layout

    def effective(self) -> FidelityMatrix:
        if self.excited is None:
            return self.matrix
        w = self.matrix.width
        hot = np.array([bin(i).count("1") >= self.excite_at for i in range(1 << w)])
        entries = np.where(hot[:, None], self.excited.entries, self.matrix.entries)
        return FidelityMatrix(self.matrix.layout, entries)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    layout: QubitLayout
    clusters: tuple[Cluster, ...]
    spectator_mixing: SpectatorMixing = SpectatorMixing.IDEAL_UNIFORM

    def __post_init__(self):
        clusters = tuple(self.clusters)
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "spectator_mixing", SpectatorMixing(self.spectator_mixing))
        seen = [q for c in clusters for q in c.layout.qubits]
        if sorted(seen) != sorted(self.layout.qubits) or len(seen) != len(set(seen)):
            raise ValidationError(f"clusters {seen} do not partition layout {self.layout}")
        if self.layout.width > MAX_QUBITS:
            raise ValidationError(f"layouts above {MAX_QUBITS} qubits are not supported")

    @classmethod
    def independent(
        cls,
        layout: QubitLayout,
        matrices: Sequence[np.ndarray] | np.ndarray,
        spectator_mixing: SpectatorMixing | str = SpectatorMixing.IDEAL_UNIFORM,
    ) -> NoiseModel:
        """One 2x2 confusion matrix per qubit; a single array is shared by all qubits."""
        arr = np.asarray(matrices, dtype=float)
        if arr.shape == (2, 2):
            arr = np.broadcast_to(arr, (layout.width, 2, 2))
        if arr.shape != (layout.width, 2, 2):
            raise ValidationError(f"expected {layout.width} 2x2 matrices, got shape {arr.shape}")
        clusters = [Cluster(FidelityMatrix(QubitLayout([q]), m)) for q, m in zip(layout.qubits, arr)]
        return cls(layout, tuple(clusters), spectator_mixing)

    @classmethod
    def noiseless(cls, layout: QubitLayout) -> NoiseModel:
        return cls.independent(layout, np.eye(2))

    def _cluster_positions(self) -> list[tuple[Cluster, tuple[int, ...]]]:
        return [(c, self.layout.positions(c.layout.qubits)) for c in self.clusters]

    def outcome_distribution(self, prep_bits: dict[int, int], mixed: Sequence[int] = ()) -> np.ndarray:
        """Full-width outcome distribution.

        ``prep_bits`` maps layout positions to prepared bits; positions in
        ``mixed`` are prepared uniformly at random.
        """
        mixed = set(mixed)
        vectors, positions = [], []
        for cluster, pos in self._cluster_positions():
            K = cluster.effective().entries
            w = len(pos)
            fixed_value, free = 0, []
            for k, p in enumerate(pos):
                if p in mixed:
                    free.append(w - 1 - k)
                else:
                    fixed_value |= prep_bits.get(p, 0) << (w - 1 - k)
            rows = [fixed_value]
            for shift in free:
                rows = rows + [r | (1 << shift) for r in rows]
            vectors.append(K[rows].mean(axis=0))
            positions.append(pos)
        return kron_vectors_on_positions(vectors, positions, range(self.layout.width))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, (list, tuple)):
        return np.random.default_rng([int(s) for s in seed])
    return np.random.default_rng(int(seed))


def _draw(probs: np.ndarray, n_s: int, seed) -> np.ndarray:
    p = np.clip(probs, 0.0, None)
    p = p / p.sum()
    return _rng(seed).multinomial(int(n_s), p)


def true_mfm(model: NoiseModel, sel: SubsystemSelection | None = None) -> FidelityMatrix:
    """Exact infinite-shot MFM of ``model`` restricted to ``sel`` (full layout by default)."""
    if sel is None:
        sel = SubsystemSelection(model.layout, range(model.layout.width))
    if sel.parent != model.layout:
        raise ValidationError(f"selection parent {sel.parent} is not the model layout {model.layout}")
    chosen = set(sel.layout.qubits)
    pieces = []
    for cluster in model.clusters:
        K = cluster.effective()
        inside = [q for q in K.layout.qubits if q in chosen]
        if not inside:
            continue
        part = marginalize(K, SubsystemSelection.of_qubits(K.layout, inside))
        pieces.append((part, SubsystemSelection.of_qubits(sel.layout, inside)))
    return cluster_product(pieces, sel.layout)


def _check_shots(n_s):
    if int(n_s) != n_s or n_s < 1:
        raise ValidationError(f"shot count must be a positive integer, got {n_s!r}")


def sample_counts(model: NoiseModel, prepared: BitString | str, n_s: int, seed) -> CountsRecord:
    """``n_s`` draws from the row of the full MFM for ``prepared``."""
    prepared = as_bitstring(prepared)
    _check_shots(n_s)
    if prepared.width != model.layout.width:
        raise ValidationError(f"prepared state {prepared} does not match layout {model.layout}")
    probs = model.outcome_distribution(dict(enumerate(prepared.bits)))
    return CountsRecord(prepared, _draw(probs, n_s, seed))


def _embed(target: SubsystemSelection, prepared_target: BitString) -> BitString:
    bits = [0] * target.parent.width
    for p, b in zip(target.positions, prepared_target.bits):
        bits[p] = b
    return BitString.from_bits(bits)


def spectator_run(
    model: NoiseModel,
    target: SubsystemSelection,
    prepared_target: BitString | str,
    n_s: int,
    seed,
) -> CountsRecord:
    """Prepare ``target`` in ``prepared_target`` with the other qubits as spectators.

    Under ``ideal_uniform`` mixing the spectator preparations are uniformly
    random; under ``none`` they stay in 0. Outcomes cover the full layout.
    """
    prepared_target = as_bitstring(prepared_target)
    _check_shots(n_s)
    if target.parent != model.layout:
        raise ValidationError(f"target parent {target.parent} is not the model layout {model.layout}")
    if prepared_target.width != target.width:
        raise ValidationError(f"prepared state {prepared_target} does not match target {target.layout}")
    prep = dict(zip(target.positions, prepared_target.bits))
    mixed = target.complement if model.spectator_mixing is SpectatorMixing.IDEAL_UNIFORM else ()
    probs = model.outcome_distribution(prep, mixed)
    return CountsRecord(_embed(target, prepared_target), _draw(probs, n_s, seed), target.complement)


def _experiment_key(seed: int, kind: int, positions: Sequence[int], row: int) -> list[int]:
    mask = sum(1 << p for p in positions)
    return [int(seed), kind, mask, row]


def full_mfm_experiment(
    model: NoiseModel, layout: QubitLayout | None = None, n_s: int = 8192, seed: int = 0
) -> list[CountsRecord]:
    """One record per prepared state of ``layout``.

    ``layout`` defaults to the model layout. A sub-layout is measured in
    isolation: the other qubits stay idle in 0 and are not read out.
    """
    layout = model.layout if layout is None else layout
    if layout.width > MAX_QUBITS:
        raise ValidationError(f"full MFM experiments above {MAX_QUBITS} qubits are not supported")
    sel = SubsystemSelection.of_qubits(model.layout, layout.qubits)
    records = []
    for row in range(layout.dim):
        prepared = BitString(row, layout.width)
        key = _experiment_key(seed, 0, sel.positions, row)
        if layout == model.layout:
            records.append(sample_counts(model, prepared, n_s, key))
            continue
        probs = model.outcome_distribution(dict(zip(sel.positions, prepared.bits)))
        sub = probs.reshape((2,) * model.layout.width)
        if sel.complement:
            sub = sub.sum(axis=sel.complement)
        asc = sorted(sel.positions)
        sub = sub.transpose([asc.index(p) for p in sel.positions]).reshape(layout.dim)
        records.append(CountsRecord(prepared, _draw(sub, n_s, key)))
    return records


def subsystem_experiment(
    model: NoiseModel, target: SubsystemSelection, n_s: int = 8192, seed: int = 0
) -> list[CountsRecord]:
    """All ``2^k`` spectator runs for one target subsystem."""
    return [
        spectator_run(
            model, target, BitString(row, target.width), n_s,
            _experiment_key(seed, 1, target.positions, row),
        )
        for row in range(1 << target.width)
    ]


_SPLIT = re.compile(r"split\((\d+)\)$")


def circuit_cost(n: int, strategy: str, k: int | None = None) -> int:
    """Number of distinct circuits needed to build an n-qubit MFM.

    ``strategy`` is one of ``full``, ``singles``, ``pairs``, ``triples``,
    ``split`` (with ``k``) or ``split(k)``.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    m = _SPLIT.match(strategy)
    if m:
        strategy, k = "split", int(m.group(1))
    if strategy == "full":
        return 2**n
    if strategy == "singles":
        return 2 * n
    if strategy == "pairs":
        return 4 * math.comb(n, 2)
    if strategy == "triples":
        return 8 * math.comb(n, 3)
    if strategy == "split":
        if k is None or not 1 <= k < n:
            raise ValidationError(f"split needs 1 <= k < n, got k={k}, n={n}")
        return 2**k + 2 ** (n - k)
    raise ValidationError(f"unknown strategy {strategy!r}")


def cost_curves(n_max: int = 20) -> list[dict[str, int | None]]:
    """Cost of each strategy for n = 1..n_max; the bipartition uses k = n // 2."""
    rows = []
    for n in range(1, n_max + 1):
        rows.append(
            {
                "n": n,
                "full": circuit_cost(n, "full"),
                "pairs": circuit_cost(n, "pairs"),
                "triples": circuit_cost(n, "triples"),
                "split": circuit_cost(n, "split", n // 2) if n >= 2 else None,
            }
        )
    return rows
